//! Frame-rate measurement with a random-action agent.
//!
//! For every (resolution, format) pair: build a fresh environment, reset
//! with [`BENCH_SEED`], run [`WARMUP_FRAMES`] unmeasured steps, then time
//! `frames` steps. Each step samples one of [`random_actions`] uniformly,
//! steps once, and reads the observations, so every step renders exactly
//! one frame. Episodes that end mid-run are reset in place.

use std::fmt::{self, Write as _};
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, ObservationName};
use crate::render::PixelFormat;
use crate::rng::SplitMix64;
use crate::sim::ActionVector;

pub const WARMUP_FRAMES: u64 = 100;
pub const MIN_MEASURED_FRAMES: u64 = 1_000;
/// Measured frames per cell are split into this many interleaved blocks.
pub const BLOCKS: u64 = 5;
pub const BENCH_SEED: u64 = 0;
const ACTION_SEED: u64 = 0xBE7C_4A11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("measured frames must be at least {MIN_MEASURED_FRAMES}, got {0}")]
    TooFewFrames(u64),
    #[error("report has no rows")]
    NoRows,
    #[error("bad resolution {0:?}; expected WIDTHxHEIGHT")]
    BadResolution(String),
    #[error("bad format {0:?}; expected rgb or rgbd")]
    BadFormat(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Resolution { width, height }
    }

    pub fn pixels(self) -> usize {
        self.width * self.height
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Resolution {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::BadResolution(s.to_string());
        let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(Resolution::new(w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?))
    }
}

pub fn parse_resolutions(list: &str) -> Result<Vec<Resolution>, BenchError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

pub fn parse_formats(list: &str) -> Result<Vec<PixelFormat>, BenchError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| PixelFormat::from_short_name(s.trim()).ok_or_else(|| BenchError::BadFormat(s.to_string())))
        .collect()
}

/// The eleven actions the benchmark agent draws from: no-op, full-speed
/// yaw either way, quarter-speed pitch either way, strafe either way, move
/// either way, fire, jump.
pub fn random_actions() -> [ActionVector; 11] {
    let z = ActionVector::ZERO;
    let yaw = ActionVector::LOOK_LIMIT;
    let pitch = ActionVector::LOOK_LIMIT / 4;
    [
        z,
        ActionVector { look_yaw: yaw, ..z },
        ActionVector { look_yaw: -yaw, ..z },
        ActionVector { look_pitch: pitch, ..z },
        ActionVector { look_pitch: -pitch, ..z },
        ActionVector { strafe: 1, ..z },
        ActionVector { strafe: -1, ..z },
        ActionVector { forward: 1, ..z },
        ActionVector { forward: -1, ..z },
        ActionVector { fire: 1, ..z },
        ActionVector { jump: 1, ..z },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub resolution: Resolution,
    pub format: PixelFormat,
    pub fps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub level_name: String,
    pub rows: Vec<BenchRow>,
    pub warmup_frames: u64,
    pub measured_frames: u64,
    pub machine: String,
}

impl BenchReport {
    pub fn fps(&self, resolution: Resolution, format: PixelFormat) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.resolution == resolution && r.format == format)
            .map(|r| r.fps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// OS, architecture, logical CPU count, and CPU model when known.
pub fn machine_description() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".to_string());
    format!(
        "{} {}, {} logical cpu(s), {}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cpus,
        model
    )
}

/// Time `frames` random-action steps per (resolution, format) pair.
pub fn run_benchmark(
    level: &str,
    resolutions: &[Resolution],
    formats: &[PixelFormat],
    frames: u64,
) -> Result<BenchReport, BenchError> {
    if frames < MIN_MEASURED_FRAMES {
        return Err(BenchError::TooFewFrames(frames));
    }
    let mut cells = Vec::new();
    for &resolution in resolutions {
        for &format in formats {
            cells.push(Cell::new(level, resolution, format)?);
        }
    }
    // Round-robin blocks so a burst of host noise spreads over every cell
    // instead of landing on whichever one happened to be running.
    let per_block = frames.div_ceil(BLOCKS);
    for _ in 0..BLOCKS {
        for cell in &mut cells {
            cell.measure_block(per_block)?;
        }
    }
    let rows: Vec<BenchRow> = cells.into_iter().map(Cell::into_row).collect();
    if rows.is_empty() {
        return Err(BenchError::NoRows);
    }
    Ok(BenchReport {
        level_name: level.to_string(),
        rows,
        warmup_frames: WARMUP_FRAMES,
        measured_frames: per_block * BLOCKS,
        machine: machine_description(),
    })
}

struct Cell {
    resolution: Resolution,
    format: PixelFormat,
    env: Env,
    rng: SplitMix64,
    block_rates: Vec<f64>,
}

impl Cell {
    fn new(level: &str, resolution: Resolution, format: PixelFormat) -> Result<Cell, BenchError> {
        let name = match format {
            PixelFormat::RgbInterlaced => ObservationName::RgbInterlaced,
            PixelFormat::RgbdInterlaced => ObservationName::RgbdInterlaced,
        };
        let config = EnvConfig::new(level, &[name])
            .with_size(resolution.width, resolution.height)
            .with_seed(BENCH_SEED);
        let mut env = Env::new(config)?;
        env.reset(None)?;
        let mut cell = Cell {
            resolution,
            format,
            env,
            rng: SplitMix64::new(ACTION_SEED),
            block_rates: Vec::new(),
        };
        cell.run(WARMUP_FRAMES)?;
        Ok(cell)
    }

    fn run(&mut self, n: u64) -> Result<(), EnvError> {
        let actions = random_actions();
        for _ in 0..n {
            if !self.env.is_running() {
                self.env.reset(None)?;
            }
            let a = actions[self.rng.next_below(actions.len() as u64) as usize];
            self.env.step(&a, 1)?;
            black_box(self.env.observations()?);
        }
        Ok(())
    }

    fn measure_block(&mut self, n: u64) -> Result<(), EnvError> {
        let start = Instant::now();
        self.run(n)?;
        self.block_rates.push(n as f64 / start.elapsed().as_secs_f64().max(1e-9));
        Ok(())
    }

    /// Median block rate.
    fn into_row(mut self) -> BenchRow {
        self.block_rates.sort_by(f64::total_cmp);
        let n = self.block_rates.len();
        let fps = if n % 2 == 1 {
            self.block_rates[n / 2]
        } else {
            0.5 * (self.block_rates[n / 2 - 1] + self.block_rates[n / 2])
        };
        BenchRow {
            resolution: self.resolution,
            format: self.format,
            fps,
        }
    }
}

/// Fixed-width table: one row per resolution, one column per format,
/// frames/second to one decimal place, then the machine description.
pub fn format_report(report: &BenchReport) -> Result<String, BenchError> {
    if report.rows.is_empty() {
        return Err(BenchError::NoRows);
    }
    let mut resolutions: Vec<Resolution> = Vec::new();
    let mut formats: Vec<PixelFormat> = Vec::new();
    for r in &report.rows {
        if !resolutions.contains(&r.resolution) {
            resolutions.push(r.resolution);
        }
        if !formats.contains(&r.format) {
            formats.push(r.format);
        }
    }
    let mut out = String::new();
    writeln!(out, "Frame rate (frames/second) on {}", report.level_name).unwrap();
    write!(out, "{:<12}", "resolution").unwrap();
    for f in &formats {
        write!(out, "{:>10}", f.short_name().to_uppercase()).unwrap();
    }
    out.push('\n');
    for res in &resolutions {
        write!(out, "{:<12}", res.to_string()).unwrap();
        for &f in &formats {
            match report.fps(*res, f) {
                Some(fps) => write!(out, "{fps:>10.1}").unwrap(),
                None => write!(out, "{:>10}", "-").unwrap(),
            }
        }
        out.push('\n');
    }
    writeln!(
        out,
        "warmup {} frames, measured {} frames; {}",
        report.warmup_frames, report.measured_frames, report.machine
    )
    .unwrap();
    Ok(out)
}
