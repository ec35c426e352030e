use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mazelab::bench::{format_report, parse_formats, parse_resolutions, run_benchmark};
use mazelab::protocol::Pacing;
use mazelab::rng::SplitMix64;
use mazelab::serve::{ServeConfig, Server};
use mazelab::tasks::TaskOverrides;
use mazelab::{generate_maze, serialize_text_level, Env, EnvConfig, GoalPolicy, MazeParams, ObservationName, TASK_NAMES};

#[derive(Parser)]
#[command(name = "mazelab", version, about = "Lock-stepped first-person grid-world environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame-rate table for a random-action agent.
    Bench {
        #[arg(long, default_value = "nav_maze_static_01")]
        level: String,
        #[arg(long, default_value = "84x84,160x120,320x240")]
        resolutions: String,
        #[arg(long, default_value = "rgb,rgbd")]
        formats: String,
        #[arg(long, default_value_t = 10_000)]
        frames: u64,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// WebSocket session server; plain GETs are answered from --web-root.
    Serve {
        /// Only serve this level.
        #[arg(long)]
        level: Option<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, value_enum, default_value_t = PacingArg::Lockstep)]
        pacing: PacingArg,
        #[arg(long)]
        web_root: Option<PathBuf>,
    },
    /// Render one frame to PPM or PNG (by extension).
    Render {
        #[arg(long, default_value = "seekavoid_arena_01")]
        level: String,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random actions to take before the frame is captured.
        #[arg(long, default_value_t = 0)]
        steps: u32,
        /// Write the depth channel as greyscale instead of colour.
        #[arg(long)]
        depth: bool,
        /// Task overrides file (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra override, repeatable: `--set reward.melon=20`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print a generated maze in the text level format.
    Maze {
        #[arg(long, default_value_t = 21)]
        width: usize,
        #[arg(long, default_value_t = 21)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = GoalArg::Farthest)]
        goal: GoalArg,
    },
    /// List the built-in levels.
    Levels,
}

#[derive(Clone, Copy, ValueEnum)]
enum PacingArg {
    Lockstep,
    Realtime,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Farthest,
    Random,
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mazelab: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench {
            level,
            resolutions,
            formats,
            frames,
            json,
        } => {
            let report = run_benchmark(&level, &parse_resolutions(&resolutions)?, &parse_formats(&formats)?, frames)?;
            print!("{}", format_report(&report)?);
            if let Some(path) = json {
                std::fs::write(path, report.to_json() + "\n")?;
            }
        }
        Command::Serve {
            level,
            host,
            port,
            pacing,
            web_root,
        } => {
            if let Some(root) = &web_root {
                if !root.is_dir() {
                    return Err(format!("web root {} is not a directory", root.display()).into());
                }
            }
            let server = Server::bind(ServeConfig {
                bind: format!("{host}:{port}"),
                level,
                pacing: match pacing {
                    PacingArg::Lockstep => Pacing::LockStep,
                    PacingArg::Realtime => Pacing::RealTime,
                },
                web_root,
                ..ServeConfig::default()
            })?;
            eprintln!("listening on ws://{}/", server.local_addr()?);
            server.run()?;
        }
        Command::Render {
            level,
            width,
            height,
            seed,
            steps,
            depth,
            config,
            set,
            out,
        } => {
            let mut overrides = match config {
                Some(path) => std::fs::read_to_string(path)?.parse::<TaskOverrides>()?,
                None => TaskOverrides::new(),
            };
            for kv in &set {
                overrides.push_assignment(kv)?;
            }
            let name = if depth { ObservationName::RgbdInterlaced } else { ObservationName::RgbInterlaced };
            let mut cfg = EnvConfig::new(level, &[name]).with_size(width, height).with_seed(seed);
            cfg.overrides = overrides;
            let mut env = Env::new(cfg)?;
            env.reset(None)?;
            let actions = mazelab::bench::random_actions();
            let mut rng = SplitMix64::new(seed);
            for _ in 0..steps {
                if !env.is_running() {
                    break;
                }
                env.step(&actions[rng.next_below(actions.len() as u64) as usize], 1)?;
            }
            let obs = env.observations()?;
            let bytes = obs.get(name).and_then(|v| v.as_bytes()).expect("pixel observation");
            let (pixels, channels) = if depth {
                (bytes.chunks_exact(4).map(|p| p[3]).collect::<Vec<u8>>(), 1)
            } else {
                (bytes.to_vec(), 3)
            };
            write_image(&out, width, height, channels, &pixels)?;
        }
        Command::Maze {
            width,
            height,
            seed,
            goal,
        } => {
            let policy = match goal {
                GoalArg::Farthest => GoalPolicy::FarthestFromSpawn,
                GoalArg::Random => GoalPolicy::UniformRandomFloor,
            };
            let maze = generate_maze(MazeParams::new(width, height, seed, policy))?;
            print!("{}", serialize_text_level(&maze));
        }
        Command::Levels => {
            for name in TASK_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

/// Binary PPM/PGM, or PNG when the path ends in `.png`.
fn write_image(path: &Path, width: usize, height: usize, channels: usize, pixels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        let mut enc = png::Encoder::new(&mut w, width as u32, height as u32);
        enc.set_color(if channels == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header()?.write_image_data(pixels)?;
    } else {
        let magic = if channels == 1 { "P5" } else { "P6" };
        write!(w, "{magic}\n{width} {height}\n255\n")?;
        w.write_all(pixels)?;
    }
    w.flush().map_err(|e: io::Error| e.into())
}
