//! Agent-facing environment: construct, reset, step with action repeat,
//! read observations.
//!
//! The world only moves inside [`Env::step`]. Rendering is lazy: a frame is
//! produced the first time [`Env::observations`] is called after a step or
//! reset and cached until the next one.
//!
//! Stability: the method set of [`Env`], the observation names, and their
//! shapes are versioned together with [`crate::PROTOCOL_VERSION`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::{encode_observation_into, render_into, Camera, FrameBuffer, PixelFormat, RenderError, MIN_DIMENSION};
use crate::rng::next_seed;
use crate::sim::{ActionVector, WorldState};
use crate::tasks::{handle_event, is_episode_done, RewardEvent, TaskError, TaskOverrides, TaskSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservationName {
    #[serde(rename = "RGB_INTERLACED")]
    RgbInterlaced,
    #[serde(rename = "RGBD_INTERLACED")]
    RgbdInterlaced,
    #[serde(rename = "VEL.TRANS")]
    VelTrans,
    #[serde(rename = "VEL.ROT")]
    VelRot,
}

impl ObservationName {
    pub const ALL: [ObservationName; 4] = [
        ObservationName::RgbInterlaced,
        ObservationName::RgbdInterlaced,
        ObservationName::VelTrans,
        ObservationName::VelRot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservationName::RgbInterlaced => "RGB_INTERLACED",
            ObservationName::RgbdInterlaced => "RGBD_INTERLACED",
            ObservationName::VelTrans => "VEL.TRANS",
            ObservationName::VelRot => "VEL.ROT",
        }
    }

    pub fn pixel_format(self) -> Option<PixelFormat> {
        match self {
            ObservationName::RgbInterlaced => Some(PixelFormat::RgbInterlaced),
            ObservationName::RgbdInterlaced => Some(PixelFormat::RgbdInterlaced),
            _ => None,
        }
    }
}

impl fmt::Display for ObservationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservationName {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObservationName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| EnvError::BadConfig(format!("unknown observation {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub level_name: String,
    pub observations: Vec<ObservationName>,
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub seed: u64,
    #[serde(default)]
    pub overrides: TaskOverrides,
}

impl EnvConfig {
    pub fn new(level_name: impl Into<String>, observations: &[ObservationName]) -> Self {
        EnvConfig {
            level_name: level_name.into(),
            observations: observations.to_vec(),
            width: 320,
            height: 240,
            fps: 60,
            seed: 0,
            overrides: TaskOverrides::new(),
        }
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_fps(mut self, fps: u32) -> Self {
        self.fps = fps;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.observations.is_empty() {
            return Err(EnvError::BadConfig("no observations requested".into()));
        }
        for (i, n) in self.observations.iter().enumerate() {
            if self.observations[..i].contains(n) {
                return Err(EnvError::BadConfig(format!("duplicate observation {n}")));
            }
        }
        if self.width < MIN_DIMENSION || self.height < MIN_DIMENSION {
            return Err(EnvError::BadConfig(format!(
                "resolution {}x{} below {MIN_DIMENSION}x{MIN_DIMENSION}",
                self.width, self.height
            )));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(EnvError::BadConfig("resolution too large".into()));
        }
        if self.fps == 0 {
            return Err(EnvError::BadConfig("fps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("unknown level {0:?}")]
    UnknownLevel(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("episode finished; call reset")]
    EpisodeFinished,
    #[error("environment has not been reset")]
    NotReset,
    #[error(transparent)]
    Task(TaskError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl From<TaskError> for EnvError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::UnknownTask(name) => EnvError::UnknownLevel(name),
            TaskError::BadOverride(s) | TaskError::BadRewardTable(s) => EnvError::BadConfig(s),
            other => EnvError::Task(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Bytes,
    Float,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub name: ObservationName,
    pub shape: Vec<usize>,
    pub kind: ValueKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservationValue {
    Bytes(Vec<u8>),
    Floats([f32; 3]),
}

impl ObservationValue {
    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            ObservationValue::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_floats(&self) -> Option<[f32; 3]> {
        match self {
            ObservationValue::Floats(v) => Some(*v),
            _ => None,
        }
    }
}

/// Named buffers in configuration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Observation {
    entries: Vec<(ObservationName, ObservationValue)>,
}

impl Observation {
    pub fn get(&self, name: ObservationName) -> Option<&ObservationValue> {
        self.entries.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObservationName, &ObservationValue)> {
        self.entries.iter().map(|(n, v)| (*n, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub struct Env {
    config: EnvConfig,
    task: TaskSpec,
    dt: f64,
    world: Option<WorldState>,
    episode_seed: Option<u64>,
    running: bool,
    score: f64,
    events: Vec<RewardEvent>,
    frame: FrameBuffer,
    /// Buffers are reused across steps; `fresh` says they hold this tick.
    obs: Observation,
    fresh: bool,
}

impl Env {
    /// Build an environment. It must be reset before stepping.
    pub fn new(config: EnvConfig) -> Result<Env, EnvError> {
        config.validate()?;
        let mut task = TaskSpec::builtin(&config.level_name)?;
        task.apply_overrides(&config.overrides)?;
        Self::with_task(config, task)
    }

    /// Build an environment around a custom task.
    pub fn with_task(config: EnvConfig, task: TaskSpec) -> Result<Env, EnvError> {
        config.validate()?;
        task.validate()?;
        let frame = FrameBuffer::new(config.width, config.height)?;
        let obs = Observation {
            entries: config
                .observations
                .iter()
                .map(|&n| {
                    let empty = match n.pixel_format() {
                        Some(_) => ObservationValue::Bytes(Vec::new()),
                        None => ObservationValue::Floats([0.0; 3]),
                    };
                    (n, empty)
                })
                .collect(),
        };
        Ok(Env {
            dt: 1.0 / config.fps as f64,
            config,
            task,
            world: None,
            episode_seed: None,
            running: false,
            score: 0.0,
            events: Vec::new(),
            frame,
            obs,
            fresh: false,
        })
    }

    /// Start an episode from a prepared world instead of instantiating the
    /// task. Later resets instantiate the task as usual.
    pub fn start_with_world(&mut self, world: WorldState) {
        self.begin(world);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    /// Seed of the current episode.
    pub fn episode_seed(&self) -> Option<u64> {
        self.episode_seed
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn tick(&self) -> u64 {
        self.world.as_ref().map_or(0, |w| w.tick())
    }

    /// Reward events of the current episode, in order.
    pub fn events(&self) -> &[RewardEvent] {
        &self.events
    }

    pub fn observation_spec(&self) -> Vec<ObservationSpec> {
        self.config
            .observations
            .iter()
            .map(|&name| match name.pixel_format() {
                Some(f) => ObservationSpec {
                    name,
                    shape: vec![self.config.height, self.config.width, f.channels()],
                    kind: ValueKind::Bytes,
                },
                None => ObservationSpec {
                    name,
                    shape: vec![3],
                    kind: ValueKind::Float,
                },
            })
            .collect()
    }

    /// Start a new episode. Without a seed, the first reset uses the
    /// configured seed and each later one advances it with
    /// [`next_seed`].
    pub fn reset(&mut self, seed: Option<u64>) -> Result<(), EnvError> {
        let seed = seed.unwrap_or_else(|| match self.episode_seed {
            None => self.config.seed,
            Some(prev) => next_seed(prev),
        });
        let (_, world) = self.task.instantiate(seed)?;
        self.episode_seed = Some(seed);
        self.begin(world);
        Ok(())
    }

    fn begin(&mut self, world: WorldState) {
        self.world = Some(world);
        self.running = true;
        self.score = 0.0;
        self.events.clear();
        self.fresh = false;
    }

    /// Apply `action` for `num_steps` ticks and return the summed reward.
    /// If the episode ends part-way, the remaining repeats are skipped and
    /// the next call fails with [`EnvError::EpisodeFinished`].
    pub fn step(&mut self, action: &ActionVector, num_steps: u32) -> Result<f64, EnvError> {
        let world = self.world.as_mut().ok_or(EnvError::NotReset)?;
        if !self.running {
            return Err(EnvError::EpisodeFinished);
        }
        if num_steps == 0 {
            return Err(EnvError::BadConfig("num_steps must be at least 1".into()));
        }
        self.fresh = false;
        let mut reward = 0.0;
        for _ in 0..num_steps {
            world.apply_action(action);
            world.step(self.dt);
            for event in world.take_events() {
                if let Some(r) = handle_event(&self.task, world, event, self.dt) {
                    reward += r.value;
                    self.events.push(r);
                }
            }
            if is_episode_done(&self.task, world, self.config.fps) {
                self.running = false;
                break;
            }
        }
        self.score += reward;
        Ok(reward)
    }

    /// Observations for the current tick, rendered on first request.
    pub fn observations(&mut self) -> Result<&Observation, EnvError> {
        let world = self.world.as_ref().ok_or(EnvError::NotReset)?;
        if !self.fresh {
            if self.obs.entries.iter().any(|(n, _)| n.pixel_format().is_some()) {
                render_into(world, &Camera::for_player(world), &mut self.frame);
            }
            let v = world.player.body.velocity;
            let (d_yaw, d_pitch) = world.player.last_turn;
            for (name, value) in &mut self.obs.entries {
                match (*name, value) {
                    (ObservationName::VelTrans, ObservationValue::Floats(out)) => {
                        *out = [v.x as f32, v.y as f32, v.z as f32];
                    }
                    (ObservationName::VelRot, ObservationValue::Floats(out)) => {
                        *out = [(d_yaw / self.dt) as f32, (d_pitch / self.dt) as f32, 0.0];
                    }
                    (pixels, ObservationValue::Bytes(buf)) => {
                        encode_observation_into(&self.frame, pixels.pixel_format().unwrap(), buf);
                    }
                    _ => unreachable!("observation buffers match their names"),
                }
            }
            self.fresh = true;
        }
        Ok(&self.obs)
    }

    /// The frame behind the last pixel observation.
    pub fn frame(&self) -> &FrameBuffer {
        &self.frame
    }
}
