//! Deterministic, lock-stepped first-person grid worlds for reinforcement
//! learning: text and procedural levels, a fixed-step simulation with bots,
//! a software raycaster, task rewards, and an agent API.

pub mod bench;
pub mod bots;
pub mod env;
pub mod level;
pub mod protocol;
pub mod render;
pub mod rng;
#[cfg(not(target_arch = "wasm32"))]
pub mod serve;
pub mod sim;
pub mod tasks;

/// Version of the wire protocol and of the agent API surface.
pub const PROTOCOL_VERSION: u32 = 1;

pub use env::{Env, EnvConfig, EnvError, Observation, ObservationName, ObservationSpec, ObservationValue, ValueKind};
pub use level::{generate_maze, parse_text_level, serialize_text_level, CellKind, GoalPolicy, LevelError, LevelGrid, MazeParams};
pub use render::{encode_observation, render_frame, Camera, FrameBuffer, PixelFormat};
pub use sim::{ActionVector, WorldState};
pub use tasks::{load_task, TaskSpec, TASK_NAMES};
