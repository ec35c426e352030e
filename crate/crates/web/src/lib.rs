//! wasm-bindgen surface for the static page in `www/`.
//!
//! Three operations: drive a [`Game`] with keyboard-sized actions and pull
//! its colour frame, pull the depth channel of the same frame, and generate
//! a maze as text.

use mazelab::sim::ActionVector;
use mazelab::{generate_maze, serialize_text_level, Env, EnvConfig, GoalPolicy, MazeParams, ObservationName, TASK_NAMES};
use wasm_bindgen::prelude::*;

/// A single first-person session, rendered as RGBD.
#[wasm_bindgen]
pub struct Game {
    env: Env,
    width: usize,
    height: usize,
}

#[wasm_bindgen]
impl Game {
    #[wasm_bindgen(constructor)]
    pub fn new(level: &str, width: usize, height: usize, seed: u32) -> Result<Game, String> {
        let config = EnvConfig::new(level, &[ObservationName::RgbdInterlaced])
            .with_size(width, height)
            .with_seed(seed as u64);
        let mut env = Env::new(config).map_err(|e| e.to_string())?;
        env.reset(None).map_err(|e| e.to_string())?;
        Ok(Game { env, width, height })
    }

    pub fn reset(&mut self, seed: u32) -> Result<(), String> {
        self.env.reset(Some(seed as u64)).map_err(|e| e.to_string())
    }

    /// Advance `repeat` ticks. `turn` and `look` are in look units
    /// (milliradians per tick); the rest are -1, 0 or 1.
    #[allow(clippy::too_many_arguments)]
    pub fn step(&mut self, turn: i32, look: i32, strafe: i32, forward: i32, fire: bool, jump: bool, repeat: u32) -> Result<f64, String> {
        let action = ActionVector {
            look_yaw: turn,
            look_pitch: look,
            strafe,
            forward,
            fire: fire as i32,
            jump: jump as i32,
            ..ActionVector::ZERO
        };
        self.env.step(&action.clamped(), repeat).map_err(|e| e.to_string())
    }

    /// Colour frame as RGBA, ready for `ImageData`.
    pub fn pixels(&mut self) -> Result<Vec<u8>, String> {
        Ok(self.rgbd()?.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2], 255]).collect())
    }

    /// Depth channel as grey RGBA: near is dark, thirty cells and beyond is white.
    pub fn depth(&mut self) -> Result<Vec<u8>, String> {
        Ok(self.rgbd()?.chunks_exact(4).flat_map(|p| [p[3], p[3], p[3], 255]).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tick(&self) -> u32 {
        self.env.tick() as u32
    }

    pub fn score(&self) -> f64 {
        self.env.score()
    }

    pub fn running(&self) -> bool {
        self.env.is_running()
    }
}

impl Game {
    fn rgbd(&mut self) -> Result<&[u8], String> {
        let obs = self.env.observations().map_err(|e| e.to_string())?;
        obs.get(ObservationName::RgbdInterlaced)
            .and_then(|v| v.as_bytes())
            .ok_or_else(|| "no pixel observation".to_string())
    }
}

/// Generated maze in the text level format; `random_goal` places the goal
/// on a uniformly random floor cell instead of the farthest one.
#[wasm_bindgen]
pub fn maze_text(width: usize, height: usize, seed: u32, random_goal: bool) -> Result<String, String> {
    let policy = if random_goal { GoalPolicy::UniformRandomFloor } else { GoalPolicy::FarthestFromSpawn };
    let maze = generate_maze(MazeParams::new(width, height, seed as u64, policy)).map_err(|e| e.to_string())?;
    Ok(serialize_text_level(&maze))
}

/// Built-in level names, newline separated.
#[wasm_bindgen]
pub fn level_names() -> String {
    TASK_NAMES.join("\n")
}
