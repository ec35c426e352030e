//! Scripted laser-tag opponents.
//!
//! Bots drive the same [`Body`] kinematics as the player through
//! [`Intents`]; only the yaw is set directly. Each tick, [`bot_think`] is
//! evaluated for every bot (ascending id) against the world as it stood at
//! the start of the tick, then all decisions are applied.

use std::collections::VecDeque;

use glam::DVec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{neighbors4, CellKind, CellPos, LevelGrid};
use crate::render::raycast::cast_ray_with;
use crate::rng::Stream;
use crate::sim::{cell_center, seconds_to_ticks, Body, Intents, WorldState, CELL_SIZE};

pub const DEFAULT_MAX_SHIELD: u8 = 3;
/// Line-of-sight range for noticing the player, in cells.
pub const SIGHT_CELLS: f64 = 12.0;
/// Range within which a visible player is attacked, in cells.
pub const ATTACK_CELLS: f64 = 8.0;
/// Ticks an Attack can persist after line of sight is lost.
pub const REACT_TICKS: u64 = 30;
/// Reaction delay at skill 0, in ticks; scaled by `1 - skill`.
pub const MAX_REACTION_TICKS: f64 = 20.0;
pub const MAX_AIM_SIGMA: f64 = 0.15;
pub const WANDER_REPATH_SECONDS: f64 = 4.0;
pub const CHASE_REPATH_SECONDS: f64 = 0.5;
pub const RESPAWN_SECONDS: f64 = 3.0;
const WAYPOINT_REACHED: f64 = 24.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BotPersona {
    /// In `[0, 1]`; scales aim noise and reaction delay.
    pub skill: f64,
    pub color: [u8; 3],
    pub texture_variant: u8,
}

impl BotPersona {
    pub fn new(skill: f64, color: [u8; 3], texture_variant: u8) -> Self {
        BotPersona {
            skill: skill.clamp(0.0, 1.0),
            color,
            texture_variant,
        }
    }

    pub fn aim_sigma(&self) -> f64 {
        (1.0 - self.skill) * MAX_AIM_SIGMA
    }

    pub fn reaction_ticks(&self) -> u64 {
        ((1.0 - self.skill) * MAX_REACTION_TICKS).round() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BotMode {
    Wander,
    Chase,
    Attack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BotState {
    pub mode: BotMode,
    pub path: VecDeque<CellPos>,
    pub repath_timer: u32,
    pub shield: u8,
    pub respawn_timer: u32,
    pub alive: bool,
    pub last_seen_tick: Option<u64>,
    pub seen_since: Option<u64>,
}

/// What drives a bot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BotBrain {
    /// Wander / chase / attack state machine.
    Scripted,
    /// Walk a fixed loop of waypoints forever and never fire.
    Rail { waypoints: Vec<CellPos>, next: usize },
    Idle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bot {
    pub body: Body,
    pub persona: BotPersona,
    pub state: BotState,
    pub brain: BotBrain,
    pub intents: Intents,
    pub fire_cooldown: u32,
    pub max_shield: u8,
}

impl Bot {
    pub fn new(persona: BotPersona, cell: CellPos, brain: BotBrain, max_shield: u8) -> Self {
        assert!(max_shield > 0, "bots need at least one shield point");
        Bot {
            body: Body::at_cell(cell, 0.0),
            persona,
            state: BotState {
                mode: BotMode::Wander,
                path: VecDeque::new(),
                repath_timer: 0,
                shield: max_shield,
                respawn_timer: 0,
                alive: true,
                last_seen_tick: None,
                seen_since: None,
            },
            brain,
            intents: Intents::default(),
            fire_cooldown: 0,
            max_shield,
        }
    }

    /// Remove one shield point. Returns true when this hit took the bot
    /// down; the bot then waits [`RESPAWN_SECONDS`] before reappearing.
    pub fn take_hit(&mut self, dt: f64) -> bool {
        if !self.state.alive || self.state.shield == 0 {
            return false;
        }
        self.state.shield -= 1;
        if self.state.shield == 0 {
            self.state.alive = false;
            self.state.respawn_timer = seconds_to_ticks(RESPAWN_SECONDS, dt).max(1);
            self.state.path.clear();
            self.intents = Intents::default();
            true
        } else {
            false
        }
    }

    pub fn respawn(&mut self, cell: CellPos) {
        self.body = Body::at_cell(cell, self.body.yaw);
        self.state.alive = true;
        self.state.shield = self.max_shield;
        self.state.respawn_timer = 0;
        self.state.mode = BotMode::Wander;
        self.state.path.clear();
        self.state.repath_timer = 0;
        self.state.last_seen_tick = None;
        self.state.seen_since = None;
        if let BotBrain::Rail { next, .. } = &mut self.brain {
            *next = 0;
        }
    }
}

/// Output of one [`bot_think`] evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct BotDecision {
    pub state: BotState,
    pub brain: BotBrain,
    pub yaw: f64,
    pub intents: Intents,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("cell ({0}, {1}) is not traversable")]
    BadCell(usize, usize),
}

fn walkable(kind: CellKind) -> bool {
    !matches!(kind, CellKind::Wall | CellKind::Pit)
}

/// Shortest 4-connected path from `from` to `to`, both included. Neighbors
/// are expanded N, E, S, W so ties break the same way every time. Pits are
/// avoided. Returns an empty path when `to` cannot be reached.
pub fn plan_path(level: &LevelGrid, from: CellPos, to: CellPos) -> Result<Vec<CellPos>, PathError> {
    for cell in [from, to] {
        if cell.0 >= level.height() || cell.1 >= level.width() || !walkable(level.kind(cell.0, cell.1)) {
            return Err(PathError::BadCell(cell.0, cell.1));
        }
    }
    let w = level.width();
    let mut parent: Vec<Option<usize>> = vec![None; w * level.height()];
    let start = from.0 * w + from.1;
    let goal = to.0 * w + to.1;
    parent[start] = Some(start);
    let mut queue = VecDeque::from([from]);
    while let Some((r, c)) = queue.pop_front() {
        if r * w + c == goal {
            break;
        }
        for (nr, nc) in neighbors4(r, c) {
            if !level.in_bounds(nr, nc) {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            let idx = nr * w + nc;
            if parent[idx].is_none() && walkable(level.kind(nr, nc)) {
                parent[idx] = Some(r * w + c);
                queue.push_back((nr, nc));
            }
        }
    }
    if parent[goal].is_none() {
        return Ok(Vec::new());
    }
    let mut path = vec![to];
    let mut cur = goal;
    while cur != start {
        cur = parent[cur].unwrap();
        path.push((cur / w, cur % w));
    }
    path.reverse();
    Ok(path)
}

/// True when nothing solid lies between two points on the floor plane.
pub fn line_of_sight(world: &WorldState, from: DVec2, to: DVec2) -> bool {
    let d = to - from;
    let dist = d.length();
    if dist < 1e-9 {
        return true;
    }
    match cast_ray_with(world.level(), from, d / dist, |r, c| world.is_solid(r, c)) {
        Ok(hit) => hit.distance >= dist,
        Err(_) => false,
    }
}

/// Decide the next intents for bot `bot_id`. Pure: reads the world and the
/// counter RNG at the current tick, never mutates. Returns `None` for a
/// missing or dead bot.
pub fn bot_think(world: &WorldState, bot_id: u32, dt: f64) -> Option<BotDecision> {
    let bot = world.entity(bot_id)?.as_bot()?;
    if !bot.state.alive {
        return None;
    }
    let mut state = bot.state.clone();
    let mut brain = bot.brain.clone();
    let pos = bot.body.position.truncate();
    let mut yaw = bot.body.yaw;
    let mut intents = Intents::default();

    match &mut brain {
        BotBrain::Idle => {}
        BotBrain::Rail { waypoints, next } => {
            if !waypoints.is_empty() {
                if pos.distance(cell_center(waypoints[*next])) < WAYPOINT_REACHED {
                    *next = (*next + 1) % waypoints.len();
                }
                let target = cell_center(waypoints[*next]);
                if let Some(dir) = (target - pos).try_normalize() {
                    yaw = dir.y.atan2(dir.x);
                    intents.forward = 1;
                }
            }
        }
        BotBrain::Scripted => {
            let tick = world.tick();
            let player = &world.player;
            let player_pos = player.body.position.truncate();
            let dist_cells = pos.distance(player_pos) / CELL_SIZE;
            let visible = player.alive && dist_cells <= SIGHT_CELLS && line_of_sight(world, pos, player_pos);
            if visible {
                state.last_seen_tick = Some(tick);
                state.seen_since.get_or_insert(tick);
            } else {
                state.seen_since = None;
            }
            state.repath_timer = state.repath_timer.saturating_sub(1);

            state.mode = if visible && dist_cells <= ATTACK_CELLS {
                BotMode::Attack
            } else if visible {
                BotMode::Chase
            } else {
                BotMode::Wander
            };
            debug_assert!(
                state.mode != BotMode::Attack
                    || state.last_seen_tick.is_some_and(|t| tick - t <= REACT_TICKS)
            );

            match state.mode {
                BotMode::Attack => {
                    state.path.clear();
                    let bearing = (player_pos - pos).y.atan2((player_pos - pos).x);
                    let sigma = bot.persona.aim_sigma();
                    let noise = if sigma > 0.0 {
                        sigma * world.rng().gaussian(tick, Stream::BotAim, bot_id)
                    } else {
                        0.0
                    };
                    yaw = bearing + noise;
                    let since = state.seen_since.unwrap_or(tick);
                    intents.fire = tick - since >= bot.persona.reaction_ticks();
                }
                BotMode::Chase => {
                    let target = player.body.cell();
                    let stale = state.path.back() != Some(&target);
                    if stale || state.repath_timer == 0 {
                        state.path = plan_path(world.level(), bot.body.cell(), target)
                            .unwrap_or_default()
                            .into();
                        state.repath_timer = seconds_to_ticks(CHASE_REPATH_SECONDS, dt);
                    }
                    follow_path(&mut state.path, pos, &mut yaw, &mut intents);
                }
                BotMode::Wander => {
                    if state.path.is_empty() || state.repath_timer == 0 {
                        let options = world.level().positions_where(walkable);
                        let pick = world.rng().below(tick, Stream::BotWander, bot_id, 0, options.len() as u64);
                        state.path = plan_path(world.level(), bot.body.cell(), options[pick as usize])
                            .unwrap_or_default()
                            .into();
                        state.repath_timer = seconds_to_ticks(WANDER_REPATH_SECONDS, dt);
                    }
                    follow_path(&mut state.path, pos, &mut yaw, &mut intents);
                }
            }
        }
    }

    Some(BotDecision {
        state,
        brain,
        yaw,
        intents,
    })
}

fn follow_path(path: &mut VecDeque<CellPos>, pos: DVec2, yaw: &mut f64, intents: &mut Intents) {
    while let Some(&front) = path.front() {
        if pos.distance(cell_center(front)) < WAYPOINT_REACHED {
            path.pop_front();
        } else {
            break;
        }
    }
    if let Some(&front) = path.front() {
        let d = cell_center(front) - pos;
        *yaw = d.y.atan2(d.x);
        intents.forward = 1;
    }
}
