//! Level categories, reward tables, and episode lifecycle.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bots::{BotBrain, BotPersona, Bot, DEFAULT_MAX_SHIELD};
use crate::level::{generate_maze, parse_named_text_level, CellKind, GoalPolicy, LevelError, LevelGrid, MazeParams};
use crate::rng::{SplitMix64, Stream};
use crate::sim::{seconds_to_ticks, ContactEvent, PickupKind, WorldState, PLAYER_ID};

/// Every shipped task, in registry order.
pub const TASK_NAMES: [&str; 13] = [
    "seekavoid_arena_01",
    "stairway_to_melon",
    "nav_maze_static_01",
    "nav_maze_static_02",
    "nav_maze_static_03",
    "nav_maze_random_goal_01",
    "nav_maze_random_goal_02",
    "nav_maze_random_goal_03",
    "random_maze",
    "lt_chasm",
    "lt_horseshoe_color",
    "lt_hallway_slope",
    "lt_space_bounce_hard",
];

const APPLE_RESPAWN_SECONDS: f64 = 10.0;

fn builtin_text(level: &str) -> Option<&'static str> {
    Some(match level {
        "seekavoid_arena_01" => include_str!("../levels/seekavoid_arena_01.maze.txt"),
        "stairway_to_melon" => include_str!("../levels/stairway_to_melon.maze.txt"),
        "nav_maze_static_01" => include_str!("../levels/nav_maze_static_01.maze.txt"),
        "nav_maze_static_02" => include_str!("../levels/nav_maze_static_02.maze.txt"),
        "nav_maze_static_03" => include_str!("../levels/nav_maze_static_03.maze.txt"),
        "lt_chasm" => include_str!("../levels/lt_chasm.maze.txt"),
        "lt_horseshoe_color" => include_str!("../levels/lt_horseshoe_color.maze.txt"),
        "lt_hallway_slope" => include_str!("../levels/lt_hallway_slope.maze.txt"),
        "lt_space_bounce_hard" => include_str!("../levels/lt_space_bounce_hard.maze.txt"),
        _ => return None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskCategory {
    FruitGather,
    NavStatic,
    NavRandomGoal,
    ProceduralNav,
    LaserTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LevelSource {
    /// Name of a shipped text level.
    BuiltinText(String),
    /// Fresh maze per episode; the seed field is replaced by the episode RNG.
    Generated(MazeParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalRespawn {
    None,
    TeleportPlayerOnGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub apple: f64,
    pub melon: f64,
    pub lemon: f64,
    pub goal: f64,
    pub tag: f64,
    pub fall: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            apple: 1.0,
            melon: 10.0,
            lemon: -1.0,
            goal: 10.0,
            tag: 1.0,
            fall: 0.0,
        }
    }
}

impl RewardTable {
    /// Enforce `melon > apple > 0 > lemon`.
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.melon > self.apple && self.apple > 0.0 && self.lemon < 0.0 {
            Ok(())
        } else {
            Err(TaskError::BadRewardTable(format!(
                "need melon > apple > 0 > lemon, got melon={} apple={} lemon={}",
                self.melon, self.apple, self.lemon
            )))
        }
    }

    pub fn pickup(&self, kind: PickupKind) -> f64 {
        match kind {
            PickupKind::Apple => self.apple,
            PickupKind::Melon => self.melon,
            PickupKind::Lemon => self.lemon,
            PickupKind::Goal => self.goal,
        }
    }

    pub fn value(&self, kind: RewardKind) -> f64 {
        match kind {
            RewardKind::Pickup(k) => self.pickup(k),
            RewardKind::GoalReached => self.goal,
            RewardKind::Tagged(_) => self.tag,
            RewardKind::Fell => self.fall,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    Pickup(PickupKind),
    GoalReached,
    Tagged(u32),
    Fell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub tick: u64,
    pub kind: RewardKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("bad reward table: {0}")]
    BadRewardTable(String),
    #[error("bad task override: {0}")]
    BadOverride(String),
    #[error("task has no bots")]
    NoBots,
    #[error(transparent)]
    Level(#[from] LevelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub category: TaskCategory,
    pub level_source: LevelSource,
    pub reward_table: RewardTable,
    pub episode_seconds: f64,
    pub bot_roster: Vec<BotPersona>,
    pub recolor_bots: bool,
    pub goal_respawn: GoalRespawn,
    pub bot_shield: u8,
}

const BOT_COLORS: [[u8; 3]; 4] = [[230, 60, 50], [60, 120, 240], [240, 200, 40], [200, 70, 220]];

fn roster(count: usize, skill: f64) -> Vec<BotPersona> {
    (0..count)
        .map(|i| BotPersona::new(skill, BOT_COLORS[i % BOT_COLORS.len()], (i % 4) as u8))
        .collect()
}

impl TaskSpec {
    /// The shipped configuration for `name`.
    pub fn builtin(name: &str) -> Result<TaskSpec, TaskError> {
        let text = |level: &str| LevelSource::BuiltinText(level.to_string());
        let base = |category, level_source, episode_seconds| TaskSpec {
            name: name.to_string(),
            category,
            level_source,
            reward_table: RewardTable::default(),
            episode_seconds,
            bot_roster: Vec::new(),
            recolor_bots: false,
            goal_respawn: GoalRespawn::None,
            bot_shield: DEFAULT_MAX_SHIELD,
        };
        let nav = |category, level: &str, seconds| TaskSpec {
            goal_respawn: GoalRespawn::TeleportPlayerOnGoal,
            ..base(category, text(level), seconds)
        };
        let laser = |level: &str, bots: usize, skill: f64, recolor: bool| TaskSpec {
            bot_roster: roster(bots, skill),
            recolor_bots: recolor,
            ..base(TaskCategory::LaserTag, text(level), 120.0)
        };
        let spec = match name {
            "seekavoid_arena_01" | "stairway_to_melon" => base(TaskCategory::FruitGather, text(name), 60.0),
            "nav_maze_static_01" => nav(TaskCategory::NavStatic, name, 60.0),
            "nav_maze_static_02" => nav(TaskCategory::NavStatic, name, 150.0),
            "nav_maze_static_03" => nav(TaskCategory::NavStatic, name, 300.0),
            "nav_maze_random_goal_01" => nav(TaskCategory::NavRandomGoal, "nav_maze_static_01", 60.0),
            "nav_maze_random_goal_02" => nav(TaskCategory::NavRandomGoal, "nav_maze_static_02", 150.0),
            "nav_maze_random_goal_03" => nav(TaskCategory::NavRandomGoal, "nav_maze_static_03", 300.0),
            "random_maze" => TaskSpec {
                goal_respawn: GoalRespawn::TeleportPlayerOnGoal,
                ..base(
                    TaskCategory::ProceduralNav,
                    LevelSource::Generated(MazeParams::new(15, 15, 0, GoalPolicy::FarthestFromSpawn)),
                    180.0,
                )
            },
            "lt_chasm" => laser(name, 3, 0.5, false),
            "lt_horseshoe_color" => laser(name, 3, 0.5, true),
            "lt_hallway_slope" => laser(name, 3, 0.5, false),
            "lt_space_bounce_hard" => laser(name, 3, 0.8, true),
            _ => return Err(TaskError::UnknownTask(name.to_string())),
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        self.reward_table.validate()?;
        if self.category == TaskCategory::LaserTag && self.bot_roster.is_empty() {
            return Err(TaskError::NoBots);
        }
        if !(self.episode_seconds > 0.0) {
            return Err(TaskError::BadOverride("episode_seconds must be positive".into()));
        }
        Ok(())
    }

    /// Episode length in ticks at `fps`.
    pub fn episode_ticks(&self, fps: u32) -> u64 {
        (self.episode_seconds * fps as f64 - 1e-9).ceil().max(1.0) as u64
    }

    /// Build the level and initial world for one episode.
    pub fn instantiate(&self, seed: u64) -> Result<(Arc<LevelGrid>, WorldState), TaskError> {
        self.validate()?;
        let mut rng = SplitMix64::new(seed);
        let mut level = match &self.level_source {
            LevelSource::BuiltinText(name) => {
                let text = builtin_text(name).ok_or_else(|| TaskError::UnknownTask(name.clone()))?;
                parse_named_text_level(name, text)?
            }
            LevelSource::Generated(params) => {
                let params = MazeParams {
                    seed: rng.next_u64(),
                    ..*params
                };
                generate_maze(params)?
            }
        };
        level.set_name(self.name.clone());

        if self.category == TaskCategory::NavRandomGoal {
            for (r, c) in level.positions_where(|k| k == CellKind::Goal) {
                level.set_kind(r, c, CellKind::Floor);
            }
            let floors = level.positions_where(|k| k == CellKind::Floor);
            let &(r, c) = rng.choose(&floors).expect("maze has floor cells");
            level.set_kind(r, c, CellKind::Goal);
        }

        let level = Arc::new(level);
        let spawn = *rng.choose(level.spawn_points()).expect("validated level has a spawn");
        let mut world = WorldState::new(level.clone(), spawn, rng.next_u64());

        for (kind, pickup) in [
            (CellKind::PickupApple, PickupKind::Apple),
            (CellKind::PickupMelon, PickupKind::Melon),
            (CellKind::PickupLemon, PickupKind::Lemon),
            (CellKind::Goal, PickupKind::Goal),
        ] {
            for cell in level.positions_where(|k| k == kind) {
                world.add_pickup(pickup, cell);
            }
        }

        if self.category == TaskCategory::LaserTag {
            let mut spawns: Vec<_> = level.spawn_points().iter().copied().filter(|&p| p != spawn).collect();
            if spawns.is_empty() {
                spawns.push(spawn);
            }
            rng.shuffle(&mut spawns);
            for (i, persona) in self.bot_roster.iter().enumerate() {
                let mut persona = persona.clone();
                if self.recolor_bots {
                    let bits = rng.next_u64();
                    persona.color = [(bits >> 16) as u8, (bits >> 8) as u8, bits as u8];
                    persona.texture_variant = ((bits >> 24) % 4) as u8;
                }
                let cell = spawns[i % spawns.len()];
                world.add_bot(Bot::new(persona, cell, BotBrain::Scripted, self.bot_shield));
            }
        }
        Ok((level, world))
    }

    /// Apply `key = value` overrides.
    pub fn apply_overrides(&mut self, overrides: &TaskOverrides) -> Result<(), TaskError> {
        for (key, value) in &overrides.entries {
            let bad = || TaskError::BadOverride(format!("{key} = {value}"));
            let num = || value.parse::<f64>().map_err(|_| bad());
            match key.as_str() {
                "reward.apple" => self.reward_table.apple = num()?,
                "reward.melon" => self.reward_table.melon = num()?,
                "reward.lemon" => self.reward_table.lemon = num()?,
                "reward.goal" => self.reward_table.goal = num()?,
                "reward.tag" => self.reward_table.tag = num()?,
                "reward.fall" => self.reward_table.fall = num()?,
                "episode_seconds" => self.episode_seconds = num()?,
                "recolor_bots" => self.recolor_bots = value.parse::<bool>().map_err(|_| bad())?,
                "bot_skill" => {
                    let skill = num()?;
                    if !(0.0..=1.0).contains(&skill) {
                        return Err(bad());
                    }
                    self.bot_roster.iter_mut().for_each(|b| b.skill = skill);
                }
                "bot_count" => {
                    let n = value.parse::<usize>().map_err(|_| bad())?;
                    let skill = self.bot_roster.first().map_or(0.5, |b| b.skill);
                    let mut roster = roster(n, skill);
                    for (dst, src) in roster.iter_mut().zip(&self.bot_roster) {
                        *dst = src.clone();
                    }
                    self.bot_roster = roster;
                }
                "bot_shield" => {
                    let n = value.parse::<u8>().map_err(|_| bad())?;
                    if n == 0 {
                        return Err(bad());
                    }
                    self.bot_shield = n;
                }
                "maze.width" | "maze.height" => {
                    let LevelSource::Generated(params) = &mut self.level_source else {
                        return Err(bad());
                    };
                    let n = value.parse::<usize>().map_err(|_| bad())?;
                    if key == "maze.width" {
                        params.width = n;
                    } else {
                        params.height = n;
                    }
                }
                _ => return Err(TaskError::BadOverride(format!("unknown key {key:?}"))),
            }
        }
        self.validate()
    }
}

/// Ordered `key = value` task overrides, read from a plain-text config file
/// (`#` starts a comment) or from repeated `--set key=value` flags.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOverrides {
    entries: Vec<(String, String)>,
}

impl TaskOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Parse one `key = value` (or `key=value`) assignment.
    pub fn push_assignment(&mut self, line: &str) -> Result<(), TaskError> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| TaskError::BadOverride(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(TaskError::BadOverride(format!("expected key = value, got {line:?}")));
        }
        self.set(k, v);
        Ok(())
    }
}

impl FromStr for TaskOverrides {
    type Err = TaskError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut out = TaskOverrides::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                out.push_assignment(line)?;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for TaskOverrides {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Resolve a shipped task and build its first world for `seed`.
pub fn load_task(name: &str, seed: u64) -> Result<(TaskSpec, Arc<LevelGrid>, WorldState), TaskError> {
    let spec = TaskSpec::builtin(name)?;
    let (level, world) = spec.instantiate(seed)?;
    Ok((spec, level, world))
}

/// Apply the consequences of one contact event and report its reward, if
/// the event is worth one.
pub fn handle_event(task: &TaskSpec, world: &mut WorldState, event: ContactEvent, dt: f64) -> Option<RewardEvent> {
    let tick = world.tick();
    let reward = |kind| RewardEvent {
        tick,
        kind,
        value: task.reward_table.value(kind),
    };
    match event {
        ContactEvent::PickupTouched { entity, kind: PickupKind::Goal } => {
            if task.goal_respawn == GoalRespawn::TeleportPlayerOnGoal {
                let cell = world.random_spawn(Stream::PlayerRespawn, PLAYER_ID);
                world.respawn_player(cell);
            } else if let Some(p) = world.entity_mut(entity).and_then(|e| e.as_pickup_mut()) {
                p.active = false;
            }
            Some(reward(RewardKind::GoalReached))
        }
        ContactEvent::PickupTouched { entity, kind } => {
            let pickup = world.entity_mut(entity)?.as_pickup_mut()?;
            if !pickup.active {
                return None;
            }
            pickup.active = false;
            pickup.respawn_timer = if task.category == TaskCategory::FruitGather && kind == PickupKind::Apple {
                seconds_to_ticks(APPLE_RESPAWN_SECONDS, dt)
            } else {
                0
            };
            Some(reward(RewardKind::Pickup(kind)))
        }
        ContactEvent::ProjectileHitBot { bot, owner } => {
            let downed = world.entity_mut(bot)?.as_bot_mut()?.take_hit(dt);
            (downed && owner == PLAYER_ID).then(|| reward(RewardKind::Tagged(bot)))
        }
        ContactEvent::ProjectileHitPlayer { .. } => {
            let p = &mut world.player;
            p.shield = p.shield.saturating_sub(1);
            if p.shield == 0 {
                let cell = world.random_spawn(Stream::PlayerRespawn, PLAYER_ID);
                world.respawn_player(cell);
            }
            None
        }
        ContactEvent::PlayerFell => {
            let cell = world.random_spawn(Stream::PlayerRespawn, PLAYER_ID);
            world.respawn_player(cell);
            Some(reward(RewardKind::Fell))
        }
    }
}

/// True once the episode has run its full length.
pub fn is_episode_done(task: &TaskSpec, world: &WorldState, fps: u32) -> bool {
    world.tick() >= task.episode_ticks(fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ActionVector, EntityKind};

    const DT: f64 = 1.0 / 60.0;

    #[test]
    fn every_builtin_loads() {
        for name in TASK_NAMES {
            let (spec, level, world) = load_task(name, 1).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(spec.name, name);
            assert_eq!(level.name(), name);
            assert_eq!(world.tick(), 0);
            match spec.category {
                TaskCategory::LaserTag => assert!(!world.bot_ids().is_empty()),
                TaskCategory::NavRandomGoal | TaskCategory::ProceduralNav | TaskCategory::NavStatic => {
                    assert_eq!(level.positions_where(|k| k == CellKind::Goal).len(), 1)
                }
                TaskCategory::FruitGather => {}
            }
        }
    }

    #[test]
    fn unknown_task() {
        assert_eq!(load_task("nope", 0).unwrap_err(), TaskError::UnknownTask("nope".into()));
    }

    #[test]
    fn random_maze_is_reproducible() {
        let (_, l1, w1) = load_task("random_maze", 42).unwrap();
        let (_, l2, w2) = load_task("random_maze", 42).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(w1, w2);
        let (_, l3, _) = load_task("random_maze", 43).unwrap();
        assert!(!l1.same_walls(&l3));
    }

    #[test]
    fn reward_ordering_is_enforced() {
        let mut spec = TaskSpec::builtin("seekavoid_arena_01").unwrap();
        let mut o = TaskOverrides::new();
        o.set("reward.apple", "20");
        assert!(matches!(spec.apply_overrides(&o), Err(TaskError::BadRewardTable(_))));
        let mut spec2 = TaskSpec::builtin("seekavoid_arena_01").unwrap();
        let o: TaskOverrides = "reward.melon = 50 # big\nreward.lemon=-5\n".parse().unwrap();
        spec2.apply_overrides(&o).unwrap();
        assert_eq!(spec2.reward_table.melon, 50.0);
        assert_eq!(spec2.reward_table.lemon, -5.0);
        let bad: Result<TaskOverrides, _> = "what".parse();
        assert!(bad.is_err());
        let mut o = TaskOverrides::new();
        o.set("colour", "red");
        assert!(matches!(spec.apply_overrides(&o), Err(TaskError::BadOverride(_))));
    }

    #[test]
    fn default_reward_values() {
        let t = RewardTable::default();
        assert_eq!(t.value(RewardKind::Pickup(PickupKind::Apple)), 1.0);
        assert_eq!(t.value(RewardKind::Pickup(PickupKind::Lemon)), -1.0);
        assert_eq!(t.value(RewardKind::Tagged(3)), 1.0);
        assert!(t.melon > t.apple && t.apple > 0.0 && 0.0 > t.lemon);
    }

    #[test]
    fn apple_touch_and_respawn() {
        let (spec, _, mut world) = load_task("seekavoid_arena_01", 0).unwrap();
        let apple = world
            .entities()
            .find(|e| e.as_pickup().is_some_and(|p| p.kind == PickupKind::Apple))
            .unwrap()
            .id;
        let ev = ContactEvent::PickupTouched { entity: apple, kind: PickupKind::Apple };
        let r = handle_event(&spec, &mut world, ev, DT).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!world.entity(apple).unwrap().as_pickup().unwrap().active);
        for _ in 0..600 {
            world.step(DT);
        }
        assert!(world.entity(apple).unwrap().as_pickup().unwrap().active);
    }

    #[test]
    fn lemon_is_negative() {
        let (spec, _, mut world) = load_task("stairway_to_melon", 0).unwrap();
        let lemon = world
            .entities()
            .find(|e| e.as_pickup().is_some_and(|p| p.kind == PickupKind::Lemon))
            .unwrap()
            .id;
        let ev = ContactEvent::PickupTouched { entity: lemon, kind: PickupKind::Lemon };
        assert_eq!(handle_event(&spec, &mut world, ev, DT).unwrap().value, -1.0);
        // A second touch in the same tick finds it inactive.
        assert!(handle_event(&spec, &mut world, ev, DT).is_none());
    }

    #[test]
    fn tag_on_last_shield_point() {
        let (spec, _, mut world) = load_task("lt_chasm", 5).unwrap();
        let bot = world.bot_ids()[0];
        if let EntityKind::Bot(b) = &mut world.entity_mut(bot).unwrap().kind {
            b.state.shield = 1;
        }
        let ev = ContactEvent::ProjectileHitBot { bot, owner: PLAYER_ID };
        let r = handle_event(&spec, &mut world, ev, DT).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.kind, RewardKind::Tagged(bot));
    }

    #[test]
    fn goal_teleports_and_persists() {
        let (spec, _, mut world) = load_task("nav_maze_static_01", 3).unwrap();
        let goal = world
            .entities()
            .find(|e| e.as_pickup().is_some_and(|p| p.kind == PickupKind::Goal))
            .unwrap()
            .id;
        let ev = ContactEvent::PickupTouched { entity: goal, kind: PickupKind::Goal };
        let r = handle_event(&spec, &mut world, ev, DT).unwrap();
        assert_eq!(r.kind, RewardKind::GoalReached);
        assert_eq!(r.value, 10.0);
        assert!(world.entity(goal).unwrap().as_pickup().unwrap().active);
        assert!(world.level().spawn_points().contains(&world.player.body.cell()));
    }

    #[test]
    fn episode_done_tick_arithmetic() {
        let (spec, _, mut world) = load_task("random_maze", 0).unwrap();
        assert!(!is_episode_done(&spec, &world, 60));
        assert_eq!(spec.episode_ticks(60), 10_800);
        let mut short = spec.clone();
        short.episode_seconds = 60.0;
        assert_eq!(short.episode_ticks(30), 1_800);
        for _ in 0..1_799 {
            world.step(1.0 / 30.0);
        }
        assert!(!is_episode_done(&short, &world, 30));
        world.step(1.0 / 30.0);
        assert!(is_episode_done(&short, &world, 30));
    }

    #[test]
    fn fall_respawns_with_zero_reward() {
        let (spec, _, mut world) = load_task("lt_chasm", 0).unwrap();
        world.player.alive = false;
        let r = handle_event(&spec, &mut world, ContactEvent::PlayerFell, DT).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(world.player.alive);
        world.apply_action(&ActionVector::ZERO);
    }
}
