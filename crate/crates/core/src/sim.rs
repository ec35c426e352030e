//! Fixed-timestep world simulation.
//!
//! A [`WorldState`] is a plain value. [`WorldState::apply_action`] stages the
//! player's intents (and applies look rotation); [`WorldState::step`]
//! advances exactly one tick. Nothing else mutates the world, which is what
//! makes the environment lock-stepped.
//!
//! World coordinates: `x` grows with the column, `y` with the row, `z` is up.
//! One cell is [`CELL_SIZE`] units. Yaw 0 faces `+x`; positive yaw turns
//! toward `+y` (to the right when the map is drawn north-up).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bots::{self, Bot};
use crate::level::{CellKind, CellPos, LevelGrid};
use crate::render::raycast::cast_ray_with;
use crate::rng::{CounterRng, Stream};

pub const CELL_SIZE: f64 = 100.0;
pub const WALL_HEIGHT: f64 = 300.0;
pub const PLAYER_ID: u32 = 0;
pub const PITCH_LIMIT: f64 = FRAC_PI_2 * 0.99;

const SNAPSHOT_MAGIC: &[u8; 4] = b"MLWS";
const SNAPSHOT_VERSION: u16 = 1;

/// Tunable physics constants. Units are world units and seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub max_speed: f64,
    pub crouch_speed: f64,
    /// Ground acceleration as a multiple of the wish speed, per second.
    pub accelerate: f64,
    pub friction: f64,
    pub gravity: f64,
    pub jump_speed: f64,
    pub pad_vertical_speed: f64,
    /// Launch speed for a pad that borders no pit; pads next to a pit aim
    /// at the far side instead.
    pub pad_horizontal_speed: f64,
    pub projectile_speed: f64,
    pub projectile_ttl: f64,
    pub cooldown_ticks: u32,
    pub yaw_rate: f64,
    pub pitch_rate: f64,
    pub body_radius: f64,
    pub standing_eye_height: f64,
    pub crouch_eye_height: f64,
    pub pit_depth: f64,
    pub door_trigger_radius: f64,
    pub door_close_delay: f64,
    pub door_travel_time: f64,
    pub pickup_radius: f64,
    pub player_shield: u8,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            max_speed: 320.0,
            crouch_speed: 160.0,
            accelerate: 10.0,
            friction: 6.0,
            gravity: 800.0,
            jump_speed: 270.0,
            pad_vertical_speed: 500.0,
            pad_horizontal_speed: 320.0,
            projectile_speed: 1000.0,
            projectile_ttl: 2.0,
            cooldown_ticks: 12,
            yaw_rate: 0.001,
            pitch_rate: 0.001,
            body_radius: 16.0,
            standing_eye_height: 64.0,
            crouch_eye_height: 40.0,
            pit_depth: 200.0,
            door_trigger_radius: 150.0,
            door_close_delay: 2.0,
            door_travel_time: 0.5,
            pickup_radius: 20.0,
            player_shield: 3,
        }
    }
}

pub fn seconds_to_ticks(seconds: f64, dt: f64) -> u32 {
    (seconds / dt).round().max(0.0) as u32
}

/// The seven-component action: look yaw, look pitch, strafe, move, fire,
/// jump, crouch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionVector {
    pub look_yaw: i32,
    pub look_pitch: i32,
    pub strafe: i32,
    pub forward: i32,
    pub fire: i32,
    pub jump: i32,
    pub crouch: i32,
}

impl ActionVector {
    pub const LEN: usize = 7;
    pub const LOOK_LIMIT: i32 = 512;
    pub const ZERO: ActionVector = ActionVector {
        look_yaw: 0,
        look_pitch: 0,
        strafe: 0,
        forward: 0,
        fire: 0,
        jump: 0,
        crouch: 0,
    };

    /// Build from the 7-int wire/array layout, clamping every component.
    pub fn from_array(a: [i32; 7]) -> Self {
        ActionVector {
            look_yaw: a[0],
            look_pitch: a[1],
            strafe: a[2],
            forward: a[3],
            fire: a[4],
            jump: a[5],
            crouch: a[6],
        }
        .clamped()
    }

    pub fn to_array(self) -> [i32; 7] {
        [
            self.look_yaw,
            self.look_pitch,
            self.strafe,
            self.forward,
            self.fire,
            self.jump,
            self.crouch,
        ]
    }

    pub fn clamped(self) -> Self {
        let l = Self::LOOK_LIMIT;
        ActionVector {
            look_yaw: self.look_yaw.clamp(-l, l),
            look_pitch: self.look_pitch.clamp(-l, l),
            strafe: self.strafe.clamp(-1, 1),
            forward: self.forward.clamp(-1, 1),
            fire: self.fire.clamp(0, 1),
            jump: self.jump.clamp(0, 1),
            crouch: self.crouch.clamp(0, 1),
        }
    }
}

/// Movement intents staged for the next tick. Shared by the player and bots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intents {
    pub forward: i8,
    pub strafe: i8,
    pub fire: bool,
    pub jump: bool,
    pub crouch: bool,
}

/// A kinematic body: vertical cylinder with a view direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub position: DVec3,
    pub velocity: DVec3,
    pub yaw: f64,
    pub pitch: f64,
    pub crouched: bool,
    pub grounded: bool,
}

impl Body {
    pub fn at_cell(cell: CellPos, yaw: f64) -> Self {
        Body {
            position: cell_center(cell).extend(0.0),
            velocity: DVec3::ZERO,
            yaw: wrap_angle(yaw),
            pitch: 0.0,
            crouched: false,
            grounded: true,
        }
    }

    pub fn forward(&self) -> DVec2 {
        DVec2::new(self.yaw.cos(), self.yaw.sin())
    }

    pub fn right(&self) -> DVec2 {
        DVec2::new(-self.yaw.sin(), self.yaw.cos())
    }

    pub fn eye_height(&self, cfg: &PhysicsConfig) -> f64 {
        if self.crouched {
            cfg.crouch_eye_height
        } else {
            cfg.standing_eye_height
        }
    }

    /// Height of the collision cylinder.
    pub fn height(&self, cfg: &PhysicsConfig) -> f64 {
        self.eye_height(cfg) + 8.0
    }

    pub fn eye(&self, cfg: &PhysicsConfig) -> DVec3 {
        self.position + DVec3::Z * self.eye_height(cfg)
    }

    pub fn cell(&self) -> CellPos {
        world_to_cell(self.position.truncate())
    }

    /// Unit view direction including pitch.
    pub fn view_dir(&self) -> DVec3 {
        let (sp, cp) = self.pitch.sin_cos();
        DVec3::new(cp * self.yaw.cos(), cp * self.yaw.sin(), sp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub body: Body,
    pub alive: bool,
    pub intents: Intents,
    pub fire_cooldown: u32,
    pub shield: u8,
    /// Rotation applied by the last action, radians per step (yaw, pitch).
    pub last_turn: (f64, f64),
}

impl PlayerState {
    pub fn new(body: Body, shield: u8) -> Self {
        PlayerState {
            body,
            alive: true,
            intents: Intents::default(),
            fire_cooldown: 0,
            shield,
            last_turn: (0.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PickupKind {
    Apple,
    Melon,
    Lemon,
    Goal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pickup {
    pub kind: PickupKind,
    pub position: DVec3,
    pub active: bool,
    pub respawn_timer: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projectile {
    pub owner: u32,
    pub position: DVec3,
    pub velocity: DVec3,
    /// Seconds left before expiry.
    pub ttl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EntityKind {
    Pickup(Pickup),
    Bot(Box<Bot>),
    Projectile(Projectile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub radius: f64,
    pub kind: EntityKind,
}

impl Entity {
    pub fn position(&self) -> DVec3 {
        match &self.kind {
            EntityKind::Pickup(p) => p.position,
            EntityKind::Bot(b) => b.body.position,
            EntityKind::Projectile(p) => p.position,
        }
    }

    pub fn velocity(&self) -> DVec3 {
        match &self.kind {
            EntityKind::Pickup(_) => DVec3::ZERO,
            EntityKind::Bot(b) => b.body.velocity,
            EntityKind::Projectile(p) => p.velocity,
        }
    }

    pub fn as_bot(&self) -> Option<&Bot> {
        match &self.kind {
            EntityKind::Bot(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_bot_mut(&mut self) -> Option<&mut Bot> {
        match &mut self.kind {
            EntityKind::Bot(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_pickup(&self) -> Option<&Pickup> {
        match &self.kind {
            EntityKind::Pickup(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_pickup_mut(&mut self) -> Option<&mut Pickup> {
        match &mut self.kind {
            EntityKind::Pickup(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoorPhase {
    Closed,
    /// Ticks spent opening.
    Opening(u32),
    /// Ticks since anything was last in range.
    Open(u32),
    /// Ticks spent closing.
    Closing(u32),
}

/// Contact events emitted by [`WorldState::step`] for the task layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContactEvent {
    PickupTouched { entity: u32, kind: PickupKind },
    ProjectileHitBot { bot: u32, owner: u32 },
    ProjectileHitPlayer { owner: u32 },
    PlayerFell,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a world snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("snapshot decode failed: {0}")]
    Decode(#[from] bincode::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    level: Arc<LevelGrid>,
    pub physics: PhysicsConfig,
    tick: u64,
    pub player: PlayerState,
    entities: BTreeMap<u32, Entity>,
    next_id: u32,
    door_cells: Vec<CellPos>,
    door_phases: Vec<DoorPhase>,
    /// Per-cell index into `door_phases`, `u32::MAX` when not a door.
    door_slot: Vec<u32>,
    rng: CounterRng,
    pending_events: Vec<ContactEvent>,
}

impl WorldState {
    /// A world with the player standing at `spawn`.
    pub fn new(level: Arc<LevelGrid>, spawn: CellPos, rng_key: u64) -> Self {
        Self::with_physics(level, spawn, rng_key, PhysicsConfig::default())
    }

    pub fn with_physics(level: Arc<LevelGrid>, spawn: CellPos, rng_key: u64, physics: PhysicsConfig) -> Self {
        let door_cells = level.positions_where(CellKind::is_door);
        let mut door_slot = vec![u32::MAX; level.width() * level.height()];
        for (i, &(r, c)) in door_cells.iter().enumerate() {
            door_slot[r * level.width() + c] = i as u32;
        }
        let yaw = spawn_yaw(&level, spawn);
        let shield = physics.player_shield;
        WorldState {
            door_phases: vec![DoorPhase::Closed; door_cells.len()],
            door_cells,
            door_slot,
            player: PlayerState::new(Body::at_cell(spawn, yaw), shield),
            level,
            physics,
            tick: 0,
            entities: BTreeMap::new(),
            next_id: 1,
            rng: CounterRng::new(rng_key),
            pending_events: Vec::new(),
        }
    }

    pub fn level(&self) -> &LevelGrid {
        &self.level
    }

    pub fn level_arc(&self) -> &Arc<LevelGrid> {
        &self.level
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn rng(&self) -> &CounterRng {
        &self.rng
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn entity_mut(&mut self, id: u32) -> Option<&mut Entity> {
        self.entities.get_mut(&id)
    }

    pub fn bot_ids(&self) -> Vec<u32> {
        self.entities
            .values()
            .filter(|e| matches!(e.kind, EntityKind::Bot(_)))
            .map(|e| e.id)
            .collect()
    }

    pub fn add_entity(&mut self, radius: f64, kind: EntityKind) -> u32 {
        assert!(radius > 0.0, "entity radius must be positive");
        let id = self.next_id;
        self.next_id += 1;
        self.entities.insert(id, Entity { id, radius, kind });
        id
    }

    pub fn add_pickup(&mut self, kind: PickupKind, cell: CellPos) -> u32 {
        let radius = self.physics.pickup_radius;
        self.add_entity(
            radius,
            EntityKind::Pickup(Pickup {
                kind,
                position: cell_center(cell).extend(0.0),
                active: true,
                respawn_timer: 0,
            }),
        )
    }

    pub fn add_bot(&mut self, bot: Bot) -> u32 {
        let radius = self.physics.body_radius;
        self.add_entity(radius, EntityKind::Bot(Box::new(bot)))
    }

    pub fn door_phase(&self, cell: CellPos) -> Option<DoorPhase> {
        let slot = self.door_slot[cell.0 * self.level.width() + cell.1];
        (slot != u32::MAX).then(|| self.door_phases[slot as usize])
    }

    /// Solid for movement, rays, and projectiles: walls and any door that is
    /// not fully open.
    pub fn is_solid(&self, row: usize, col: usize) -> bool {
        let idx = row * self.level.width() + col;
        match self.level.cells()[idx].kind {
            CellKind::Wall => true,
            CellKind::DoorEW | CellKind::DoorNS => {
                !matches!(self.door_phases[self.door_slot[idx] as usize], DoorPhase::Open(_))
            }
            _ => false,
        }
    }

    pub fn pending_events(&self) -> &[ContactEvent] {
        &self.pending_events
    }

    pub fn take_events(&mut self) -> Vec<ContactEvent> {
        std::mem::take(&mut self.pending_events)
    }

    /// Place the player at `cell`, standing still with full shield.
    pub fn respawn_player(&mut self, cell: CellPos) {
        let yaw = spawn_yaw(&self.level, cell);
        self.player.body = Body::at_cell(cell, yaw);
        self.player.alive = true;
        self.player.shield = self.physics.player_shield;
        self.player.fire_cooldown = 0;
    }

    /// A spawn point drawn from the world RNG for this tick.
    pub fn random_spawn(&self, stream: Stream, entity: u32) -> CellPos {
        let spawns = self.level.spawn_points();
        let i = self.rng.below(self.tick, stream, entity, 0, spawns.len() as u64);
        spawns[i as usize]
    }

    /// Stage player intents for the next tick and apply look rotation.
    /// No simulated time passes.
    pub fn apply_action(&mut self, action: &ActionVector) {
        let a = action.clamped();
        let p = &mut self.player;
        let d_yaw = a.look_yaw as f64 * self.physics.yaw_rate;
        p.body.yaw = wrap_angle(p.body.yaw + d_yaw);
        let old_pitch = p.body.pitch;
        p.body.pitch = (old_pitch + a.look_pitch as f64 * self.physics.pitch_rate).clamp(-PITCH_LIMIT, PITCH_LIMIT);
        p.last_turn = (d_yaw, p.body.pitch - old_pitch);
        p.intents = Intents {
            forward: a.forward as i8,
            strafe: a.strafe as i8,
            fire: a.fire != 0,
            jump: a.jump != 0,
            crouch: a.crouch != 0,
        };
    }

    /// Advance the world by one tick of `dt` seconds.
    pub fn step(&mut self, dt: f64) {
        let cfg = self.physics.clone();

        self.player.fire_cooldown = self.player.fire_cooldown.saturating_sub(1);
        if self.player.alive && self.player.intents.fire {
            self.fire_gadget();
        }

        self.think_bots(dt);

        if self.player.alive {
            let intents = self.player.intents;
            let outcome = integrate_body(self, &cfg, &self.player.body.clone(), &intents, dt);
            self.player.body = outcome.body;
            if outcome.fell {
                self.player.alive = false;
                self.pending_events.push(ContactEvent::PlayerFell);
            }
        }
        self.move_bots(&cfg, dt);
        self.update_doors(&cfg, dt);
        self.advance_projectiles(&cfg, dt);
        self.update_pickups(&cfg);
        self.tick += 1;
    }

    /// Spawn a projectile from the player's eye along the view direction,
    /// honoring the cooldown.
    pub fn fire_gadget(&mut self) -> Option<u32> {
        if self.player.fire_cooldown > 0 {
            return None;
        }
        self.player.fire_cooldown = self.physics.cooldown_ticks;
        let origin = self.player.body.eye(&self.physics);
        let dir = self.player.body.view_dir();
        Some(self.spawn_projectile(PLAYER_ID, origin, dir))
    }

    pub(crate) fn spawn_projectile(&mut self, owner: u32, origin: DVec3, dir: DVec3) -> u32 {
        let ttl = self.physics.projectile_ttl;
        let velocity = dir * self.physics.projectile_speed;
        self.add_entity(
            2.0,
            EntityKind::Projectile(Projectile {
                owner,
                position: origin,
                velocity,
                ttl,
            }),
        )
    }

    fn think_bots(&mut self, dt: f64) {
        let ids = self.bot_ids();
        let decisions: Vec<_> = ids.iter().map(|&id| (id, bots::bot_think(self, id, dt))).collect();
        for (id, decision) in decisions {
            let Some(decision) = decision else { continue };
            let eye;
            let fire;
            {
                let bot = self.entities.get_mut(&id).and_then(Entity::as_bot_mut).unwrap();
                bot.fire_cooldown = bot.fire_cooldown.saturating_sub(1);
                bot.state = decision.state;
                bot.brain = decision.brain;
                bot.body.yaw = wrap_angle(decision.yaw);
                bot.intents = decision.intents;
                fire = decision.intents.fire && bot.fire_cooldown == 0;
                if fire {
                    bot.fire_cooldown = self.physics.cooldown_ticks;
                }
                eye = bot.body.eye(&self.physics);
            }
            if fire {
                let dir = DVec3::new(decision.yaw.cos(), decision.yaw.sin(), 0.0);
                self.spawn_projectile(id, eye, dir);
            }
        }
    }

    fn move_bots(&mut self, cfg: &PhysicsConfig, dt: f64) {
        for id in self.bot_ids() {
            let (body, intents, alive) = {
                let bot = self.entities[&id].as_bot().unwrap();
                (bot.body.clone(), bot.intents, bot.state.alive)
            };
            if !alive {
                let respawn = {
                    let bot = self.entities.get_mut(&id).and_then(Entity::as_bot_mut).unwrap();
                    bot.state.respawn_timer = bot.state.respawn_timer.saturating_sub(1);
                    bot.state.respawn_timer == 0
                };
                if respawn {
                    let cell = self.random_spawn(Stream::BotRespawn, id);
                    let bot = self.entities.get_mut(&id).and_then(Entity::as_bot_mut).unwrap();
                    bot.respawn(cell);
                }
                continue;
            }
            let outcome = integrate_body(self, cfg, &body, &intents, dt);
            if outcome.fell {
                let cell = self.random_spawn(Stream::BotRespawn, id);
                let bot = self.entities.get_mut(&id).and_then(Entity::as_bot_mut).unwrap();
                bot.body = Body::at_cell(cell, bot.body.yaw);
            } else {
                let bot = self.entities.get_mut(&id).and_then(Entity::as_bot_mut).unwrap();
                bot.body = outcome.body;
            }
        }
    }

    fn update_doors(&mut self, cfg: &PhysicsConfig, dt: f64) {
        if self.door_cells.is_empty() {
            return;
        }
        let travel = seconds_to_ticks(cfg.door_travel_time, dt).max(1);
        let delay = seconds_to_ticks(cfg.door_close_delay, dt);
        let mut movers: Vec<DVec2> = Vec::new();
        if self.player.alive {
            movers.push(self.player.body.position.truncate());
        }
        movers.extend(
            self.entities
                .values()
                .filter_map(Entity::as_bot)
                .filter(|b| b.state.alive)
                .map(|b| b.body.position.truncate()),
        );
        for (i, &cell) in self.door_cells.iter().enumerate() {
            let center = cell_center(cell);
            let near = movers
                .iter()
                .any(|p| p.distance(center) <= cfg.door_trigger_radius);
            let phase = self.door_phases[i];
            self.door_phases[i] = match (phase, near) {
                (DoorPhase::Closed, false) => DoorPhase::Closed,
                (DoorPhase::Closed, true) => DoorPhase::Opening(1),
                (DoorPhase::Opening(t), _) if t + 1 >= travel => DoorPhase::Open(0),
                (DoorPhase::Opening(t), _) => DoorPhase::Opening(t + 1),
                (DoorPhase::Open(_), true) => DoorPhase::Open(0),
                (DoorPhase::Open(t), false) if t + 1 >= delay => DoorPhase::Closing(0),
                (DoorPhase::Open(t), false) => DoorPhase::Open(t + 1),
                // Reverse from the matching point of travel.
                (DoorPhase::Closing(t), true) => DoorPhase::Opening(travel.saturating_sub(t)),
                (DoorPhase::Closing(t), false) if t + 1 >= travel => DoorPhase::Closed,
                (DoorPhase::Closing(t), false) => DoorPhase::Closing(t + 1),
            };
        }
    }

    fn advance_projectiles(&mut self, cfg: &PhysicsConfig, dt: f64) {
        let ids: Vec<u32> = self
            .entities
            .values()
            .filter(|e| matches!(e.kind, EntityKind::Projectile(_)))
            .map(|e| e.id)
            .collect();
        for id in ids {
            let EntityKind::Projectile(proj) = self.entities[&id].kind.clone() else {
                unreachable!()
            };
            let start = proj.position;
            let delta = proj.velocity * dt;
            let hit = self.trace_projectile(cfg, &proj, start, delta);
            match hit {
                Some(ProjectileHit::Bot(bot)) => {
                    self.entities.remove(&id);
                    self.pending_events.push(ContactEvent::ProjectileHitBot { bot, owner: proj.owner });
                }
                Some(ProjectileHit::Player) => {
                    self.entities.remove(&id);
                    self.pending_events
                        .push(ContactEvent::ProjectileHitPlayer { owner: proj.owner });
                }
                Some(ProjectileHit::Solid) => {
                    self.entities.remove(&id);
                }
                None => {
                    let ttl = proj.ttl - dt;
                    if ttl <= 1e-9 {
                        self.entities.remove(&id);
                    } else if let EntityKind::Projectile(p) = &mut self.entities.get_mut(&id).unwrap().kind {
                        p.position = start + delta;
                        p.ttl = ttl;
                    }
                }
            }
        }
    }

    fn trace_projectile(&self, cfg: &PhysicsConfig, proj: &Projectile, start: DVec3, delta: DVec3) -> Option<ProjectileHit> {
        const EPS: f64 = 1e-6;
        let mut best: Option<(f64, ProjectileHit)> = None;
        let mut consider = |t: f64, hit: ProjectileHit| {
            if best.as_ref().map_or(true, |(bt, _)| t < *bt) {
                best = Some((t, hit));
            }
        };

        let seg_len = delta.truncate().length();
        if seg_len > 0.0 {
            let dir = delta.truncate() / seg_len;
            if let Ok(hit) = cast_ray_with(&self.level, start.truncate(), dir, |r, c| self.is_solid(r, c)) {
                if hit.distance <= seg_len + EPS {
                    consider(hit.distance / seg_len, ProjectileHit::Solid);
                }
            }
        }
        let end_z = start.z + delta.z;
        if end_z < 0.0 || end_z > WALL_HEIGHT {
            let plane = if end_z < 0.0 { 0.0 } else { WALL_HEIGHT };
            let t = if delta.z != 0.0 { (plane - start.z) / delta.z } else { 0.0 };
            consider(t.clamp(0.0, 1.0), ProjectileHit::Solid);
        }

        if proj.owner == PLAYER_ID {
            for e in self.entities.values() {
                let Some(bot) = e.as_bot() else { continue };
                if !bot.state.alive {
                    continue;
                }
                if let Some(t) = segment_cylinder(start, delta, &bot.body, e.radius, bot.body.height(cfg)) {
                    consider(t, ProjectileHit::Bot(e.id));
                }
            }
        } else if self.player.alive {
            let body = &self.player.body;
            if let Some(t) = segment_cylinder(start, delta, body, cfg.body_radius, body.height(cfg)) {
                consider(t, ProjectileHit::Player);
            }
        }
        best.map(|(_, h)| h)
    }

    fn update_pickups(&mut self, cfg: &PhysicsConfig) {
        let player = self.player.body.position;
        let alive = self.player.alive;
        for e in self.entities.values_mut() {
            let radius = e.radius;
            let id = e.id;
            let Some(p) = e.as_pickup_mut() else { continue };
            if !p.active {
                if p.respawn_timer > 0 {
                    p.respawn_timer -= 1;
                    if p.respawn_timer == 0 {
                        p.active = true;
                    }
                }
                continue;
            }
            if alive
                && player.z < 40.0
                && player.truncate().distance(p.position.truncate()) < cfg.body_radius + radius
            {
                self.pending_events.push(ContactEvent::PickupTouched { entity: id, kind: p.kind });
            }
        }
    }

    /// Versioned little-endian binary snapshot.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4096);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).expect("world state serializes");
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<WorldState, SnapshotError> {
        if bytes.len() < 6 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(version));
        }
        Ok(bincode::deserialize(&bytes[6..])?)
    }
}

enum ProjectileHit {
    Solid,
    Bot(u32),
    Player,
}

/// Earliest `t` in `[0, 1]` at which `start + t * delta` enters a vertical
/// cylinder standing on `body`.
fn segment_cylinder(start: DVec3, delta: DVec3, body: &Body, radius: f64, height: f64) -> Option<f64> {
    let rel = start.truncate() - body.position.truncate();
    let d = delta.truncate();
    let a = d.length_squared();
    let c = rel.length_squared() - radius * radius;
    let in_z = |t: f64| {
        let z = start.z + delta.z * t;
        z >= body.position.z && z <= body.position.z + height
    };
    if c <= 0.0 {
        return in_z(0.0).then_some(0.0);
    }
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * rel.dot(d);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    ((0.0..=1.0).contains(&t) && in_z(t)).then_some(t)
}

pub fn cell_center((row, col): CellPos) -> DVec2 {
    DVec2::new((col as f64 + 0.5) * CELL_SIZE, (row as f64 + 0.5) * CELL_SIZE)
}

pub fn world_to_cell(p: DVec2) -> CellPos {
    let col = (p.x / CELL_SIZE).floor().max(0.0) as usize;
    let row = (p.y / CELL_SIZE).floor().max(0.0) as usize;
    (row, col)
}

/// Wrap to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Facing for a freshly spawned body: the cardinal direction with the
/// longest open run (ties in N, E, S, W order).
pub fn spawn_yaw(level: &LevelGrid, (row, col): CellPos) -> f64 {
    // N, E, S, W as (drow, dcol, yaw)
    let dirs = [(-1, 0, -FRAC_PI_2), (0, 1, 0.0), (1, 0, FRAC_PI_2), (0, -1, -PI)];
    let mut best = (0, 0.0);
    for (dr, dc, yaw) in dirs {
        let mut n = 0;
        let (mut r, mut c) = (row as isize + dr, col as isize + dc);
        while !level.kind_at(r, c).is_wall() {
            n += 1;
            r += dr;
            c += dc;
        }
        if n > best.0 {
            best = (n, yaw);
        }
    }
    best.1
}

/// Launch direction for a pad: across the longest run of adjacent pit
/// cells, falling back to `fallback` when no pit borders the pad.
pub fn pad_direction(level: &LevelGrid, (row, col): CellPos, fallback: DVec2) -> DVec2 {
    let dirs = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    let mut best: Option<(usize, (isize, isize))> = None;
    for (dr, dc) in dirs {
        let mut n = 0;
        let (mut r, mut c) = (row as isize + dr, col as isize + dc);
        while level.kind_at(r, c) == CellKind::Pit {
            n += 1;
            r += dr;
            c += dc;
        }
        if n > 0 && best.map_or(true, |(bn, _)| n > bn) {
            best = Some((n, (dr, dc)));
        }
    }
    match best {
        Some((_, (dr, dc))) => DVec2::new(dc as f64, dr as f64),
        None => fallback.try_normalize().unwrap_or(DVec2::X),
    }
}

/// First non-pit cell beyond the pit run a pad launches across.
pub fn pad_target(level: &LevelGrid, (row, col): CellPos) -> Option<CellPos> {
    let dir = pad_direction(level, (row, col), DVec2::ZERO);
    let (dr, dc) = (dir.y.round() as isize, dir.x.round() as isize);
    let (mut r, mut c) = (row as isize + dr, col as isize + dc);
    if level.kind_at(r, c) != CellKind::Pit {
        return None;
    }
    while level.kind_at(r, c) == CellKind::Pit {
        r += dr;
        c += dc;
    }
    (!level.kind_at(r, c).is_wall()).then_some((r as usize, c as usize))
}

pub(crate) struct BodyOutcome {
    pub body: Body,
    pub fell: bool,
}

/// One tick of kinematics for any body (player or bot).
pub(crate) fn integrate_body(world: &WorldState, cfg: &PhysicsConfig, body: &Body, intents: &Intents, dt: f64) -> BodyOutcome {
    let level = world.level();
    let mut b = body.clone();
    b.crouched = intents.crouch;

    if b.grounded && level.kind_at(b.cell().0 as isize, b.cell().1 as isize) == CellKind::Pit {
        b.grounded = false;
    }

    if b.grounded {
        let cell = b.cell();
        if level.kind(cell.0, cell.1) == CellKind::LaunchPad {
            let fallback = if b.velocity.truncate().length_squared() > 1e-9 {
                b.velocity.truncate()
            } else {
                b.forward()
            };
            let dir = pad_direction(level, cell, fallback);
            let speed = match pad_target(level, cell) {
                // Land on the centre of the first cell past the pit.
                Some(target) => {
                    let airtime = 2.0 * cfg.pad_vertical_speed / cfg.gravity;
                    ((cell_center(target) - b.position.truncate()).dot(dir) / airtime).max(0.0)
                }
                None => cfg.pad_horizontal_speed,
            };
            let h = dir * speed;
            b.velocity = DVec3::new(h.x, h.y, cfg.pad_vertical_speed);
            b.grounded = false;
        }
    }

    if b.grounded {
        let mut vh = b.velocity.truncate();
        let speed = vh.length();
        if speed > 0.0 {
            let new_speed = (speed - speed * cfg.friction * dt).max(0.0);
            vh *= new_speed / speed;
        }
        let wish = b.forward() * intents.forward as f64 + b.right() * intents.strafe as f64;
        if let Some(wish_dir) = wish.try_normalize() {
            let wish_speed = if b.crouched { cfg.crouch_speed } else { cfg.max_speed };
            let add = wish_speed - vh.dot(wish_dir);
            if add > 0.0 {
                vh += wish_dir * (cfg.accelerate * wish_speed * dt).min(add);
            }
        }
        b.velocity = vh.extend(0.0);
        if intents.jump {
            b.velocity.z = cfg.jump_speed;
            b.grounded = false;
        }
    }

    let mut pos = b.position.truncate() + b.velocity.truncate() * dt;
    let mut vel = b.velocity.truncate();
    collide_circle(world, &mut pos, &mut vel, cfg.body_radius, b.position.z);
    b.position.x = pos.x;
    b.position.y = pos.y;
    b.velocity.x = vel.x;
    b.velocity.y = vel.y;

    if !b.grounded {
        let z0 = b.position.z;
        let z1 = z0 + (b.velocity.z - 0.5 * cfg.gravity * dt) * dt;
        b.velocity.z -= cfg.gravity * dt;
        let cell = b.cell();
        let over_pit = level.kind(cell.0, cell.1) == CellKind::Pit;
        if z1 <= 0.0 && z0 >= 0.0 && b.velocity.z < 0.0 && !over_pit {
            b.position.z = 0.0;
            b.velocity.z = 0.0;
            b.grounded = true;
        } else {
            b.position.z = z1;
        }
    }

    let fell = b.position.z < -cfg.pit_depth;
    BodyOutcome { body: b, fell }
}

/// Push a circle out of every blocking cell it overlaps, removing the
/// velocity component into each contact. Below floor level (inside a pit)
/// every non-pit cell blocks.
pub(crate) fn collide_circle(world: &WorldState, pos: &mut DVec2, vel: &mut DVec2, radius: f64, z: f64) {
    let level = world.level();
    let blocks = |r: usize, c: usize| {
        world.is_solid(r, c) || (z < 0.0 && level.kind(r, c) != CellKind::Pit)
    };
    for _ in 0..3 {
        let mut moved = false;
        let c0 = ((pos.x - radius) / CELL_SIZE).floor() as isize;
        let c1 = ((pos.x + radius) / CELL_SIZE).floor() as isize;
        let r0 = ((pos.y - radius) / CELL_SIZE).floor() as isize;
        let r1 = ((pos.y + radius) / CELL_SIZE).floor() as isize;
        for r in r0..=r1 {
            for c in c0..=c1 {
                if !level.in_bounds(r, c) || !blocks(r as usize, c as usize) {
                    continue;
                }
                let min = DVec2::new(c as f64 * CELL_SIZE, r as f64 * CELL_SIZE);
                let max = min + DVec2::splat(CELL_SIZE);
                let closest = pos.clamp(min, max);
                let d = *pos - closest;
                let dist = d.length();
                if dist >= radius {
                    continue;
                }
                let (normal, push) = if dist > 1e-9 {
                    (d / dist, radius - dist)
                } else {
                    // Center inside the cell: leave through the nearest face.
                    let faces = [
                        (pos.x - min.x, DVec2::NEG_X),
                        (max.x - pos.x, DVec2::X),
                        (pos.y - min.y, DVec2::NEG_Y),
                        (max.y - pos.y, DVec2::Y),
                    ];
                    let (depth, n) = faces
                        .into_iter()
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .unwrap();
                    (n, depth + radius)
                };
                *pos += normal * push;
                let vn = vel.dot(normal);
                if vn < 0.0 {
                    *vel -= normal * vn;
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}
