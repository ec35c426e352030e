mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::action_script;
use glam::{DVec2, DVec3};
use mazelab::bots::RESPAWN_SECONDS;
use mazelab::level::{generate_maze, parse_text_level, CellKind, GoalPolicy, LevelGrid, MazeParams};
use mazelab::sim::{ActionVector, Body, ContactEvent, EntityKind, WorldState};
use mazelab::tasks::{handle_event, load_task, RewardKind};
use proptest::prelude::*;

const DT: f64 = 1.0 / 60.0;

/// Distance from a point to the nearest wall cell, by brute force.
fn wall_clearance(level: &LevelGrid, p: DVec2) -> f64 {
    let mut best = f64::INFINITY;
    for r in 0..level.height() {
        for c in 0..level.width() {
            if level.kind(r, c).is_wall() {
                let lo = DVec2::new(c as f64, r as f64) * 100.0;
                let hi = lo + DVec2::splat(100.0);
                let inside = p.cmpge(lo).all() && p.cmple(hi).all();
                let d = (lo - p).max(p - hi).max(DVec2::ZERO).length();
                best = best.min(if inside { -1.0 } else { d });
            }
        }
    }
    best
}

fn open_cells(level: &LevelGrid) -> Vec<(usize, usize)> {
    level.positions_where(|k| !k.is_wall())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn player_never_tunnels(
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        offset in (-34.0f64..34.0, -34.0f64..34.0),
        heading in 0.0f64..std::f64::consts::TAU,
        speed in 0.0f64..=320.0,
        script_seed in any::<u64>(),
    ) {
        let level = Arc::new(generate_maze(MazeParams::new(11, 11, seed, GoalPolicy::FarthestFromSpawn)).unwrap());
        let cell = *pick.get(&open_cells(&level));
        let mut world = WorldState::new(level.clone(), level.spawn_points()[0], seed);
        let mut body = Body::at_cell(cell, heading);
        body.position += DVec3::new(offset.0, offset.1, 0.0);
        body.velocity = DVec3::new(heading.cos(), heading.sin(), 0.0) * speed;
        world.player.body = body;
        for a in action_script(script_seed, 120) {
            world.apply_action(&a);
            world.step(DT);
            let p = world.player.body.position.truncate();
            let (r, c) = ((p.y / 100.0).floor() as isize, (p.x / 100.0).floor() as isize);
            prop_assert!(!level.kind_at(r, c).is_wall(), "inside wall at {:?}", p);
            let clear = wall_clearance(&level, p);
            prop_assert!(clear >= world.physics.body_radius - 1e-6, "clearance {} at {:?}", clear, p);
        }
    }

    #[test]
    fn friction_never_adds_speed(heading in 0.0f64..std::f64::consts::TAU, speed in 0.0f64..=320.0) {
        let level = Arc::new(parse_text_level(ARENA).unwrap());
        let mut world = WorldState::new(level, (4, 4), 0);
        world.player.body.velocity = DVec3::new(heading.cos(), heading.sin(), 0.0) * speed;
        let mut last = speed;
        for _ in 0..240 {
            world.apply_action(&ActionVector::ZERO);
            world.step(DT);
            let b = &world.player.body;
            let v = b.velocity.truncate().length();
            prop_assert!(v <= last + 1e-12, "speed rose {} -> {}", last, v);
            prop_assert!(b.grounded && b.position.z == 0.0 && b.velocity.z == 0.0);
            last = v;
        }
        prop_assert!(last < 1.0, "still sliding at {}", last);
    }
}

const ARENA: &str = "\
*********
*       *
*       *
*       *
*   P   *
*       *
*       *
*       *
*********
";

/// Drive a task world directly, the way the environment does.
fn run_task(world: &mut WorldState, spec: &mazelab::TaskSpec, actions: &[ActionVector]) {
    for a in actions {
        world.apply_action(a);
        world.step(DT);
        for e in world.take_events() {
            handle_event(spec, world, e, DT);
        }
    }
}

#[test]
fn equal_snapshots_stay_equal_for_ten_thousand_steps() {
    for task in ["lt_chasm", "random_maze", "seekavoid_arena_01"] {
        let (spec, _, mut a) = load_task(task, 99).unwrap();
        let snap = a.to_snapshot();
        let mut b = WorldState::from_snapshot(&snap).unwrap();
        assert_eq!(b.to_snapshot(), snap);
        let script = action_script(5, 1_000);
        for round in 0..10 {
            run_task(&mut a, &spec, &script);
            run_task(&mut b, &spec, &script);
            assert_eq!(a.to_snapshot(), b.to_snapshot(), "{task}: diverged by step {}", (round + 1) * 1000);
        }
        assert_eq!(a.tick(), 10_000);
    }
}

#[test]
fn every_deactivation_fall_and_tag_has_one_event() {
    let full_timer = (RESPAWN_SECONDS * 60.0).round() as u32;
    for (task, seed) in [("seekavoid_arena_01", 3), ("lt_chasm", 4), ("lt_space_bounce_hard", 5), ("nav_maze_static_02", 6)] {
        let (spec, _, mut world) = load_task(task, seed).unwrap();
        let (mut pickups, mut falls, mut downs) = (0, 0, 0);
        let (mut pickup_events, mut fall_events, mut tag_events) = (0, 0, 0);
        // Bias toward moving and firing so something happens.
        let script: Vec<ActionVector> = action_script(seed, 6_000)
            .into_iter()
            .map(|a| ActionVector { forward: 1, fire: 1, ..a })
            .collect();
        for a in &script {
            let active: BTreeMap<u32, bool> = world
                .entities()
                .filter_map(|e| e.as_pickup().map(|p| (e.id, p.active)))
                .collect();
            world.apply_action(a);
            world.step(DT);
            if !world.player.alive {
                falls += 1;
            }
            for e in world.take_events() {
                if let Some(r) = handle_event(&spec, &mut world, e, DT) {
                    match r.kind {
                        RewardKind::Pickup(_) => pickup_events += 1,
                        RewardKind::Fell => fall_events += 1,
                        RewardKind::Tagged(_) => tag_events += 1,
                        RewardKind::GoalReached => {}
                    }
                }
            }
            for e in world.entities() {
                match &e.kind {
                    EntityKind::Pickup(p) if active.get(&e.id) == Some(&true) && !p.active => pickups += 1,
                    EntityKind::Bot(b) if !b.state.alive && b.state.respawn_timer == full_timer => downs += 1,
                    _ => {}
                }
            }
        }
        assert_eq!(pickup_events, pickups, "{task}: pickups");
        assert_eq!(fall_events, falls, "{task}: falls");
        assert_eq!(tag_events, downs, "{task}: tags");
        eprintln!("{task}: {pickups} pickups, {falls} falls, {downs} tags");
    }
}

const RANGE: &str = "\
****************************
*P                         *
****************************
";

#[test]
fn projectile_expires_after_its_lifetime() {
    let level = Arc::new(parse_text_level(RANGE).unwrap());
    let mut world = WorldState::new(level, (1, 1), 0);
    world.player.body.yaw = 0.0;
    world.apply_action(&ActionVector { fire: 1, ..ActionVector::ZERO });
    world.step(DT);
    let count = |w: &WorldState| w.entities().filter(|e| matches!(e.kind, EntityKind::Projectile(_))).count();
    assert_eq!(count(&world), 1);
    // 2 s at 1000 u/s covers 2000 u; the far wall is 2550 u away.
    let mut ticks = 1;
    while count(&world) == 1 {
        world.apply_action(&ActionVector::ZERO);
        world.step(DT);
        ticks += 1;
        assert!(ticks < 1000);
    }
    assert_eq!(ticks, (2.0f64 * 60.0).ceil() as u32);
}

/// Pads and the cell each one must land on, read off the level text: the
/// first non-pit cell past the pit run the pad borders.
const PAD_LANDINGS: [(&str, [((usize, usize), (usize, usize)); 4]); 2] = [
    ("lt_chasm", [((4, 6), (8, 6)), ((4, 16), (8, 16)), ((8, 4), (4, 4)), ((8, 18), (4, 18))]),
    (
        "lt_space_bounce_hard",
        [((3, 5), (3, 9)), ((3, 13), (3, 17)), ((7, 9), (7, 5)), ((7, 17), (7, 13))],
    ),
];

#[test]
fn launch_pads_clear_the_pit() {
    for (task, pads) in PAD_LANDINGS {
        let (_, level, _) = load_task(task, 0).unwrap();
        for (pad, landing) in pads {
            assert_eq!(level.kind(pad.0, pad.1), CellKind::LaunchPad, "{task} {pad:?}");
            let mut world = WorldState::new(level.clone(), level.spawn_points()[0], 0);
            world.player.body = Body::at_cell(pad, 0.0);
            let mut ticks = 0;
            let mut airborne = false;
            loop {
                world.apply_action(&ActionVector::ZERO);
                world.step(DT);
                ticks += 1;
                assert!(
                    !world.take_events().contains(&ContactEvent::PlayerFell),
                    "{task}: fell from pad {pad:?}"
                );
                let b = &world.player.body;
                airborne |= !b.grounded;
                if airborne && b.grounded {
                    break;
                }
                assert!(ticks < 200, "{task}: never landed from {pad:?}");
            }
            // Continuous flight time 2 vz / g = 1.25 s = 75 ticks.
            assert!((74..=77).contains(&ticks), "{task}: {pad:?} flew {ticks} ticks");
            let b = &world.player.body;
            assert_eq!(b.cell(), landing, "{task}: {pad:?} landed at {:?}", b.position);
            let centre = DVec2::new(landing.1 as f64 + 0.5, landing.0 as f64 + 0.5) * 100.0;
            let miss = b.position.truncate().distance(centre);
            assert!(miss < 10.0, "{task}: {pad:?} landed {miss:.1} u from the centre");
        }
    }
}
