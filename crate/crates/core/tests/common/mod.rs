//! Independent oracles shared by the integration tests. Nothing here calls
//! the code under test to compute an expected value.
#![allow(dead_code)]

use std::collections::VecDeque;

use glam::DVec2;
use mazelab::level::{CellKind, LevelGrid};
use mazelab::rng::SplitMix64;
use mazelab::sim::ActionVector;

pub const DOOR_LEVEL: &str = "\
**************
*  *   *******
**     *   ***
*****  I   ***
*****  *   ***
*****  *******
*****   ******
******H*******
*        I P *
**************
";

/// Is the world-space point inside a wall cell?
fn in_wall(level: &LevelGrid, p: DVec2) -> bool {
    let col = (p.x / 100.0).floor() as isize;
    let row = (p.y / 100.0).floor() as isize;
    level.kind_at(row, col).is_wall()
}

/// Exact distance from `p` to the nearest wall cell in the 3x3 block
/// around it, capped at one cell. Walls farther out are at least one cell
/// away, so the result never exceeds the true clearance.
fn clearance(level: &LevelGrid, p: DVec2) -> f64 {
    let col = (p.x / 100.0).floor() as isize;
    let row = (p.y / 100.0).floor() as isize;
    let mut best: f64 = 100.0;
    for r in row - 1..=row + 1 {
        for c in col - 1..=col + 1 {
            if !level.kind_at(r, c).is_wall() {
                continue;
            }
            let lo = DVec2::new(c as f64 * 100.0, r as f64 * 100.0);
            let hi = lo + DVec2::splat(100.0);
            let d = (lo - p).max(p - hi).max(DVec2::ZERO);
            best = best.min(d.length());
        }
    }
    best
}

/// Sphere-traced ray march: advance by the free clearance until it drops
/// below `eps`. Unlike a fixed step it cannot skip a wall corner the ray
/// only clips. Returns the Euclidean hit distance.
pub fn march(level: &LevelGrid, origin: DVec2, dir: DVec2, eps: f64) -> f64 {
    let dir = dir.normalize();
    let mut t = 0.0;
    for _ in 0..1_000_000 {
        let p = origin + dir * t;
        if in_wall(level, p) {
            return t;
        }
        let d = clearance(level, p);
        if d < eps {
            return t + d;
        }
        t += d;
    }
    panic!("ray escaped");
}

/// Perpendicular distance seen along `dir` by a camera facing `fwd`.
pub fn march_perpendicular(level: &LevelGrid, origin: DVec2, dir: DVec2, fwd: DVec2) -> f64 {
    march(level, origin, dir, 1e-7) * dir.normalize().dot(fwd.normalize())
}

pub struct MazeFacts {
    pub open_cells: usize,
    pub edges: usize,
    pub components: usize,
    pub goal_distance: Option<u32>,
    pub max_distance: u32,
    pub spawns: usize,
    pub goals: usize,
}

impl MazeFacts {
    pub fn connected(&self) -> bool {
        self.components == 1
    }

    /// A connected graph is a tree iff it has one edge fewer than nodes.
    pub fn acyclic(&self) -> bool {
        self.edges + self.components == self.open_cells
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Union-find and BFS over the non-wall cells.
pub fn maze_facts(level: &LevelGrid) -> MazeFacts {
    let (w, h) = (level.width(), level.height());
    let open = |r: usize, c: usize| !level.kind(r, c).is_wall();
    let mut parent: Vec<usize> = (0..w * h).collect();
    let mut open_cells = 0;
    let mut edges = 0;
    let mut spawn = None;
    let mut goal = None;
    let (mut spawns, mut goals) = (0, 0);
    for r in 0..h {
        for c in 0..w {
            if !open(r, c) {
                continue;
            }
            open_cells += 1;
            match level.kind(r, c) {
                CellKind::Spawn => {
                    spawns += 1;
                    spawn = Some((r, c));
                }
                CellKind::Goal => {
                    goals += 1;
                    goal = Some((r, c));
                }
                _ => {}
            }
            for (nr, nc) in [(r + 1, c), (r, c + 1)] {
                if nr < h && nc < w && open(nr, nc) {
                    edges += 1;
                    let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, nr * w + nc));
                    parent[a] = b;
                }
            }
        }
    }
    let mut roots = std::collections::BTreeSet::new();
    for r in 0..h {
        for c in 0..w {
            if open(r, c) {
                roots.insert(find(&mut parent, r * w + c));
            }
        }
    }
    let mut dist = vec![u32::MAX; w * h];
    let mut max_distance = 0;
    if let Some((sr, sc)) = spawn {
        let mut q = VecDeque::from([(sr, sc)]);
        dist[sr * w + sc] = 0;
        while let Some((r, c)) = q.pop_front() {
            let d = dist[r * w + c];
            max_distance = max_distance.max(d);
            for (nr, nc) in [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)] {
                if nr < h && nc < w && open(nr, nc) && dist[nr * w + nc] == u32::MAX {
                    dist[nr * w + nc] = d + 1;
                    q.push_back((nr, nc));
                }
            }
        }
    }
    MazeFacts {
        open_cells,
        edges,
        components: roots.len(),
        goal_distance: goal.map(|(r, c)| dist[r * w + c]).filter(|&d| d != u32::MAX),
        max_distance,
        spawns,
        goals,
    }
}

/// A uniformly random action over the full clamped range.
pub fn random_action(rng: &mut SplitMix64) -> ActionVector {
    let mut pick = |lo: i32, hi: i32| lo + rng.next_below((hi - lo + 1) as u64) as i32;
    ActionVector {
        look_yaw: pick(-512, 512),
        look_pitch: pick(-64, 64),
        strafe: pick(-1, 1),
        forward: pick(-1, 1),
        fire: pick(0, 1),
        jump: (pick(0, 9) == 0) as i32,
        crouch: (pick(0, 9) == 0) as i32,
    }
}

pub fn action_script(seed: u64, n: usize) -> Vec<ActionVector> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| random_action(&mut rng)).collect()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
