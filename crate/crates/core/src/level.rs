//! Level grids: the text format, validation, and seeded maze generation.
//!
//! Text levels are rectangular character maps, one row per line:
//!
//! | char  | cell                         |
//! |-------|------------------------------|
//! | `*`   | wall                         |
//! | space | floor                        |
//! | `P`   | spawn point                  |
//! | `H`   | door in an east-west wall run |
//! | `I`   | door in a north-south wall run |
//! | `G`   | goal                         |
//! | `A`   | apple                        |
//! | `M`   | melon                        |
//! | `L`   | lemon                        |
//! | `J`   | launch pad                   |
//! | `X`   | pit                          |
//!
//! Trailing whitespace on each line is trimmed and short lines are padded
//! with wall, so ragged right edges are accepted.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix64, SplitMix64};

/// `(row, col)` grid coordinate.
pub type CellPos = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Wall,
    Floor,
    DoorEW,
    DoorNS,
    Spawn,
    Goal,
    PickupApple,
    PickupMelon,
    PickupLemon,
    LaunchPad,
    Pit,
}

impl CellKind {
    pub fn from_char(c: char) -> Option<CellKind> {
        Some(match c {
            '*' => CellKind::Wall,
            ' ' => CellKind::Floor,
            'P' => CellKind::Spawn,
            'H' => CellKind::DoorEW,
            'I' => CellKind::DoorNS,
            'G' => CellKind::Goal,
            'A' => CellKind::PickupApple,
            'M' => CellKind::PickupMelon,
            'L' => CellKind::PickupLemon,
            'J' => CellKind::LaunchPad,
            'X' => CellKind::Pit,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            CellKind::Wall => '*',
            CellKind::Floor => ' ',
            CellKind::Spawn => 'P',
            CellKind::DoorEW => 'H',
            CellKind::DoorNS => 'I',
            CellKind::Goal => 'G',
            CellKind::PickupApple => 'A',
            CellKind::PickupMelon => 'M',
            CellKind::PickupLemon => 'L',
            CellKind::LaunchPad => 'J',
            CellKind::Pit => 'X',
        }
    }

    pub fn is_wall(self) -> bool {
        self == CellKind::Wall
    }

    pub fn is_door(self) -> bool {
        matches!(self, CellKind::DoorEW | CellKind::DoorNS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    /// Shading variation, derived from the cell position.
    pub variant: u8,
}

/// Variation index for a cell; a pure function of its position so that the
/// text format does not need to carry it.
pub fn cell_variant(row: usize, col: usize) -> u8 {
    (mix64(((row as u64) << 32) ^ col as u64) % 4) as u8
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelError {
    #[error("level text is empty")]
    EmptyLevel,
    #[error("illegal character at row {0}, col {1}")]
    IllegalCharacter(usize, usize),
    #[error("level has no spawn point")]
    NoSpawnPoint,
    #[error("cell at row {0}, col {1} is unreachable from every spawn point")]
    UnreachableCell(usize, usize),
    #[error("outer border is not entirely wall")]
    UnenclosedBorder,
    #[error("maze dimensions must be odd and at least 5, got {0}x{1}")]
    BadDimensions(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGrid {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    spawn_points: Vec<CellPos>,
}

impl LevelGrid {
    /// Build a grid from row-major kinds and validate it.
    pub fn from_kinds(
        name: impl Into<String>,
        width: usize,
        height: usize,
        kinds: Vec<CellKind>,
    ) -> Result<LevelGrid, LevelError> {
        assert_eq!(kinds.len(), width * height, "cell count does not match dimensions");
        let cells = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| Cell {
                kind,
                variant: cell_variant(i / width, i % width),
            })
            .collect::<Vec<_>>();
        let spawn_points = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == CellKind::Spawn)
            .map(|(i, _)| (i / width, i % width))
            .collect();
        let grid = LevelGrid {
            name: name.into(),
            width,
            height,
            cells,
            spawn_points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn spawn_points(&self) -> &[CellPos] {
        &self.spawn_points
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn kind(&self, row: usize, col: usize) -> CellKind {
        self.cells[row * self.width + col].kind
    }

    /// Kind at a signed coordinate; out-of-bounds reads as wall.
    pub fn kind_at(&self, row: isize, col: isize) -> CellKind {
        if self.in_bounds(row, col) {
            self.kind(row as usize, col as usize)
        } else {
            CellKind::Wall
        }
    }

    /// Replace the kind of one cell without re-validating. Used by task setup
    /// to move goals and strip pickups; walls are never added or removed.
    pub(crate) fn set_kind(&mut self, row: usize, col: usize, kind: CellKind) {
        let old = self.kind(row, col);
        assert!(!old.is_wall() && !kind.is_wall(), "set_kind cannot change walls");
        self.cells[row * self.width + col].kind = kind;
        if old == CellKind::Spawn && kind != CellKind::Spawn {
            self.spawn_points.retain(|&p| p != (row, col));
        } else if kind == CellKind::Spawn && old != CellKind::Spawn {
            self.spawn_points.push((row, col));
            self.spawn_points.sort_unstable();
        }
    }

    /// Override the per-cell shading variation. The text format does not
    /// carry variants, so a re-parsed level gets the positional defaults.
    pub fn set_variants(&mut self, f: impl Fn(usize, usize) -> u8) {
        for (i, cell) in self.cells.iter_mut().enumerate() {
            cell.variant = f(i / self.width, i % self.width);
        }
    }

    /// Every cell whose kind satisfies `pred`, in row-major order.
    pub fn positions_where(&self, pred: impl Fn(CellKind) -> bool) -> Vec<CellPos> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| pred(c.kind))
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    /// Same layout of walls, doors, and pits (ignores spawns, goals, pickups).
    pub fn same_walls(&self, other: &LevelGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.kind.is_wall() == b.kind.is_wall())
    }

    /// 4-connected BFS distances from `sources` over non-wall cells.
    pub fn bfs_distances(&self, sources: &[CellPos]) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.width * self.height];
        let mut queue = VecDeque::new();
        for &(r, c) in sources {
            if !self.kind(r, c).is_wall() && dist[r * self.width + c].is_none() {
                dist[r * self.width + c] = Some(0);
                queue.push_back((r, c));
            }
        }
        while let Some((r, c)) = queue.pop_front() {
            let d = dist[r * self.width + c].unwrap();
            for (nr, nc) in neighbors4(r, c) {
                if !self.in_bounds(nr, nc) {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                let idx = nr * self.width + nc;
                if dist[idx].is_none() && !self.kind(nr, nc).is_wall() {
                    dist[idx] = Some(d + 1);
                    queue.push_back((nr, nc));
                }
            }
        }
        dist
    }

    fn validate(&self) -> Result<(), LevelError> {
        let (w, h) = (self.width, self.height);
        let border_ok = w >= 3
            && h >= 3
            && (0..w).all(|c| self.kind(0, c).is_wall() && self.kind(h - 1, c).is_wall())
            && (0..h).all(|r| self.kind(r, 0).is_wall() && self.kind(r, w - 1).is_wall());
        if !border_ok {
            return Err(LevelError::UnenclosedBorder);
        }
        if self.spawn_points.is_empty() {
            return Err(LevelError::NoSpawnPoint);
        }
        let dist = self.bfs_distances(&self.spawn_points);
        if let Some(i) = (0..w * h).find(|&i| !self.cells[i].kind.is_wall() && dist[i].is_none()) {
            return Err(LevelError::UnreachableCell(i / w, i % w));
        }
        Ok(())
    }
}

impl fmt::Display for LevelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_text_level(self))
    }
}

/// Neighbors in N, E, S, W order.
pub(crate) fn neighbors4(r: usize, c: usize) -> [(isize, isize); 4] {
    let (r, c) = (r as isize, c as isize);
    [(r - 1, c), (r, c + 1), (r + 1, c), (r, c - 1)]
}

/// Parse a text level.
pub fn parse_text_level(text: &str) -> Result<LevelGrid, LevelError> {
    parse_named_text_level("text_level", text)
}

pub fn parse_named_text_level(name: &str, text: &str) -> Result<LevelGrid, LevelError> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end()).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(LevelError::EmptyLevel);
    }
    let height = lines.len();
    let width = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let mut kinds = Vec::with_capacity(width * height);
    for (row, line) in lines.iter().enumerate() {
        let mut n = 0;
        for (col, ch) in line.chars().enumerate() {
            kinds.push(CellKind::from_char(ch).ok_or(LevelError::IllegalCharacter(row, col))?);
            n += 1;
        }
        kinds.extend(std::iter::repeat(CellKind::Wall).take(width - n));
    }
    LevelGrid::from_kinds(name, width, height, kinds)
}

/// Serialize to the text format: one line per row, LF-terminated, no
/// trailing whitespace (borders are always wall).
pub fn serialize_text_level(level: &LevelGrid) -> String {
    let mut out = String::with_capacity((level.width + 1) * level.height);
    for row in level.cells.chunks(level.width) {
        for cell in row {
            out.push(cell.kind.to_char());
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoalPolicy {
    FarthestFromSpawn,
    UniformRandomFloor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MazeParams {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub goal_policy: GoalPolicy,
}

impl MazeParams {
    pub fn new(width: usize, height: usize, seed: u64, goal_policy: GoalPolicy) -> Self {
        MazeParams {
            width,
            height,
            seed,
            goal_policy,
        }
    }

    /// Number of rooms on the odd-coordinate lattice.
    pub fn room_count(&self) -> usize {
        ((self.width - 1) / 2) * ((self.height - 1) / 2)
    }
}

/// Generate a perfect maze by seeded randomized depth-first search.
///
/// Rooms sit at odd `(row, col)`; carving removes the wall between two
/// adjacent rooms. The spawn is a random room and the goal is placed per
/// [`GoalPolicy`].
pub fn generate_maze(params: MazeParams) -> Result<LevelGrid, LevelError> {
    let MazeParams { width, height, .. } = params;
    if width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0 {
        return Err(LevelError::BadDimensions(width, height));
    }
    let rooms_w = (width - 1) / 2;
    let rooms_h = (height - 1) / 2;
    let mut rng = SplitMix64::new(params.seed);
    let mut kinds = vec![CellKind::Wall; width * height];
    let mut visited = vec![false; rooms_w * rooms_h];

    let start = rng.next_below((rooms_w * rooms_h) as u64) as usize;
    let mut stack = vec![start];
    visited[start] = true;
    let room_cell = |room: usize| (2 * (room / rooms_w) + 1, 2 * (room % rooms_w) + 1);
    let (sr, sc) = room_cell(start);
    kinds[sr * width + sc] = CellKind::Floor;

    while let Some(&room) = stack.last() {
        let (ry, rx) = (room / rooms_w, room % rooms_w);
        let mut options = [None; 4];
        let mut n = 0;
        // N, E, S, W
        let candidates = [
            (ry > 0).then(|| room - rooms_w),
            (rx + 1 < rooms_w).then(|| room + 1),
            (ry + 1 < rooms_h).then(|| room + rooms_w),
            (rx > 0).then(|| room - 1),
        ];
        for next in candidates.into_iter().flatten() {
            if !visited[next] {
                options[n] = Some(next);
                n += 1;
            }
        }
        if n == 0 {
            stack.pop();
            continue;
        }
        let next = options[rng.next_below(n as u64) as usize].unwrap();
        visited[next] = true;
        let (ar, ac) = room_cell(room);
        let (br, bc) = room_cell(next);
        kinds[((ar + br) / 2) * width + (ac + bc) / 2] = CellKind::Floor;
        kinds[br * width + bc] = CellKind::Floor;
        stack.push(next);
    }

    let spawn_room = rng.next_below((rooms_w * rooms_h) as u64) as usize;
    let (pr, pc) = room_cell(spawn_room);
    kinds[pr * width + pc] = CellKind::Spawn;

    let goal = match params.goal_policy {
        GoalPolicy::FarthestFromSpawn => {
            let dist = bfs_over_kinds(&kinds, width, height, (pr, pc));
            let mut best = (0u32, pr * width + pc);
            for (i, d) in dist.iter().enumerate() {
                if let Some(d) = *d {
                    if d > best.0 {
                        best = (d, i);
                    }
                }
            }
            best.1
        }
        GoalPolicy::UniformRandomFloor => {
            let floors: Vec<usize> = (0..width * height)
                .filter(|&i| kinds[i] == CellKind::Floor)
                .collect();
            floors[rng.next_below(floors.len() as u64) as usize]
        }
    };
    kinds[goal] = CellKind::Goal;

    let name = format!("maze_{}x{}_{}", width, height, params.seed);
    LevelGrid::from_kinds(name, width, height, kinds)
}

fn bfs_over_kinds(kinds: &[CellKind], width: usize, height: usize, from: CellPos) -> Vec<Option<u32>> {
    let mut dist = vec![None; width * height];
    let mut queue = VecDeque::from([from]);
    dist[from.0 * width + from.1] = Some(0);
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[r * width + c].unwrap();
        for (nr, nc) in neighbors4(r, c) {
            if nr < 0 || nc < 0 || nr as usize >= height || nc as usize >= width {
                continue;
            }
            let idx = nr as usize * width + nc as usize;
            if dist[idx].is_none() && !kinds[idx].is_wall() {
                dist[idx] = Some(d + 1);
                queue.push_back((nr as usize, nc as usize));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const DOOR_LEVEL: &str = "\
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

    #[test]
    fn parses_reference_level() {
        let g = parse_text_level(DOOR_LEVEL).unwrap();
        assert_eq!((g.width(), g.height()), (14, 10));
        assert_eq!(g.spawn_points(), &[(8, 11)]);
        assert_eq!(g.kind(7, 6), CellKind::DoorEW);
        assert_eq!(g.kind(3, 7), CellKind::DoorNS);
        assert_eq!(g.kind(8, 9), CellKind::DoorNS);
        let doors = g.positions_where(CellKind::is_door);
        assert_eq!(doors, vec![(3, 7), (7, 6), (8, 9)]);
    }

    #[test]
    fn reference_level_round_trips_bytewise() {
        let g = parse_text_level(DOOR_LEVEL).unwrap();
        assert_eq!(serialize_text_level(&g), DOOR_LEVEL);
    }

    #[test]
    fn minimal_level() {
        let g = parse_text_level("***\n*P*\n***").unwrap();
        assert_eq!((g.width(), g.height()), (3, 3));
        assert_eq!(g.spawn_points().len(), 1);
        assert!(g.positions_where(CellKind::is_door).is_empty());
        assert_eq!(serialize_text_level(&g), "***\n*P*\n***\n");
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse_text_level(""), Err(LevelError::EmptyLevel));
        assert_eq!(parse_text_level("\n\n"), Err(LevelError::EmptyLevel));
        assert_eq!(
            parse_text_level("***\n*P*\n**#"),
            Err(LevelError::IllegalCharacter(2, 2))
        );
        assert_eq!(parse_text_level("***\n* *\n***"), Err(LevelError::NoSpawnPoint));
        assert_eq!(parse_text_level("* *\n*P*\n***"), Err(LevelError::UnenclosedBorder));
        assert_eq!(parse_text_level("**\n**"), Err(LevelError::UnenclosedBorder));
    }

    #[test]
    fn ragged_lines_pad_with_wall() {
        let g = parse_text_level("*****\n*P  *\n*** \n*****").unwrap();
        assert_eq!(g.width(), 5);
        assert_eq!(g.kind(2, 3), CellKind::Wall);
        assert_eq!(g.kind(2, 4), CellKind::Wall);
    }

    #[test]
    fn crlf_is_trimmed() {
        let g = parse_text_level("***\r\n*P*\r\n***\r\n").unwrap();
        assert_eq!((g.width(), g.height()), (3, 3));
    }

    #[test]
    fn bad_maze_dimensions() {
        for (w, h) in [(4, 5), (5, 4), (3, 3), (6, 7)] {
            assert_eq!(
                generate_maze(MazeParams::new(w, h, 0, GoalPolicy::FarthestFromSpawn)),
                Err(LevelError::BadDimensions(w, h))
            );
        }
    }

    #[test]
    fn smallest_maze() {
        for seed in 0..20 {
            let g = generate_maze(MazeParams::new(5, 5, seed, GoalPolicy::FarthestFromSpawn)).unwrap();
            let rooms = [(1, 1), (1, 3), (3, 1), (3, 3)];
            assert!(rooms.iter().all(|&(r, c)| !g.kind(r, c).is_wall()));
            let open = g.positions_where(|k| !k.is_wall()).len();
            assert_eq!(open, 2 * 4 - 1);
        }
    }

    #[test]
    fn maze_is_deterministic() {
        let p = MazeParams::new(21, 21, 7, GoalPolicy::FarthestFromSpawn);
        assert_eq!(generate_maze(p).unwrap(), generate_maze(p).unwrap());
    }

    #[test]
    fn uniform_goal_policy_places_one_goal() {
        for seed in 0..30 {
            let g = generate_maze(MazeParams::new(9, 7, seed, GoalPolicy::UniformRandomFloor)).unwrap();
            assert_eq!(g.positions_where(|k| k == CellKind::Goal).len(), 1);
            assert_eq!(g.spawn_points().len(), 1);
        }
    }
}
