mod common;

use std::collections::VecDeque;
use std::path::PathBuf;

use common::maze_facts;
use mazelab::level::{
    generate_maze, parse_text_level, serialize_text_level, CellKind, GoalPolicy, LevelError, MazeParams,
};
use proptest::prelude::*;

/// Flood fill from every `P` over non-wall glyphs, straight on the text.
fn text_reachable(rows: &[Vec<char>]) -> bool {
    let h = rows.len();
    let w = rows[0].len();
    let open = |r: usize, c: usize| rows[r][c] != '*';
    let mut seen = vec![vec![false; w]; h];
    let mut q: VecDeque<(usize, usize)> = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if rows[r][c] == 'P' {
                seen[r][c] = true;
                q.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = q.pop_front() {
        for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
            if open(nr, nc) && !seen[nr][nc] {
                seen[nr][nc] = true;
                q.push_back((nr, nc));
            }
        }
    }
    (0..h).all(|r| (0..w).all(|c| !open(r, c) || seen[r][c]))
}

fn glyph() -> impl Strategy<Value = char> {
    prop_oneof![
        6 => Just(' '),
        3 => Just('*'),
        1 => prop::sample::select(vec!['H', 'I', 'G', 'A', 'M', 'L', 'J', 'X', 'P']),
    ]
}

/// Walled rectangle with random interior and a spawn in the top-left.
fn walled_level() -> impl Strategy<Value = Vec<Vec<char>>> {
    (3usize..14, 3usize..14).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::collection::vec(glyph(), w - 2), h - 2).prop_map(move |inner| {
            let mut rows = vec![vec!['*'; w]];
            for line in inner {
                let mut row = vec!['*'];
                row.extend(line);
                row.push('*');
                rows.push(row);
            }
            rows.push(vec!['*'; w]);
            rows[1][1] = 'P';
            rows
        })
    })
}

fn to_text(rows: &[Vec<char>]) -> String {
    rows.iter().map(|r| r.iter().collect::<String>() + "\n").collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parse_accepts_exactly_reachable_levels(rows in walled_level()) {
        let text = to_text(&rows);
        match parse_text_level(&text) {
            Ok(grid) => {
                prop_assert!(text_reachable(&rows));
                prop_assert_eq!((grid.width(), grid.height()), (rows[0].len(), rows.len()));
                let facts = maze_facts(&grid);
                prop_assert!(facts.spawns >= 1);
            }
            Err(e) => {
                prop_assert!(!text_reachable(&rows));
                prop_assert!(matches!(e, LevelError::UnreachableCell(..)), "{:?}", e);
            }
        }
    }

    #[test]
    fn parse_serialize_is_a_fixed_point(rows in walled_level()) {
        let text = to_text(&rows);
        if let Ok(grid) = parse_text_level(&text) {
            let once = serialize_text_level(&grid);
            prop_assert_eq!(&once, &text);
            let again = parse_text_level(&once).unwrap();
            prop_assert_eq!(&again, &grid);
            prop_assert_eq!(serialize_text_level(&again), once);
        }
    }

    #[test]
    fn generated_mazes_are_perfect(w in 2usize..16, h in 2usize..16, seed in any::<u64>(), random_goal in any::<bool>()) {
        let (w, h) = (2 * w + 1, 2 * h + 1);
        let policy = if random_goal { GoalPolicy::UniformRandomFloor } else { GoalPolicy::FarthestFromSpawn };
        let params = MazeParams::new(w, h, seed, policy);
        let maze = generate_maze(params).unwrap();
        let rooms = ((w - 1) / 2) * ((h - 1) / 2);
        let facts = maze_facts(&maze);
        prop_assert_eq!(facts.open_cells, 2 * rooms - 1);
        prop_assert!(facts.connected());
        prop_assert!(facts.acyclic());
        prop_assert_eq!(facts.spawns, 1);
        prop_assert_eq!(facts.goals, 1);
        if !random_goal {
            prop_assert_eq!(facts.goal_distance, Some(facts.max_distance));
        }
        // Pure function of the parameters.
        prop_assert_eq!(generate_maze(params).unwrap(), maze.clone());
        // Generated text survives the text format.
        let reparsed = parse_text_level(&serialize_text_level(&maze)).unwrap();
        prop_assert_eq!(reparsed.cells(), maze.cells());
    }
}

#[test]
fn short_lines_pad_with_wall() {
    let g = parse_text_level("*****\n*P *\n*****\n").unwrap();
    assert_eq!((g.width(), g.height()), (5, 3));
    assert_eq!(g.kind(1, 4), CellKind::Wall);
    assert_eq!(serialize_text_level(&g), "*****\n*P **\n*****\n");
}

#[test]
fn level_errors() {
    assert_eq!(parse_text_level(""), Err(LevelError::EmptyLevel));
    assert_eq!(parse_text_level("***\n* *\n***\n"), Err(LevelError::NoSpawnPoint));
    assert_eq!(parse_text_level("***\n*PA\n***\n"), Err(LevelError::UnenclosedBorder));
    // Trailing spaces are trimmed, so the row is padded with wall.
    assert!(parse_text_level("***\n*P \n***\n").is_ok());
    assert_eq!(parse_text_level("****\n*Pq*\n****\n"), Err(LevelError::IllegalCharacter(1, 2)));
    assert_eq!(
        parse_text_level("*****\n*P*A*\n*****\n"),
        Err(LevelError::UnreachableCell(1, 3))
    );
    for (w, h) in [(4, 5), (5, 4), (3, 3), (1, 9)] {
        assert_eq!(
            generate_maze(MazeParams::new(w, h, 0, GoalPolicy::FarthestFromSpawn)),
            Err(LevelError::BadDimensions(w, h))
        );
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const GOLDEN: [(usize, usize, u64, GoalPolicy); 4] = [
    (5, 5, 0, GoalPolicy::FarthestFromSpawn),
    (11, 7, 42, GoalPolicy::FarthestFromSpawn),
    (15, 15, 7, GoalPolicy::UniformRandomFloor),
    (21, 21, 2024, GoalPolicy::FarthestFromSpawn),
];

fn golden_name((w, h, seed, policy): (usize, usize, u64, GoalPolicy)) -> String {
    let tag = match policy {
        GoalPolicy::FarthestFromSpawn => "far",
        GoalPolicy::UniformRandomFloor => "rand",
    };
    format!("maze_{w}x{h}_s{seed}_{tag}.maze.txt")
}

/// Set `MAZELAB_BLESS=1` to rewrite the files after an intended change.
#[test]
fn generated_mazes_match_golden_files() {
    let bless = std::env::var_os("MAZELAB_BLESS").is_some();
    for g in GOLDEN {
        let (w, h, seed, policy) = g;
        let text = serialize_text_level(&generate_maze(MazeParams::new(w, h, seed, policy)).unwrap());
        let path = golden_dir().join(golden_name(g));
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, expected, "{} changed", path.display());
    }
}
