use mazelab_web::{level_names, maze_text, Game};

#[test]
fn game_frames_are_rgba_and_move_with_input() {
    let mut game = Game::new("seekavoid_arena_01", 40, 30, 1).unwrap();
    let first = game.pixels().unwrap();
    assert_eq!(first.len(), 40 * 30 * 4);
    assert!(first.chunks_exact(4).all(|p| p[3] == 255));
    let depth = game.depth().unwrap();
    assert!(depth.chunks_exact(4).all(|p| p[0] == p[1] && p[1] == p[2]));
    game.step(200, 0, 0, 1, false, false, 10).unwrap();
    assert_eq!(game.tick(), 10);
    assert_ne!(game.pixels().unwrap(), first);
    game.reset(1).unwrap();
    assert_eq!(game.tick(), 0);
    assert_eq!(game.pixels().unwrap(), first);
}

#[test]
fn bad_inputs_are_errors_not_panics() {
    assert!(Game::new("atlantis", 40, 30, 0).is_err());
    assert!(Game::new("random_maze", 2, 2, 0).is_err());
    assert!(maze_text(3, 3, 0, false).is_err());
    let mut game = Game::new("random_maze", 16, 12, 0).unwrap();
    assert!(game.step(0, 0, 0, 0, false, false, 0).is_err());
}

#[test]
fn maze_text_parses_and_names_match() {
    let text = maze_text(15, 11, 9, true).unwrap();
    let level = mazelab::parse_text_level(&text).unwrap();
    assert_eq!((level.width(), level.height()), (15, 11));
    assert_eq!(level_names().lines().collect::<Vec<_>>(), mazelab::TASK_NAMES);
}
