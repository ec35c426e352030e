use std::path::PathBuf;
use std::process::{Command, Output};

fn mazelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mazelab")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("mazelab-cli-{}-{name}", std::process::id()))
}

#[test]
fn levels_lists_every_task() {
    let listed = stdout(&mazelab(&["levels"]));
    assert_eq!(listed.lines().collect::<Vec<_>>(), mazelab::TASK_NAMES);
}

#[test]
fn maze_prints_the_generator_output() {
    let text = stdout(&mazelab(&["maze", "--width", "11", "--height", "9", "--seed", "3"]));
    let params = mazelab::MazeParams::new(11, 9, 3, mazelab::GoalPolicy::FarthestFromSpawn);
    assert_eq!(text, mazelab::serialize_text_level(&mazelab::generate_maze(params).unwrap()));
    assert!(mazelab::parse_text_level(&text).is_ok());
    assert!(!mazelab(&["maze", "--width", "4"]).status.success());
}

#[test]
fn render_writes_ppm_and_png() {
    let ppm = scratch("frame.ppm");
    stdout(&mazelab(&["render", "--width", "40", "--height", "30", "-o", ppm.to_str().unwrap()]));
    let bytes = std::fs::read(&ppm).unwrap();
    let header = b"P6\n40 30\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 40 * 30 * 3);

    let depth = scratch("depth.ppm");
    stdout(&mazelab(&["render", "--depth", "--width", "40", "--height", "30", "-o", depth.to_str().unwrap()]));
    assert_eq!(std::fs::read(&depth).unwrap().len(), b"P5\n40 30\n255\n".len() + 40 * 30);

    let png = scratch("frame.png");
    stdout(&mazelab(&["render", "--level", "lt_chasm", "--steps", "20", "-o", png.to_str().unwrap()]));
    let png_bytes = std::fs::read(&png).unwrap();
    assert_eq!(&png_bytes[..8], b"\x89PNG\r\n\x1a\n");
    for p in [ppm, depth, png] {
        std::fs::remove_file(p).unwrap();
    }
}

#[test]
fn render_applies_overrides_and_rejects_unknown_keys() {
    let cfg = scratch("task.cfg");
    std::fs::write(&cfg, "# tuned\nepisode_seconds = 1\nreward.lemon = -2\n").unwrap();
    let out = scratch("o.ppm");
    stdout(&mazelab(&[
        "render",
        "--level",
        "lt_chasm",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "reward.melon=20",
        "-o",
        out.to_str().unwrap(),
    ]));
    let bad = mazelab(&["render", "--set", "no.such.key=1", "-o", out.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no.such.key"));
    std::fs::remove_file(cfg).unwrap();
    std::fs::remove_file(out).unwrap();
}

#[test]
fn bench_prints_a_table_and_json() {
    let json = scratch("bench.json");
    let table = stdout(&mazelab(&[
        "bench",
        "--resolutions",
        "84x84",
        "--formats",
        "rgb,rgbd",
        "--frames",
        "1000",
        "--json",
        json.to_str().unwrap(),
    ]));
    assert!(table.contains("84x84"), "{table}");
    let report = std::fs::read_to_string(&json).unwrap();
    assert!(report.contains("\"fps\""), "{report}");
    std::fs::remove_file(json).unwrap();

    let short = mazelab(&["bench", "--frames", "10"]);
    assert!(!short.status.success());
    assert!(!mazelab(&["bench", "--resolutions", "84by84"]).status.success());
}

#[test]
fn serve_refuses_a_missing_web_root() {
    let out = mazelab(&["serve", "--port", "0", "--web-root", "/definitely/not/here"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("web root"));
}
