mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{label_line, read_tree, write_fixture};

fn pseudo3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudo3d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

#[test]
fn help_lists_every_command() {
    let o = pseudo3d(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for cmd in ["pseudolabel", "eval", "gradcheck", "stats", "filter", "normalize"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(pseudo3d(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pseudo3d(&["eval", "--pred", "x"]).status.code(), Some(1));
}

#[test]
fn pseudolabel_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    for d in ["det", "depth", "calib"] {
        std::fs::create_dir(dir.path().join(d)).unwrap();
    }
    let out = dir.path().join("out");
    let o = pseudo3d(&[
        "pseudolabel",
        "--detections", s(&dir.path().join("det")),
        "--depth", s(&dir.path().join("depth")),
        "--calib", s(&dir.path().join("calib")),
        "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("images 0\n") && text.contains("emitted 0\n"), "{text}");
    assert!(read_tree(&out).is_empty());
}

#[test]
fn pseudolabel_fixture_is_reproducible_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), 6, 5);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "pseudolabel",
            "--detections", s(&fx.detections),
            "--depth", s(&fx.depth),
            "--calib", s(&fx.calib),
            "--out", s(&out),
        ];
        args.extend_from_slice(extra);
        let o = pseudo3d(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (read_tree(&out), stdout(&o))
    };
    let (a, summary) = run("a", &["--workers", "2"]);
    let (b, _) = run("b", &["--workers", "3"]);
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    assert!(summary.starts_with("# effective config\n"));
    assert!(summary.contains("# score_threshold = 0.1\n"), "{summary}");
    for key in ["detections ", "emitted ", "dropped_no_depth ", "conflicts "] {
        assert!(summary.contains(key), "{key} missing");
    }

    let (strict, summary) = run("c", &["--score-threshold", "0.99"]);
    assert!(summary.contains("# score_threshold = 0.99\n"));
    let boxes = |t: &std::collections::BTreeMap<String, Vec<u8>>| {
        t.values().map(|v| v.iter().filter(|b| **b == b'\n').count()).sum::<usize>()
    };
    assert!(boxes(&strict) < boxes(&a));
}

#[test]
fn pseudolabel_config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), 3, 9);
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("o");
    std::fs::write(&cfg, "score_threshold = 0.5\n[virtual_camera]\nfocal = 720.0\nwidth = 1242\nheight = 375\n").unwrap();
    let base = [
        "pseudolabel",
        "--detections", s(&fx.detections),
        "--depth", s(&fx.depth),
        "--calib", s(&fx.calib),
        "--out", s(&out),
        "--config", s(&cfg),
    ];
    let o = pseudo3d(&base);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("# score_threshold = 0.5\n") && text.contains("# focal = 720.0\n"), "{text}");

    let mut with_flag = base.to_vec();
    with_flag.extend(["--virtual-focal", "800"]);
    let text = stdout(&pseudo3d(&with_flag));
    assert!(text.contains("# focal = 800.0\n"), "{text}");

    std::fs::write(&cfg, "score_treshold = 0.5\n").unwrap();
    let o = pseudo3d(&base);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("score_treshold"));
}

#[test]
fn pseudolabel_missing_calib_names_image_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), 4, 2);
    std::fs::remove_file(fx.calib.join("000002.txt")).unwrap();
    let out = dir.path().join("out");
    let o = pseudo3d(&[
        "pseudolabel",
        "--detections", s(&fx.detections),
        "--depth", s(&fx.depth),
        "--calib", s(&fx.calib),
        "--out", s(&out),
        "--workers", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("image 000002"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn pseudolabel_missing_yaw_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), 1, 3);
    std::fs::remove_dir_all(&fx.detections).unwrap();
    let det = dir.path().join("d.jsonl");
    std::fs::write(&det, r#"{"version":1,"image":"000000","detections":[{"class":"Car","bbox":[100,100,200,200],"score":0.9}]}"#).unwrap();
    let o = pseudo3d(&[
        "pseudolabel",
        "--detections", s(&det),
        "--depth", s(&fx.depth),
        "--calib", s(&fx.calib),
        "--out", s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no yaw"));
}

fn gt_lines() -> Vec<String> {
    vec![
        label_line("Car", [100.0, 150.0, 300.0, 260.0], [1.5, 1.6, 3.9], [-4.0, 1.7, 12.0], 0.1, None),
        label_line("Car", [500.0, 170.0, 560.0, 205.0], [1.4, 1.7, 4.1], [1.5, 1.6, 30.0], -1.4, None),
        label_line("Pedestrian", [700.0, 140.0, 730.0, 230.0], [1.8, 0.6, 0.8], [3.0, 1.7, 15.0], 0.0, None),
        label_line("Van", [900.0, 150.0, 1000.0, 240.0], [2.2, 1.9, 5.0], [9.0, 1.8, 18.0], 0.2, None),
    ]
}

#[test]
fn eval_perfect_predictions_score_100() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&pred).unwrap();
    for id in ["000000", "000001"] {
        write_lines(&gt.join(format!("{id}.txt")), &gt_lines());
        let preds: Vec<String> = gt_lines().iter().map(|l| format!("{l} 0.9000")).collect();
        write_lines(&pred.join(format!("{id}.txt")), &preds);
    }
    let report = dir.path().join("r.json");
    let o = pseudo3d(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for row in rows {
        assert_eq!(row["ap"].as_f64(), Some(100.0), "{row}");
    }
    assert!(stdout(&o).contains("100.00"));
}

#[test]
fn eval_hand_computed_ap() {
    // Two moderate cars. Ranked predictions: hit, miss, hit.
    // Precision 1 up to recall 1/2, then 2/3: AP = (20 * 1 + 20 * 2/3) / 40.
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&pred).unwrap();
    let g = gt_lines();
    write_lines(&gt.join("a.txt"), &g[..2]);
    write_lines(
        &pred.join("a.txt"),
        &[
            format!("{} 0.9000", g[0]),
            label_line("Car", [600.0, 160.0, 700.0, 240.0], [1.5, 1.6, 3.9], [6.0, 1.7, 20.0], 0.0, Some(0.8)),
            format!("{} 0.7000", g[1]),
        ],
    );
    let report = dir.path().join("r.json");
    let o = pseudo3d(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--metric", "3d", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let moderate = json["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["difficulty"] == "moderate")
        .unwrap();
    let want = 100.0 * (20.0 + 20.0 * 2.0 / 3.0) / 40.0;
    assert!((moderate["ap"].as_f64().unwrap() - want).abs() < 1e-9, "{moderate}");
    assert_eq!(moderate["false_positives"], 1);
}

#[test]
fn eval_missing_dir_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pseudo3d(&["eval", "--pred", s(&dir.path().join("nope")), "--gt", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("g.json");
    let o = pseudo3d(&["gradcheck", "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["kernels"].as_array().unwrap().len(), 8);
    assert_eq!(json["tolerance"].as_f64(), Some(1e-4));
}

#[test]
fn gradcheck_detects_injected_fault() {
    let o = pseudo3d(&["gradcheck", "--points", "10", "--inject-fault", "consistency_loss"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(pseudo3d(&["gradcheck", "--inject-fault", "nope"]).status.code(), Some(1));
}

fn stats_dir(heights: &[f64]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let lines: Vec<String> = heights
        .iter()
        .map(|&h| label_line("Pedestrian", [10.0, 10.0, 40.0, 100.0], [h, 0.6, 0.8], [1.0, 1.7, 12.0], 0.0, Some(0.9)))
        .collect();
    write_lines(&dir.path().join("000000.txt"), &lines);
    dir
}

#[test]
fn stats_single_height() {
    let dir = stats_dir(&[1.73; 5]);
    let cols = dir.path().join("h.dat");
    let o = pseudo3d(&["stats", "--pred", s(dir.path()), "--out", s(&cols)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mean 1.730000\n") && text.contains("bins 1\n"), "{text}");
    let data: Vec<String> = std::fs::read_to_string(&cols).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(data, ["1.725000 5"]);
}

#[test]
fn stats_two_heights() {
    let dir = stats_dir(&[1.62, 1.62, 1.62, 1.81, 1.81]);
    let o = pseudo3d(&["stats", "--pred", s(dir.path()), "--bin-width", "0.1"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && l.starts_with("1.")).collect();
    assert_eq!(rows, ["1.650000 3", "1.750000 0", "1.850000 2"]);
}

#[test]
fn stats_empty_dir_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pseudo3d(&["stats", "--pred", s(dir.path())]).status.code(), Some(2));
}

fn filter(losses: &str, extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.txt");
    std::fs::write(&p, losses).unwrap();
    let mut args = vec!["filter", "--losses", s(&p)];
    args.extend_from_slice(extra);
    let o = pseudo3d(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    stdout(&o)
}

#[test]
fn filter_constant_keeps_all() {
    let text = filter("0.5\n0.5\n0.5\n", &[]);
    assert!(text.contains("kept 3\ndropped 0\n"), "{text}");
}

#[test]
fn filter_drops_the_spike() {
    let text = filter("# per-box losses\n1\n1\n1\n1\n100\n", &["--k", "2"]);
    assert!(text.contains("kept 4\ndropped 1\n"), "{text}");
    assert!(text.contains("4 100 dropped\n"));
}

#[test]
fn filter_k_zero_drops_above_median() {
    let text = filter("1\n2\n3\n4\n5\n", &["--k", "0"]);
    assert!(text.contains("kept 3\ndropped 2\n"), "{text}");
    assert!(text.contains("3 4 dropped\n4 5 dropped\n"));
}

#[test]
fn normalize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, calib) = (dir.path().join("labels"), dir.path().join("calib"));
    std::fs::create_dir_all(&labels).unwrap();
    std::fs::create_dir_all(&calib).unwrap();
    write_lines(&labels.join("000007.txt"), &gt_lines());
    std::fs::write(calib.join("000007.txt"), common::calib_text(721.5377, 721.5377, 609.5593, 172.854, None)).unwrap();
    let (virt, back) = (dir.path().join("virt"), dir.path().join("back"));
    let o = pseudo3d(&["normalize", "--labels", s(&labels), "--calib", s(&calib), "--out", s(&virt), "--image-size", "1242x375"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("boxes 4\n"));
    let o = pseudo3d(&["normalize", "--inverse", "--labels", s(&virt), "--calib", s(&calib), "--out", s(&back), "--image-size", "1242x375"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let read = |p: &Path| pseudo3d::dataio::read_labels(p).unwrap();
    let (orig, moved, restored) = (read(&labels.join("000007.txt")), read(&virt.join("000007.txt")), read(&back.join("000007.txt")));
    for ((a, m), r) in orig.iter().zip(&moved).zip(&restored) {
        // The virtual camera is wider and longer-focal, so boxes move.
        assert!((m.location[2] - a.location[2] * 900.0 / 721.5377).abs() < 0.02);
        for i in 0..3 {
            assert!((a.location[i] - r.location[i]).abs() <= 0.03, "{a:?} vs {r:?}");
        }
        for i in 0..4 {
            assert!((a.bbox[i] - r.bbox[i]).abs() <= 0.03);
        }
        assert_eq!(a.dimensions, r.dimensions);
    }
}

#[test]
fn normalize_needs_image_size() {
    let dir = tempfile::tempdir().unwrap();
    let (labels, calib) = (dir.path().join("labels"), dir.path().join("calib"));
    std::fs::create_dir_all(&labels).unwrap();
    std::fs::create_dir_all(&calib).unwrap();
    write_lines(&labels.join("a.txt"), &gt_lines());
    std::fs::write(calib.join("a.txt"), common::calib_text(700.0, 700.0, 600.0, 180.0, None)).unwrap();
    let o = pseudo3d(&["normalize", "--labels", s(&labels), "--calib", s(&calib), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("image size"));
}
