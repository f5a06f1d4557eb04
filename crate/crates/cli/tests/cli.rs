use std::path::Path;
use std::process::{Command, Output};

use superpart_core::cloud_io::ply::read_vertex_table;
use superpart_core::features::GEOMETRIC_NAMES;
use superpart_core::hierarchy::read_sph1;

fn superpart(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_superpart"));
    c.args(args).env_remove("SUPERPART_THREADS");
    c
}

fn ok(mut c: Command) -> Output {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{:?} failed: {}", c, String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, points: usize) -> std::path::PathBuf {
    let path = dir.join("scene.ply");
    ok(superpart(&["synth", "--points", &points.to_string(), "--seed", "3", "--out", s(&path)]));
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn partition_graph_oracle_chain() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 8_000);
    let part = dir.path().join("p.sph1");
    ok(superpart(&[
        "partition", "--input", s(&scene), "--lambda", "0.01,0.1", "--voxel", "0.05", "--out", s(&part),
        "--weighted-fidelity", "--seed", "1",
    ]));
    let data = read_sph1(std::fs::read(&part).unwrap().as_slice()).unwrap();
    assert_eq!(data.hierarchy.level_count(), 2);
    assert!(data.graphs.iter().all(Option::is_none));
    assert!(data.labels.is_some());

    let with_graph = dir.path().join("g.sph1");
    ok(superpart(&["graph", "--partition", s(&part), "--level", "1", "--eps", "0.15", "--steps", "3", "--out", s(&with_graph)]));
    let data = read_sph1(std::fs::read(&with_graph).unwrap().as_slice()).unwrap();
    let g = data.graphs[0].as_ref().expect("level-1 graph");
    assert!(g.edge_count() > 0 && g.gaps.iter().all(|&d| d <= 0.15));
    assert!(data.graphs[1].is_none());

    let csv = dir.path().join("o.csv");
    ok(superpart(&["oracle", "--partition", s(&with_graph), "--labels-from-input", "--level", "1", "--csv", s(&csv)]));
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["level", "component_count", "oracle_miou", "oracle_oa"]);
    assert_eq!(rows[1][1], data.hierarchy.size(1).to_string());
    let miou: f64 = rows[1][2].parse().unwrap();
    assert!((0.5..=1.0).contains(&miou), "{miou}");

    let out = superpart(&["oracle", "--partition", s(&part), "--csv", s(&csv)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = superpart(&["graph", "--partition", s(&part), "--level", "3", "--eps", "0.1", "--out", s(&csv)]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn features_become_ply_properties() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 3_000);
    let out = dir.path().join("f.ply");
    ok(superpart(&["features", "--input", s(&scene), "--voxel", "0.05", "--k", "20", "--mu", "2", "--out", s(&out)]));
    let table = read_vertex_table(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    for name in GEOMETRIC_NAMES.iter().chain(&["spatial_x", "label", "x"]) {
        assert!(table.column(name).is_some(), "missing {name}");
    }
    let lin = &table.column("linearity").unwrap().values;
    assert!(lin.iter().all(|v| (0.0..=1.0 + 1e-6).contains(v)));
    let x = &table.column("x").unwrap().values;
    let sx = &table.column("spatial_x").unwrap().values;
    assert!(x.iter().zip(sx).all(|(a, b)| (2.0 * a - b).abs() < 1e-4));
}

#[test]
fn sweep_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 4_000);
    let csv = dir.path().join("s.csv");
    ok(superpart(&["sweep", "--input", s(&scene), "--mode", "voxel", "--grid", "0.1,0.4", "--csv", s(&csv)]));
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["grid_param", "component_count", "oracle_miou", "oracle_oa"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "0.100000");
    assert!(rows[1][1].parse::<usize>().unwrap() > rows[2][1].parse::<usize>().unwrap());
    assert!(rows[1][2].split('.').nth(1).unwrap().len() == 6);

    ok(superpart(&["sweep", "--input", s(&scene), "--mode", "partition", "--grid", "0.05", "--voxel", "0.05", "--csv", s(&csv)]));
    assert_eq!(csv_rows(&csv).len(), 2);
    assert!(!superpart(&["sweep", "--input", s(&scene), "--mode", "grid", "--grid", "1", "--csv", s(&csv)]).output().unwrap().status.success());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 4_000);
    let conf = dir.path().join("run.conf");
    let csv = dir.path().join("s.csv");
    std::fs::write(&conf, format!("# sweep defaults\nmode = voxel\ngrid = 0.1,0.2,0.4\ncsv = {}\nlambda = 0.5\n", s(&csv)))
        .unwrap();
    ok(superpart(&["--config", s(&conf), "sweep", "--input", s(&scene)]));
    assert_eq!(csv_rows(&csv).len(), 4);
    ok(superpart(&["sweep", "--config", s(&conf), "--input", s(&scene), "--grid", "0.3"]));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0.300000");

    std::fs::write(&conf, "colour = red\n").unwrap();
    let out = superpart(&["sweep", "--config", s(&conf), "--input", s(&scene)]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 6_000);
    let mut outputs = Vec::new();
    for (threads, env) in [("1", None), ("4", None), ("4", Some("2"))] {
        let out = dir.path().join(format!("p{threads}{}.sph1", env.unwrap_or("")));
        let mut c = superpart(&["partition", "--input", s(&scene), "--lambda", "0.01,0.1", "--voxel", "0.05", "--threads", threads, "--out", s(&out)]);
        if let Some(e) = env {
            c.env("SUPERPART_THREADS", e);
        }
        ok(c);
        outputs.push(std::fs::read(out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let mut c = superpart(&["partition", "--input", s(&scene), "--lambda", "0.1", "--out", s(&dir.path().join("x"))]);
    c.env("SUPERPART_THREADS", "zero");
    assert!(!c.output().unwrap().status.success());
}

#[test]
fn bench_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path(), 4_000);
    let out = ok(superpart(&["bench", "--input", s(&scene), "--repeat", "2", "--voxel", "0.05"]));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "run,stage,millis");
    for stage in ["voxel", "neighbors", "features", "adjacency", "partition", "graphs", "total"] {
        assert_eq!(lines.iter().filter(|l| l.split(',').nth(1) == Some(stage)).count(), 2, "{stage}");
    }
}

#[test]
fn kernel_check_passes() {
    for nano in [false, true] {
        let mut args = vec!["kernel-check", "--seed", "5"];
        if nano {
            args.push("--nano");
        }
        let out = ok(superpart(&args));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.lines().count() > 3);
        assert!(!text.contains("[FAIL]"));
    }
}
