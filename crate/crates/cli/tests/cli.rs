use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn normfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normfill"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every output file except `config.txt`, which records the worker count itself.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn densify_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for workers in ["1", "4", "8"] {
        let out = tmp.path().join(format!("w{workers}"));
        let res = normfill(&[
            "densify",
            "--scene",
            "desk_on_floor",
            "--frames",
            "11",
            "--noise-gaussian",
            "0.05",
            "--noise-dropout",
            "0.1",
            "--seed",
            "9",
            "--workers",
            workers,
            "--out",
            path(&out),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        // The last stdout line names the output directory, which differs per run.
        let report: Vec<String> = String::from_utf8_lossy(&res.stdout)
            .lines()
            .filter(|l| !l.starts_with("wrote "))
            .map(String::from)
            .collect();
        runs.push((outputs(&out), report));
    }
    assert!(!runs[0].0.is_empty());
    for r in &runs[1..] {
        assert!(r.0 == runs[0].0, "output files differ between worker counts");
        assert_eq!(r.1, runs[0].1);
    }
}

#[test]
fn missing_input_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let res = normfill(&[
        "densify",
        "--tum",
        path(&tmp.path().join("no_such_sequence")),
        "--out",
        path(&tmp.path().join("out")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!res.stderr.is_empty());

    let res = normfill(&["eval-pcd", "--est", "missing_a.png", "--gt", "missing_b.png"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn bad_config_values_are_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(&tmp.path().join("out")).to_string();
    for set in ["bogus=1", "psi=2.5", "frames", "noise_scale=0"] {
        let res = normfill(&["densify", "--scene", "box_room", "--out", &out, "--set", set]);
        assert_eq!(res.status.code(), Some(2), "--set {set}");
    }
    let cfg = tmp.path().join("bad.txt");
    fs::write(&cfg, "frames = 3\nframes = 4\n").unwrap();
    let res = normfill(&["densify", "--config", path(&cfg), "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn later_sources_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.txt");
    fs::write(&cfg, "scene = box_room\nframes = 3\nkeyframe_stride = 2\npsi = 0.9\n").unwrap();
    let out = tmp.path().join("out");
    let res = normfill(&[
        "densify",
        "--config",
        path(&cfg),
        "--psi",
        "0.8",
        "--set",
        "psi=0.85",
        "--out",
        path(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let written = fs::read_to_string(out.join("config.txt")).unwrap();
    let psi: Vec<_> = written.lines().filter(|l| l.starts_with("psi")).collect();
    assert_eq!(psi.len(), 1);
    assert_eq!(psi[0].split('=').nth(1).unwrap().trim().parse::<f64>().unwrap(), 0.85);
    assert!(written.lines().any(|l| l.replace(' ', "") == "frames=3"));
}

fn value(stdout: &[u8], key: &str) -> f64 {
    String::from_utf8_lossy(stdout)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(|v| v.parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in output"))
}

#[test]
fn synth_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let res = normfill(&["synth", "--out", path(dir), "--scene", "two_wall_crease", "--noise-scale", "1.3"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["two_wall_crease.scene", "two_wall_crease_color.png", "two_wall_crease_depth.png", "two_wall_crease_prior.png"] {
        assert!(dir.join(f).exists(), "{f}");
    }

    let gt = path(&dir.join("two_wall_crease_depth.png")).to_string();
    let res = normfill(&["eval-pcd", "--est", &gt, "--gt", &gt]);
    assert!(res.status.success());
    assert_eq!(value(&res.stdout, "pcd"), 100.0);

    // A 30% bias pushes every pixel out of the 10% band.
    let prior = path(&dir.join("two_wall_crease_prior.png")).to_string();
    let res = normfill(&["eval-pcd", "--est", &prior, "--gt", &gt]);
    assert_eq!(value(&res.stdout, "pcd"), 0.0);

    // A scene file written by synth renders the same as the fixture it came from.
    let again = dir.join("again");
    let res = normfill(&["synth", "--out", path(&again), "--scene", path(&dir.join("two_wall_crease.scene"))]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read(again.join("two_wall_crease_depth.png")).unwrap(), fs::read(&gt).unwrap());

    let ply = dir.join("crease.ply");
    let res = normfill(&[
        "export-ply",
        "--depth",
        &gt,
        "--color",
        path(&dir.join("two_wall_crease_color.png")),
        "--out",
        path(&ply),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&ply).unwrap();
    assert!(text.starts_with("ply\n"));
    assert!(text.contains("element vertex 76800"));
}

#[test]
fn ate_alignment_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.txt");
    let est = tmp.path().join("est.txt");
    let mut g = String::new();
    let mut e = String::new();
    for i in 0..20 {
        let t = i as f64 * 0.1;
        let (x, y, z) = (t.cos(), t.sin(), 0.2 * t);
        g += &format!("{t:.4} {x} {y} {z} 0 0 0 1\n");
        // Estimate at half scale, shifted by one meter along x.
        e += &format!("{:.4} {} {} {} 0 0 0 1\n", t + 0.005, 0.5 * x + 1.0, 0.5 * y, 0.5 * z);
    }
    fs::write(&gt, g).unwrap();
    fs::write(&est, e).unwrap();

    let run = |align: &str| {
        let res = normfill(&["eval-ate", "--est", path(&est), "--gt", path(&gt), "--align", align]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert_eq!(value(&res.stdout, "pairs"), 20.0);
        value(&res.stdout, "ate_rmse_m")
    };
    let none = run("none");
    let rigid = run("rigid");
    let sim3 = run("sim3");
    assert!(none > rigid);
    assert!(rigid > 1e-3);
    assert!(sim3 < 1e-9, "sim3 rmse {sim3}");

    let res = normfill(&["eval-ate", "--est", path(&est), "--gt", path(&gt), "--align", "affine"]);
    assert_eq!(res.status.code(), Some(2));
}
