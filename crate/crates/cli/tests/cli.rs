use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtofkit::io;
use dtofkit::simulation::SimConfig;
use dtofkit::{DepthMap, Field, SparseDepth, Volume};
use tempfile::TempDir;

fn dtofkit(args: &[&str]) -> Output {
    dtofkit_env(args, &[])
}

fn dtofkit_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dtofkit"));
    cmd.args(args).env_remove("DTOFKIT_PROFILE_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Smooth scene: a tilted floor between 1 and 3.5 m.
fn write_gt(dir: &Path, name: &str, width: usize, height: usize) -> PathBuf {
    let data = (0..width * height)
        .map(|i| {
            let (r, c) = ((i / width) as f64, (i % width) as f64);
            1.0 + 2.5 * (r / height as f64) + 0.3 * (c / width as f64)
        })
        .collect();
    let path = dir.join(name);
    io::write_depth(&path, &DepthMap::from_values(width, height, data).unwrap()).unwrap();
    path
}

fn write_rgb(dir: &Path, name: &str, width: usize, height: usize) -> PathBuf {
    let mut img = Vec::with_capacity(width * height * 3);
    for i in 0..width * height {
        // dark band on the left quarter
        let v = if i % width < width / 4 { 20 } else { 180 };
        img.extend([v, v / 2, v]);
    }
    let path = dir.join(name);
    image::save_buffer(
        &path,
        &img,
        width as u32,
        height as u32,
        image::ColorType::Rgb8,
    )
    .unwrap();
    path
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let gt = write_gt(dir.path(), "gt.png", 640, 480);
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        ok(&dtofkit(&[
            "simulate",
            "--gt",
            s(&gt),
            "--profile",
            "zju-l5",
            "--seed",
            seed,
            "--out",
            s(&out),
        ]));
        fs::read(out).unwrap()
    };
    let a = run("7", "a.png");
    let b = run("7", "b.png");
    let c = run("8", "c.png");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(dir.path().join("a.stats.json").is_file());
    assert!(dir.path().join("a.manifest.json").is_file());
}

#[test]
fn simulate_phone_pads_output() {
    let dir = TempDir::new().unwrap();
    let gt = write_gt(dir.path(), "gt.png", 684, 912);
    let rgb = write_rgb(dir.path(), "rgb.png", 684, 912);
    let out = dir.path().join("sparse.png");
    ok(&dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--rgb",
        s(&rgb),
        "--profile",
        "phone",
        "--seed",
        "1",
        "--out",
        s(&out),
    ]));
    let map = io::read_depth(&out).unwrap();
    assert_eq!((map.width(), map.height()), (714, 928));
    assert!(map.valid_count() > 500);
}

#[test]
fn simulate_error_codes() {
    let dir = TempDir::new().unwrap();
    let gt = write_gt(dir.path(), "gt.png", 684, 912);
    let out = dir.path().join("o.png");
    // low-reflectivity stage needs an RGB image
    let r = dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--profile",
        "phone",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("RGB"));

    let small_rgb = write_rgb(dir.path(), "rgb.png", 100, 100);
    let r = dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--rgb",
        s(&small_rgb),
        "--profile",
        "phone",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));

    let missing = dir.path().join("nope.png");
    let r = dtofkit(&[
        "simulate",
        "--gt",
        s(&missing),
        "--profile",
        "zju-l5",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(3));

    let r = dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--profile",
        "kinect",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));

    let r = dtofkit(&["simulate", "--gt", s(&gt), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let r = dtofkit(&["simulate", "--bogus"]);
    assert_eq!(r.status.code(), Some(2));

    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"fov": 3}"#).unwrap();
    let r = dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--config",
        s(&bad_cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn user_profile_dir_takes_precedence() {
    let dir = TempDir::new().unwrap();
    let profiles = dir.path().join("profiles");
    fs::create_dir(&profiles).unwrap();
    let mut cfg = SimConfig::zju_l5().without_anomalies();
    cfg.name = "clean".into();
    fs::write(profiles.join("clean.json"), cfg.to_json()).unwrap();
    let gt = write_gt(dir.path(), "gt.png", 640, 480);
    let out = dir.path().join("clean.csv");
    ok(&dtofkit_env(
        &[
            "simulate",
            "--gt",
            s(&gt),
            "--profile",
            "clean",
            "--out",
            s(&out),
        ],
        &[("DTOFKIT_PROFILE_DIR", &profiles)],
    ));
    let sparse = io::read_sparse(&out, Some((640, 480))).unwrap();
    assert_eq!(sparse.len(), 64);

    let listed = dtofkit_env(&["profile"], &[("DTOFKIT_PROFILE_DIR", &profiles)]);
    ok(&listed);
    assert!(String::from_utf8_lossy(&listed.stdout).contains("clean"));
    let shown = dtofkit(&["profile", "phone"]);
    ok(&shown);
    let back = SimConfig::from_json(&String::from_utf8_lossy(&shown.stdout)).unwrap();
    assert_eq!(back, SimConfig::phone());
}

#[test]
fn batch_is_independent_of_job_count() {
    let dir = TempDir::new().unwrap();
    let gts = dir.path().join("gt");
    fs::create_dir(&gts).unwrap();
    for i in 0..5 {
        write_gt(&gts, &format!("frame{i:02}.png"), 160 + i, 120);
    }
    let run = |jobs: &str, out: &str| {
        let out = dir.path().join(out);
        let mut cfg = SimConfig::zju_l5();
        cfg.fov = dtofkit::FovRegion::new([-5.0, 100.0, 20.0, 140.0], 13.0, 14.0).unwrap();
        let cfg_path = dir.path().join("small.json");
        fs::write(&cfg_path, cfg.to_json()).unwrap();
        ok(&dtofkit(&[
            "simulate",
            "--gt",
            s(&gts),
            "--config",
            s(&cfg_path),
            "--seed",
            "3",
            "--jobs",
            jobs,
            "--out",
            s(&out),
        ]));
        (0..5)
            .map(|i| fs::read(out.join(format!("frame{i:02}.png"))).unwrap())
            .collect::<Vec<_>>()
    };
    let serial = run("1", "serial");
    let parallel = run("4", "parallel");
    assert_eq!(serial, parallel);
    assert_ne!(serial[0], serial[1]);
    assert!(dir.path().join("parallel/manifest.json").is_file());
}

fn write_rig(dir: &Path, rgb_t: [f64; 3]) -> PathBuf {
    let path = dir.join("rig.json");
    let cam = |t: [f64; 3]| {
        serde_json::json!({
            "fx": 500.0, "fy": 500.0, "cx": 320.0, "cy": 240.0,
            "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": t
        })
    };
    let rig = serde_json::json!({"schema_version": 1, "dtof": cam([0.0; 3]), "rgb": cam(rgb_t)});
    fs::write(&path, rig.to_string()).unwrap();
    path
}

#[test]
fn project_identity_and_empty() {
    let dir = TempDir::new().unwrap();
    let rig = write_rig(dir.path(), [0.0; 3]);
    let csv = dir.path().join("frame.csv");
    fs::write(
        &csv,
        "row,col,depth_m\n240,320,2.0\n0,0,1.5\n100,600,3.25\n",
    )
    .unwrap();
    let out = dir.path().join("sparse.csv");
    ok(&dtofkit(&[
        "project",
        "--dtof",
        s(&csv),
        "--rig",
        s(&rig),
        "--width",
        "640",
        "--height",
        "480",
        "--out",
        s(&out),
    ]));
    let sparse = io::read_sparse(&out, Some((640, 480))).unwrap();
    assert_eq!(sparse.get(240, 320), Some(2.0));
    assert_eq!(sparse.get(0, 0), Some(1.5));
    assert_eq!(sparse.get(100, 600), Some(3.25));
    assert_eq!(sparse.len(), 3);

    fs::write(&csv, "row,col,depth_m\n").unwrap();
    let out = dir.path().join("empty.png");
    ok(&dtofkit(&[
        "project",
        "--dtof",
        s(&csv),
        "--rig",
        s(&rig),
        "--width",
        "640",
        "--height",
        "480",
        "--out",
        s(&out),
    ]));
    assert_eq!(io::read_depth(&out).unwrap().valid_count(), 0);
}

#[test]
fn project_zju_grid_stays_in_image() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rig.json");
    let rig = serde_json::json!({
        "dtof": {"fx": 4.0, "fy": 4.0, "cx": 3.5, "cy": 3.5,
                 "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": [0.0, 0.0, 0.0]},
        "rgb": {"fx": 300.0, "fy": 300.0, "cx": 320.0, "cy": 240.0,
                "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": [0.02, 0.0, 0.0]}
    });
    fs::write(&path, rig.to_string()).unwrap();
    let csv = dir.path().join("l5.csv");
    let mut text = String::from("row,col,depth_m\n");
    for r in 0..8 {
        for c in 0..8 {
            text.push_str(&format!("{r},{c},{}\n", 1.0 + 0.1 * (r + c) as f64));
        }
    }
    fs::write(&csv, text).unwrap();
    let out = dir.path().join("l5.png");
    ok(&dtofkit(&[
        "project",
        "--dtof",
        s(&csv),
        "--rig",
        s(&path),
        "--width",
        "640",
        "--height",
        "480",
        "--out",
        s(&out),
    ]));
    let map = io::read_depth(&out).unwrap();
    assert_eq!((map.width(), map.height()), (640, 480));
    assert!(map.valid_count() <= 64 && map.valid_count() > 0);
}

#[test]
fn project_rejects_bad_rig() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rig.json");
    let cam = serde_json::json!({"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0,
        "R": [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": [0.0, 0.0, 0.0]});
    fs::write(
        &path,
        serde_json::json!({"dtof": cam, "rgb": cam}).to_string(),
    )
    .unwrap();
    let csv = dir.path().join("f.csv");
    fs::write(&csv, "row,col,depth_m\n0,0,1\n").unwrap();
    let out = dir.path().join("o.csv");
    let r = dtofkit(&[
        "project",
        "--dtof",
        s(&csv),
        "--rig",
        s(&path),
        "--width",
        "4",
        "--height",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn evaluate_reports_and_empty_mask() {
    let dir = TempDir::new().unwrap();
    let gt = write_gt(dir.path(), "gt.png", 32, 24);
    let report = dir.path().join("report.json");
    let err_map = dir.path().join("err.png");
    ok(&dtofkit(&[
        "evaluate",
        "--pred",
        s(&gt),
        "--gt",
        s(&gt),
        "--out",
        s(&report),
        "--error-map",
        s(&err_map),
    ]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["delta1"], 1.0);
    assert_eq!(v["rel"], 0.0);
    assert_eq!(v["rmse"], 0.0);
    assert_eq!(v["ewmae"], 0.0);
    assert_eq!(v["valid_count"], 32 * 24);
    assert_eq!(v["schema_version"], 1);
    let e = io::read_depth(&err_map).unwrap();
    assert_eq!(e.valid_count(), 0);

    let r = dtofkit(&[
        "evaluate",
        "--pred",
        s(&gt),
        "--gt",
        s(&gt),
        "--max-depth",
        "0.5",
        "--out",
        s(&report),
    ]);
    assert_eq!(r.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&r.stderr).contains("empty mask"));
}

#[test]
fn evaluate_fixture_pair() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.pfm");
    let pred = dir.path().join("pred.pfm");
    io::write_pfm(&gt, &Field::new(2, 1, vec![2.0, 4.0]).unwrap()).unwrap();
    io::write_pfm(&pred, &Field::new(2, 1, vec![2.0, 5.0]).unwrap()).unwrap();
    let report = dir.path().join("r.json");
    ok(&dtofkit(&[
        "evaluate",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--out",
        s(&report),
    ]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    // |e| = (0, 1); rel = mean(0, 1/4); rmse = sqrt(1/2); a ratio of exactly
    // 1.25 misses the strict delta1 threshold
    assert_eq!(v["delta1"], 0.5);
    assert_eq!(v["delta2"], 1.0);
    assert!((v["rel"].as_f64().unwrap() - 0.125).abs() < 1e-12);
    assert!((v["rmse"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    let log10 = 0.5 * (1.25f64).log10();
    assert!((v["log10"].as_f64().unwrap() - log10).abs() < 1e-12);
}

fn write_volume(path: &Path, w: usize, h: usize, c: usize, data: Vec<f64>) {
    io::write_volume(path, &Volume::new(w, h, c, data).unwrap()).unwrap();
}

/// Uniform 3x3 kernel: self 0.5, every neighbour 0.0625.
fn write_example_affinity(path: &Path) {
    let mut data = vec![0.5; 9];
    data.extend(vec![0.0625; 8 * 9]);
    write_volume(path, 3, 3, 9, data);
}

#[test]
fn refine_fixtures() {
    let dir = TempDir::new().unwrap();
    let depth = dir.path().join("d.pfm");
    let init = Field::new(3, 3, vec![2.0, 2.0, 2.0, 2.0, 4.0, 2.0, 2.0, 2.0, 2.0]).unwrap();
    io::write_pfm(&depth, &init).unwrap();
    let aff = dir.path().join("k3.bin");
    write_example_affinity(&aff);

    let agg = dir.path().join("agg.json");
    fs::write(&agg, r#"{"tau": [1.0, 0.0, 0.0], "sigma": [1.0]}"#).unwrap();
    let out = dir.path().join("out.pfm");
    ok(&dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--out",
        s(&out),
    ]));
    assert_eq!(io::read_pfm(&out).unwrap(), init);

    fs::write(&agg, r#"{"tau": [0.0, 0.0, 1.0], "sigma": [1.0]}"#).unwrap();
    ok(&dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--iters",
        "2",
        "--out",
        s(&out),
    ]));
    let got = io::read_pfm(&out).unwrap();
    assert_eq!(got.at(1, 1), 2.5625);
    assert_eq!(got.at(0, 0), 0.9375 * 2.125 + 0.0625 * 3.0);

    // per-pixel tau from a volume next to the JSON
    let tau = dir.path().join("tau.bin");
    let mut t = vec![1.0; 9];
    t.extend(vec![0.0; 18]);
    write_volume(&tau, 3, 3, 3, t);
    fs::write(&agg, r#"{"tau": {"volume": "tau.bin"}, "sigma": [1.0]}"#).unwrap();
    ok(&dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--out",
        s(&out),
    ]));
    assert_eq!(io::read_pfm(&out).unwrap(), init);

    let r = dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--iters",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
    fs::write(&agg, r#"{"tau": [0.5, 0.5, 0.5], "sigma": [1.0]}"#).unwrap();
    let r = dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn refine_identity_affinity_keeps_depth() {
    let dir = TempDir::new().unwrap();
    let depth = dir.path().join("d.pfm");
    let init = Field::new(4, 2, vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]).unwrap();
    io::write_pfm(&depth, &init).unwrap();
    let aff = dir.path().join("id5.bin");
    let mut data = vec![1.0; 8];
    data.extend(vec![0.0; 24 * 8]);
    write_volume(&aff, 4, 2, 25, data);
    let agg = dir.path().join("agg.json");
    fs::write(&agg, r#"{"tau": [0.2, 0.3, 0.5], "sigma": [1.0]}"#).unwrap();
    let out = dir.path().join("out.pfm");
    ok(&dtofkit(&[
        "refine",
        "--depth",
        s(&depth),
        "--affinity",
        s(&aff),
        "--agg",
        s(&agg),
        "--out",
        s(&out),
    ]));
    let got = io::read_pfm(&out).unwrap();
    for (a, b) in got.data().iter().zip(init.data()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn fit_recovers_scale_and_shift() {
    let dir = TempDir::new().unwrap();
    let (w, h) = (8, 4);
    let d_inv = Field::new(w, h, (0..w * h).map(|i| 0.1 + 0.02 * i as f64).collect()).unwrap();
    let dinv_path = dir.path().join("dinv.pfm");
    io::write_pfm(&dinv_path, &d_inv).unwrap();
    // read back so the fit sees the stored f32 values
    let d_inv = io::read_pfm(&dinv_path).unwrap();
    let sparse = SparseDepth::new(
        w,
        h,
        [(0, 1), (1, 5), (2, 2), (3, 7)]
            .iter()
            .map(|&(row, col)| dtofkit::SparsePoint {
                row,
                col,
                depth_m: 1.0 / (2.0 * d_inv.at(row, col) + 0.05),
            })
            .collect(),
    )
    .unwrap();
    let sparse_path = dir.path().join("sparse.csv");
    io::write_sparse_csv(&sparse_path, &sparse).unwrap();
    let out = dir.path().join("aligned.pfm");
    ok(&dtofkit(&[
        "fit",
        "--dinv",
        s(&dinv_path),
        "--sparse",
        s(&sparse_path),
        "--out",
        s(&out),
    ]));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("aligned.fit.json")).unwrap())
            .unwrap();
    assert!((fit["scale"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((fit["shift"].as_f64().unwrap() - 0.05).abs() < 1e-9);
    assert!(fit["residual_rms"].as_f64().unwrap() < 1e-12);

    let one = dir.path().join("one.csv");
    fs::write(&one, "row,col,depth_m\n0,0,2.0\n").unwrap();
    let r = dtofkit(&[
        "fit",
        "--dinv",
        s(&dinv_path),
        "--sparse",
        s(&one),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(5));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let gt = write_gt(dir.path(), "gt.png", 640, 480);
    let out = dir.path().join("sim.png");
    ok(&dtofkit(&[
        "simulate",
        "--gt",
        s(&gt),
        "--profile",
        "zju-l5",
        "--seed",
        "11",
        "--out",
        s(&out),
    ]));
    let before = fs::read(&out).unwrap();
    let manifest = dir.path().join("sim.manifest.json");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"]["name"], "simulate");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["name"], "zju-l5");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);

    fs::remove_file(&out).unwrap();
    ok(&dtofkit(&["replay", s(&manifest)]));
    assert_eq!(fs::read(&out).unwrap(), before);

    // a changed input is refused
    write_gt(dir.path(), "gt.png", 640, 479);
    let r = dtofkit(&["replay", s(&manifest)]);
    assert_eq!(r.status.code(), Some(4));
}
