use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn radlabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radlabel"))
        .args(args)
        .env_remove("RADLABEL_DATA_ROOT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_and_label(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("s{seed}"));
    let o = radlabel(&["synth", "--seed", &seed.to_string(), "--raed", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = radlabel(&["label", s(&out.join("frame.toml"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &[][..],
        &["frobnicate"],
        &["label"],
        &["--jobs", "0", "losscheck", "--instances", "1"],
        &["losscheck", "--dims", "2,3,2"],
        &["eval", "--pred", "a", "--pred", "b", "--gt", "c"],
    ] {
        let o = radlabel(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = radlabel(&["frobnicate"]);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&radlabel(&["--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&radlabel(&["label", s(&missing)])), 2);
    let junk = dir.path().join("junk.pcb");
    fs::write(&junk, b"PCB1\x05\x00").unwrap();
    let o = radlabel(&["voxelize", s(&junk), "-o", s(&dir.path().join("c.u8"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
}

#[test]
fn eval_grid_mismatch_names_both_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let f = synth_and_label(dir.path(), 3);
    let small = dir.path().join("small.u8");
    fs::write(&small, [0u8; 24]).unwrap();
    fs::write(dir.path().join("small.u8.json"), r#"{"shape":[2,3,4],"dtype":"u8","order":"row-major"}"#).unwrap();
    let o = radlabel(&["eval", "--pred", s(&small), "--gt", s(&f.join("gt_cube.u8"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("[2, 3, 4]") && err.contains("[500, 240, 34]"), "{err}");
}

#[test]
fn synth_label_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let f = synth_and_label(dir.path(), 7);
    let records = dir.path().join("r.jsonl");
    let o = radlabel(&[
        "eval",
        "--pred",
        s(&f.join("point_labels.pcb")),
        "--gt",
        s(&f.join("gt_point_labels.pcb")),
        "--records",
        s(&records),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&records).unwrap();
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let mut seen = 0;
    for (class, v) in summary["classes"].as_object().unwrap() {
        if v.is_null() {
            continue;
        }
        seen += 1;
        for k in ["precision", "recall", "f1"] {
            assert_eq!(v[k], 1.0, "{class} {k}");
        }
    }
    assert!(seen >= 2);

    let o = radlabel(&["eval", "--pred", s(&f.join("cube.u8")), "--gt", s(&f.join("gt_cube.u8"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Pd_All"), "{table}");
}

#[test]
fn voxelize_rae_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let f = synth_and_label(dir.path(), 11);
    let cube = dir.path().join("re.u8");
    let o = radlabel(&["voxelize", s(&f.join("labeled.pcb")), "-o", s(&cube)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&cube).unwrap(), fs::read(f.join("cube.u8")).unwrap());

    let rae = dir.path().join("rae.f32");
    let o = radlabel(&["rae", s(&f.join("raed_power.f32")), s(&f.join("raed_elevation.i32")), "-o", s(&rae)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rae.f32.json")).unwrap()).unwrap();
    assert_eq!(meta["shape"], serde_json::json!([500, 240, 34]));
    assert_eq!(fs::metadata(&rae).unwrap().len(), 500 * 240 * 34 * 4);

    let img = dir.path().join("bev.ppm");
    let o = radlabel(&["render", s(&f.join("cube.u8")), "-o", s(&img)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let bytes = fs::read(&img).unwrap();
    let header = b"P6\n240 500\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 240 * 500 * 3);
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let f = synth_and_label(dir.path(), 2);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[grid]\nrange_bins = 100\nazimuth_bins = 48\nelevation_bins = 8\n").unwrap();
    let out = dir.path().join("coarse");
    let o = radlabel(&["--config", s(&cfg), "label", s(&f.join("frame.toml")), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let meta = fs::read_to_string(out.join("cube.u8.json")).unwrap();
    assert!(meta.contains("100") && meta.contains("48"), "{meta}");

    fs::write(&cfg, "[grid]\nbins = 3\n").unwrap();
    let o = radlabel(&["--config", s(&cfg), "losscheck", "--instances", "1"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn losscheck_passes() {
    let o = radlabel(&["losscheck", "--instances", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
}
