mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use freqaug::losses::{self, LossReport, PredictionBatch, TargetBatch};
use freqaug::{npy, Field};

fn freqaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&freqaug(&["--help"])), 0);
    assert_eq!(code(&freqaug(&["--version"])), 0);
    assert_eq!(code(&freqaug(&["augment", "--help"])), 0);
    assert_eq!(code(&freqaug(&[])), 1);
    assert_eq!(code(&freqaug(&["nonsense"])), 1);
    assert_eq!(code(&freqaug(&["augment", "--bogus"])), 1);
    assert_eq!(code(&freqaug(&["augment", "--mask", "circle"])), 1);
    assert_eq!(code(&freqaug(&["augment", "--size", "big"])), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_dir(dir.path(), 1, 16, 16, 1);
    let images = dir.path().join("images");
    let out = dir.path().join("out");
    let base = ["augment", "--input", s(&images), "--out", s(&out)];
    for extra in [
        &["--k", "0"][..],
        &["--d0-max", "0.5"],
        &["--d0-min", "0.03", "--d0-max", "0.02"],
        &["--orders", "4"],
        &["--size", "4x4"],
        &["--workers", "0"],
    ] {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        assert_eq!(code(&freqaug(&args)), 1, "{extra:?}");
    }
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
    assert_eq!(code(&freqaug(&["augment", "--config", s(&cfg)])), 1);
    assert_eq!(code(&freqaug(&["augment", "--out", s(&out)])), 1);
}

#[test]
fn data_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing");
    assert_eq!(code(&freqaug(&["augment", "--input", s(&missing), "--out", s(&out)])), 3);

    let (img, lbl) = (dir.path().join("i"), dir.path().join("l"));
    std::fs::create_dir_all(&img).unwrap();
    std::fs::create_dir_all(&lbl).unwrap();
    image::GrayImage::new(16, 16).save(img.join("a.png")).unwrap();
    image::GrayImage::new(16, 15).save(lbl.join("a.png")).unwrap();
    let args = ["augment", "--input", s(&img), "--labels", s(&lbl), "--out", s(&out)];
    assert_eq!(code(&freqaug(&args)), 2);

    std::fs::write(dir.path().join("junk.png"), b"junk").unwrap();
    let junk = dir.path().join("junk.png");
    assert_eq!(code(&freqaug(&["saliency", "--input", s(&junk), "--out", s(&out)])), 2);
}

#[test]
fn empty_input_succeeds_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = freqaug(&["augment", "--input", s(dir.path()), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["records"], 0);
    assert_eq!(report["warnings"].as_array().unwrap().len(), 1);
    assert_eq!(std::fs::read_to_string(out.join("manifest.jsonl")).unwrap(), "");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_dir(dir.path(), 1, 24, 24, 3);
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "input_dir = {:?}\nout_dir = {:?}\nk = 5\nseed = 1\nsize = \"24x24\"\n",
            s(&dir.path().join("images")),
            s(&out)
        ),
    )
    .unwrap();
    let o = freqaug(&["augment", "--config", s(&cfg), "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = freqaug::pipeline::read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.seed == 1));
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_dir(dir.path(), 2, 24, 24, 3);
    let out = dir.path().join("out");
    let images = dir.path().join("images");
    let args = ["augment", "--input", s(&images), "--out", s(&out), "--k", "2", "--size", "24x24"];
    assert_eq!(code(&freqaug(&args)), 0);
    let manifest = out.join("manifest.jsonl");
    for line in ["0", "3"] {
        assert_eq!(code(&freqaug(&["replay", "--manifest", s(&manifest), "--line", line])), 0);
    }
    let png = dir.path().join("r.png");
    let by_key = ["replay", "--manifest", s(&manifest), "--parent", "fixture001", "--view", "1", "--out", s(&png)];
    assert_eq!(code(&freqaug(&by_key)), 0);
    let records = freqaug::pipeline::read_manifest(&manifest).unwrap();
    let replayed = freqaug::io::load_image(&png).unwrap();
    assert_eq!(freqaug::io::image_hash(&replayed), records[3].image_sha256);

    assert_eq!(code(&freqaug(&["replay", "--manifest", s(&manifest), "--line", "9"])), 1);
    let text = std::fs::read_to_string(&manifest).unwrap();
    let tampered = text.replacen(&records[0].image_sha256, &"0".repeat(64), 1);
    std::fs::write(&manifest, tampered).unwrap();
    let o = freqaug(&["replay", "--manifest", s(&manifest), "--line", "0"]);
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["matches"], false);
}

#[test]
fn single_image_commands() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_dir(dir.path(), 1, 32, 32, 3);
    let img = dir.path().join("images/fixture000.png");
    let out = |name: &str| dir.path().join(name);

    let o = freqaug(&["filter", "--input", s(&img), "--out", s(&out("f.png")), "--d0", "0.02,0.03,0.04", "--order", "1"]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["spec"].as_array().unwrap().len(), 3);
    assert_eq!(report["spec"][2]["d0_fraction"], 0.04);
    assert_eq!(code(&freqaug(&["filter", "--input", s(&img), "--out", s(&out("f.png")), "--d0", "0.02,0.03"])), 1);
    assert_eq!(code(&freqaug(&["filter", "--input", s(&img), "--out", s(&out("g.png")), "--d0", "0.1"])), 1);
    let o = freqaug(&["filter", "--input", s(&img), "--out", s(&out("i.png")), "--d0", "0.04", "--ideal", "--residual", s(&out("r.npy"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(npy::read(&out("r.npy")).unwrap().shape, vec![3, 32, 32]);

    let a = freqaug(&["blend", "--input", s(&img), "--out", s(&out("b1.png")), "--seed", "3"]);
    let b = freqaug(&["blend", "--input", s(&img), "--out", s(&out("b2.png")), "--seed", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(out("b1.png")).unwrap(), std::fs::read(out("b2.png")).unwrap());
    let c = freqaug(&["blend", "--input", s(&img), "--out", s(&out("b3.png")), "--center", "0,31"]);
    let plan: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(plan["plan"]["mask"]["center"], serde_json::json!([0, 31]));

    let o = freqaug(&["saliency", "--input", s(&img), "--out", s(&out("s.npy")), "--preview", s(&out("s.png"))]);
    assert_eq!(code(&o), 0);
    let t = npy::read(&out("s.npy")).unwrap();
    assert_eq!(t.shape, vec![3, 32, 32]);
    assert!(out("s.png").is_file());
}

#[test]
fn preview_command_clamps() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_dir(dir.path(), 1, 16, 16, 3);
    let out = dir.path().join("out");
    let images = dir.path().join("images");
    let args = ["augment", "--input", s(&images), "--out", s(&out), "--k", "2", "--size", "16x16"];
    assert_eq!(code(&freqaug(&args)), 0);
    let png = dir.path().join("p.png");
    let o = freqaug(&["preview", "--manifest", s(&out.join("manifest.jsonl")), "--n", "5", "--out", s(&png)]);
    assert_eq!(code(&o), 0);
    let img = freqaug::io::load_image(&png).unwrap();
    assert_eq!((img.height(), img.width()), (32, 96));
}

#[test]
fn losses_command_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let target = random_field(1, 6, 5, 2);
    let views: Vec<Field> = (0..3).map(|i| random_field(10 + i, 6, 5, 2)).collect();
    npy::write_field(&p("t.npy"), &target).unwrap();
    npy::write_views(&p("v.npy"), &views).unwrap();
    // Probabilities chosen to be exact in f32.
    let seg: Vec<Field> = (0..3)
        .map(|i| Field::from_fn(6, 5, 2, |c, r, k| {
            let q = if (r + k + i) % 2 == 0 { 0.75 } else { 0.25 };
            if c == 0 { q } else { 1.0 - q }
        }))
        .collect();
    npy::write_views(&p("seg.npy"), &seg).unwrap();
    let classes: Vec<f64> = (0..30).map(|i| (i % 3 == 0) as u8 as f64).collect();
    npy::write_f32(&p("lbl.npy"), &[6, 5], &classes).unwrap();

    let o = freqaug(&[
        "losses", "--sal-target", s(&p("t.npy")), "--sal-pred", s(&p("v.npy")),
        "--seg-pred", s(&p("seg.npy")), "--labels", s(&p("lbl.npy")), "--alpha", "0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: LossReport = serde_json::from_slice(&o.stdout).unwrap();

    let round = |f: &Field| Field::new(f.height(), f.width(), f.channels(), f.data().iter().map(|&v| v as f32 as f64).collect()).unwrap();
    let labels = Field::from_fn(6, 5, 2, |c, r, k| {
        let fg = classes[r * 5 + k] == 1.0;
        if (c == 1) == fg { 1.0 } else { 0.0 }
    });
    let preds = PredictionBatch { saliency: views.iter().map(round).collect(), segmentation: seg };
    let tgt = TargetBatch { saliency: round(&target), labels: Some(labels) };
    let want = losses::evaluate(&preds, &tgt, 0.5).unwrap();
    assert_eq!(got, want);

    let o = freqaug(&["losses", "--sal-target", s(&p("t.npy")), "--sal-pred", s(&p("v.npy"))]);
    let got: LossReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(got.loss_seg.is_none());
    npy::write_field(&p("wrong.npy"), &random_field(3, 6, 5, 3)).unwrap();
    let o = freqaug(&["losses", "--sal-target", s(&p("t.npy")), "--sal-pred", s(&p("wrong.npy"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fixture_and_bench_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqaug(&["fixture", "--out", s(dir.path()), "--n", "2", "--size", "20x18"]);
    assert_eq!(code(&o), 0);
    let img = freqaug::io::load_image(&dir.path().join("images/fixture001.png")).unwrap();
    assert_eq!((img.height(), img.width(), img.channels()), (18, 20, 3));

    let report = dir.path().join("bench.json");
    let o = freqaug(&["bench", "--images", "2", "--reps", "1", "--k", "2", "--size", "16x16", "--workers", "2", "--out", s(&report)]);
    assert_eq!(code(&o), 0);
    let parsed: freqaug::bench::BenchReport =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.multi.workers, 2);
    assert_eq!(parsed.single.seconds.len(), 1);
}
