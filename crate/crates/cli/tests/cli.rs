use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jeanie_core::encoders::{load_checkpoint, EncoderConfig, EncoderParams};
use jeanie_core::skeleton::{generate_synthetic, parse_skel_json, write_skel_json};
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synth5w1s")
}

fn jeanie(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jeanie"));
    cmd.current_dir(dir).args(args).env_remove("JEANIE_THREADS");
    if let Some(t) = threads {
        cmd.env("JEANIE_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small_corpus(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&jeanie(
        dir,
        &[
            "gen-synth",
            "--classes",
            "6",
            "--per-class",
            "2",
            "--seed",
            "5",
            "--frames",
            "16",
            "--out",
            data.to_str().unwrap(),
        ],
        None,
    ));
    data
}

const SMALL_CONFIG: &str = r#"{
  "alignment": {"gamma": 0.01, "eta_az": 1, "eta_alt": 0, "step_deg": 30, "sigma": 30},
  "encoder": {"block_size": 6, "stride": 4, "feature_dim": 6, "output_dim": 8, "layers": 2},
  "init_seed": 3
}"#;

fn protocol(episodes: usize) -> String {
    format!(
        r#"{{"n_way": 3, "z_shot": 1, "episodes": {episodes}, "batch": 4, "seed": 2, "train_classes": [3, 4, 5], "test_classes": [0, 1, 2]}}"#
    )
}

#[test]
fn shipped_fixture_accuracy_matches_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("eval");
    let run = jeanie(
        &fixture(),
        &[
            "eval",
            "--data",
            "data",
            "--protocol",
            "protocol.json",
            "--config",
            "config.json",
            "--checkpoint",
            "train/checkpoint.json",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    ok(&run);
    let recorded = json(&fixture().join("eval/manifest.json"))["results"]["accuracy"].as_f64().unwrap();
    let got = json(&out.join("manifest.json"))["results"]["accuracy"].as_f64().unwrap();
    assert!((got - recorded).abs() <= 0.01, "{got} vs recorded {recorded}");
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (tr, ev) = (tmp.path().join("train"), tmp.path().join("eval"));
    ok(&jeanie(&fixture(), &["rerun", "--manifest", "train/manifest.json", "--out", tr.to_str().unwrap()], None));
    ok(&jeanie(&fixture(), &["rerun", "--manifest", "eval/manifest.json", "--out", ev.to_str().unwrap()], None));
    for f in ["train/checkpoint.json", "train/loss.csv", "eval/report.csv", "eval/plotdata.csv"] {
        assert_eq!(fs::read(fixture().join(f)).unwrap(), fs::read(tmp.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn outputs_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    let data = small_corpus(tmp.path());
    write(tmp.path(), "cfg.json", SMALL_CONFIG);
    write(tmp.path(), "proto.json", &protocol(12));
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let (tr, ev) = (format!("tr{i}"), format!("ev{i}"));
        let d = data.to_str().unwrap();
        ok(&jeanie(
            tmp.path(),
            &["train", "--data", d, "--protocol", "proto.json", "--config", "cfg.json", "--out", &tr],
            Some(threads),
        ));
        let ckpt = format!("{tr}/checkpoint.json");
        ok(&jeanie(
            tmp.path(),
            &[
                "eval",
                "--data",
                d,
                "--protocol",
                "proto.json",
                "--config",
                "cfg.json",
                "--checkpoint",
                &ckpt,
                "--out",
                &ev,
            ],
            Some(threads),
        ));
        let read = |f: String| fs::read(tmp.path().join(f)).unwrap();
        reports.push((read(format!("{tr}/loss.csv")), read(ckpt), read(format!("{ev}/report.csv"))));
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn gen_synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    for out in ["a", "b"] {
        ok(&jeanie(
            tmp.path(),
            &["gen-synth", "--classes", "3", "--per-class", "2", "--seed", "8", "--frames", "12", "--out", out],
            None,
        ));
    }
    let names: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 3 * 2 + 2);
    // manifests differ only in their recorded output directory
    for n in names.into_iter().filter(|n| n != "manifest.json") {
        assert_eq!(fs::read(tmp.path().join("a").join(&n)).unwrap(), fs::read(tmp.path().join("b").join(&n)).unwrap());
    }
    let classes = json(&tmp.path().join("a/classes.json"));
    assert_eq!(classes, serde_json::json!(["wave_right", "raise_both_arms", "kick_right"]));
}

#[test]
fn simulate_views_writes_the_grid() {
    let tmp = TempDir::new().unwrap();
    let seq = generate_synthetic::<f64>(2, 10, 0.0, 1.0, 4).unwrap();
    write(tmp.path(), "kick.skel.json", &write_skel_json(&seq));
    ok(&jeanie(
        tmp.path(),
        &[
            "simulate-views",
            "--in",
            "kick.skel.json",
            "--step",
            "20",
            "--eta-az",
            "1",
            "--eta-alt",
            "1",
            "--out",
            "views",
        ],
        None,
    ));
    let files = fs::read_dir(tmp.path().join("views")).unwrap().count();
    assert_eq!(files, 9 + 1);
    let center: jeanie_core::SkeletonSequence64 =
        parse_skel_json(&fs::read(tmp.path().join("views/kick_az+0_alt+0.skel.json")).unwrap()).unwrap();
    let want = seq.hip_centered();
    let err = (center.frames() - want.frames()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err <= 1e-12, "{err}");
}

/// Monotone paths through a `n × n` grid with unit steps (Delannoy numbers).
fn dtw_path_count(n: usize) -> f64 {
    let mut d = vec![vec![1.0f64; n]; n];
    for i in 1..n {
        for j in 1..n {
            d[i][j] = d[i - 1][j] + d[i][j - 1] + d[i - 1][j - 1];
        }
    }
    d[n - 1][n - 1]
}

#[test]
fn identical_sequences_align_near_zero() {
    let tmp = TempDir::new().unwrap();
    let seq = generate_synthetic::<f64>(4, 30, 10.0, 1.0, 1).unwrap();
    write(tmp.path(), "q.skel.json", &write_skel_json(&seq));
    let gamma = 0.05;
    write(
        tmp.path(),
        "cfg.json",
        &format!(r#"{{"gamma": {gamma}, "iota": 1, "eta_az": 0, "eta_alt": 0, "base": "euclidean"}}"#),
    );
    let out = jeanie(
        tmp.path(),
        &["align", "--query", "q.skel.json", "--support", "q.skel.json", "--config", "cfg.json"],
        None,
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // 30 frames in blocks of 8 with stride 5 → 5 blocks
    let bound = gamma * dtw_path_count(5).ln();
    let d = v["d_softdtw"].as_f64().unwrap();
    assert!(d <= 0.0 && d >= -bound, "{d} vs -{bound}");
    for k in ["d_jeanie", "d_fvm"] {
        assert!(v[k].as_f64().unwrap() <= 0.0, "{k}: {}", v[k]);
    }
}

#[test]
fn unreadable_input_exits_3_naming_the_file() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "cfg.json", "{}");
    let out = jeanie(
        tmp.path(),
        &["align", "--query", "missing.skel.json", "--support", "missing.skel.json", "--config", "cfg.json"],
        None,
    );
    assert_eq!(code(&out), 3);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("missing.skel.json"), "{err}");

    let data = small_corpus(tmp.path());
    let broken = write(&data, "zz_broken.skel.json", r#"{"num_joints": 2, "frames": []}"#);
    write(tmp.path(), "proto.json", &protocol(4));
    let out = jeanie(
        tmp.path(),
        &["train", "--data", data.to_str().unwrap(), "--protocol", "proto.json", "--out", "o"],
        None,
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8(out.stderr).unwrap().contains(broken.file_name().unwrap().to_str().unwrap()));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let seq = generate_synthetic::<f64>(0, 12, 0.0, 1.0, 1).unwrap();
    write(tmp.path(), "q.skel.json", &write_skel_json(&seq));
    let align = |cfg: &str| {
        write(tmp.path(), "cfg.json", cfg);
        code(&jeanie(
            tmp.path(),
            &["align", "--query", "q.skel.json", "--support", "q.skel.json", "--config", "cfg.json"],
            None,
        ))
    };
    assert_eq!(align(r#"{"gama": 0.1}"#), 2);
    assert_eq!(align(r#"{"gamma": -1.0}"#), 2);
    assert_eq!(align("not json"), 2);
    assert_eq!(align(r#"{"mode": "camvpc"}"#), 2);
    let out = jeanie(
        tmp.path(),
        &["align", "--query", "q.skel.json", "--support", "q.skel.json", "--config", "cfg.json"],
        Some("zero"),
    );
    assert_eq!(code(&out), 2);
    assert_eq!(
        code(&jeanie(
            tmp.path(),
            &["gen-synth", "--classes", "99", "--per-class", "1", "--seed", "0", "--out", "x"],
            None
        )),
        2
    );
    assert_eq!(code(&jeanie(tmp.path(), &["train"], None)), 2);
}

#[test]
fn zero_episode_training_keeps_initialization() {
    let tmp = TempDir::new().unwrap();
    let data = small_corpus(tmp.path());
    write(tmp.path(), "cfg.json", SMALL_CONFIG);
    write(tmp.path(), "proto.json", &protocol(0));
    ok(&jeanie(
        tmp.path(),
        &["train", "--data", data.to_str().unwrap(), "--protocol", "proto.json", "--config", "cfg.json", "--out", "o"],
        None,
    ));
    let (params, seed) =
        load_checkpoint::<f64>(&fs::read_to_string(tmp.path().join("o/checkpoint.json")).unwrap()).unwrap();
    let enc = EncoderConfig {
        block_size: 6,
        stride: 4,
        feature_dim: 6,
        output_dim: 8,
        layers: 2,
        ..EncoderConfig::default()
    };
    assert_eq!(seed, 3);
    assert_eq!(params, EncoderParams::init(enc, 15, 3).unwrap());
    assert_eq!(fs::read_to_string(tmp.path().join("o/loss.csv")).unwrap(), "step,loss\n");
    assert!(tmp.path().join("o/manifest.json").exists());
}

#[test]
fn eval_reports_and_sweeps() {
    let tmp = TempDir::new().unwrap();
    let data = small_corpus(tmp.path());
    let d = data.to_str().unwrap();
    write(tmp.path(), "cfg.json", SMALL_CONFIG);
    write(tmp.path(), "proto0.json", &protocol(0));
    ok(&jeanie(
        tmp.path(),
        &["train", "--data", d, "--protocol", "proto0.json", "--config", "cfg.json", "--out", "tr"],
        None,
    ));
    let eval = |proto: &str, cfg: &str, out: &str| {
        jeanie(
            tmp.path(),
            &[
                "eval",
                "--data",
                d,
                "--protocol",
                proto,
                "--config",
                cfg,
                "--checkpoint",
                "tr/checkpoint.json",
                "--out",
                out,
            ],
            None,
        )
    };

    // no episodes means no results
    assert_eq!(code(&eval("proto0.json", "cfg.json", "e0")), 2);

    write(tmp.path(), "proto1.json", &protocol(1));
    ok(&eval("proto1.json", "cfg.json", "e1"));
    let report = fs::read_to_string(tmp.path().join("e1/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert_eq!(report.lines().next().unwrap(), "episode_id,predicted,truth,d_pos_mean,d_neg_min");

    let sweep = SMALL_CONFIG
        .replace(r#""eta_az": 1"#, r#""eta_az": 2"#)
        .replace(r#""init_seed": 3"#, r#""init_seed": 3, "sweep": {"param": "iota", "values": [1, 2, 3, 4]}"#);
    write(tmp.path(), "sweep.json", &sweep);
    write(tmp.path(), "proto.json", &protocol(20));
    ok(&eval("proto.json", "sweep.json", "es"));
    ok(&eval("proto.json", "sweep.json", "es2"));
    let plot = fs::read_to_string(tmp.path().join("es/plotdata.csv")).unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "x,y,series");
    for (i, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{},", i + 1)) && l.ends_with(",jeanie"), "{l}");
    }
    for f in ["report.csv", "plotdata.csv"] {
        assert_eq!(fs::read(tmp.path().join("es").join(f)).unwrap(), fs::read(tmp.path().join("es2").join(f)).unwrap());
    }
}
