//! End-to-end tests of the `axsnn` binary: every subcommand, the exit-code
//! contract, and byte-level determinism of emitted reports.

use std::path::Path;
use std::process::{Command, Output};

use axsnn_core::{
    aqf_filter, load_checkpoint, load_events, save_events, synth_gesture, AqfParams,
};

fn axsnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axsnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch the binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "unexpected exit\nstdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

/// Flags for a deliberately tiny training setup shared across tests.
const TINY: &[&str] = &[
    "--set",
    "epochs=4",
    "--set",
    "hidden=8",
    "--train-count",
    "64",
    "--test-count",
    "32",
];

#[test]
fn filter_output_matches_the_library_filter() {
    let dir = tempfile::tempdir().unwrap();
    let stream = synth_gesture(1, 180, 99);
    let input = dir.path().join("in.axev");
    save_events(&stream, &input).unwrap();

    let out = axsnn(
        dir.path(),
        &[
            "filter", "--input", "in.axev", "--output", "out.axev", "--t2", "40",
        ],
    );
    assert_exit(&out, 0);

    let params = AqfParams {
        t2: 40.0,
        ..AqfParams::default()
    };
    let expected = aqf_filter(&stream, &params).unwrap();
    let written = load_events(dir.path().join("out.axev")).unwrap();
    assert_eq!(written.events(), expected.events());
    assert!(
        stdout(&out).contains(&format!(
            "kept {} removed {}",
            expected.len(),
            stream.len() - expected.len()
        )),
        "counts missing from: {}",
        stdout(&out)
    );
}

#[test]
fn missing_input_file_exits_with_the_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = axsnn(
        dir.path(),
        &["filter", "--input", "absent.axev", "--output", "x.axev"],
    );
    assert_exit(&out, 4);
    assert!(
        stderr(&out).contains("absent.axev"),
        "error does not name the file: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_flags_exit_with_the_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = axsnn(dir.path(), &["eval", "--no-such-flag"]);
    assert_exit(&out, 4);
}

#[test]
fn train_writes_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--out", "net.axsn", "--time-steps", "8"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--quality", "0"]);
    let out = axsnn(dir.path(), &args);
    assert_exit(&out, 0);

    let (net, meta) = load_checkpoint(dir.path().join("net.axsn")).unwrap();
    assert_eq!(net.time_steps(), 8);
    assert_eq!(net.layers().len(), 2, "one hidden layer plus the readout");
    assert!((0.0..=100.0).contains(&meta.accuracy));
    assert_eq!(meta.config.epochs, 4);
}

#[test]
fn train_below_the_quality_level_exits_with_the_gate_code() {
    let dir = tempfile::tempdir().unwrap();
    // Zero epochs leaves the random network at chance level, far below Q.
    let out = axsnn(
        dir.path(),
        &[
            "train", "--out", "net.axsn", "--set", "epochs=0", "--train-count", "32",
            "--test-count", "32", "--quality", "99",
        ],
    );
    assert_exit(&out, 3);
    assert!(
        stderr(&out).contains("quality"),
        "gate not mentioned: {}",
        stderr(&out)
    );
}

#[test]
fn attack_emits_an_idx_set_within_the_pixel_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut train_args = vec!["train", "--out", "net.axsn", "--time-steps", "8"];
    train_args.extend_from_slice(TINY);
    train_args.extend_from_slice(&["--quality", "0"]);
    assert_exit(&axsnn(dir.path(), &train_args), 0);

    let out = axsnn(
        dir.path(),
        &[
            "attack", "--attack", "pgd", "--net", "net.axsn", "--epsilon", "0.25",
            "--train-count", "64", "--test-count", "32", "--out-images", "adv.idx",
            "--out-labels", "adv-labels.idx",
        ],
    );
    assert_exit(&out, 0);

    // The CLI attacked the test split of the same synthetic dataset.
    let data = axsnn_core::DeskData::synthetic_images(64, 32, 8, 8, 2, 7).unwrap();
    let test = match data {
        axsnn_core::DeskData::Images { test, .. } => test,
        _ => unreachable!(),
    };
    let adv = axsnn_core::codec::load_idx(
        dir.path().join("adv.idx"),
        dir.path().join("adv-labels.idx"),
    )
    .unwrap();
    assert_eq!(adv.len(), test.len());
    // IDX storage rounds intensities to 8 bits, widening the budget by at
    // most half a quantization step on each side.
    let budget = 0.25 + 0.5 / 255.0;
    for ((adv_img, adv_label), (orig, label)) in adv.iter().zip(&test) {
        assert_eq!(*adv_label as usize, *label);
        for (a, o) in adv_img.pixels().iter().zip(orig.pixels()) {
            assert!(
                (a - o).abs() <= budget + 1e-12,
                "pixel moved {} > {budget}",
                (a - o).abs()
            );
        }
    }

    // The emitted set round-trips as training input.
    let out = axsnn(
        dir.path(),
        &[
            "train", "--out", "net2.axsn", "--data", "idx", "--train-images", "adv.idx",
            "--train-labels", "adv-labels.idx", "--test-images", "adv.idx", "--test-labels",
            "adv-labels.idx", "--set", "epochs=1", "--set", "hidden=4", "--quality", "0",
        ],
    );
    assert_exit(&out, 0);
}

#[test]
fn stream_attacks_write_loadable_streams() {
    let dir = tempfile::tempdir().unwrap();
    let stream = synth_gesture(0, 150, 4242);
    save_events(&stream, dir.path().join("in.axev")).unwrap();

    let out = axsnn(
        dir.path(),
        &[
            "attack", "--attack", "frame", "--in-stream", "in.axev", "--out-stream",
            "framed.axev", "--bins", "6",
        ],
    );
    assert_exit(&out, 0);
    let framed = load_events(dir.path().join("framed.axev")).unwrap();
    // Frame injection adds both polarities along the sensor border per bin.
    let border = 4 * (stream.width() as usize - 1);
    assert_eq!(framed.len(), stream.len() + border * 2 * 6);

    // A sparse attack needs a network over rasterized streams. The low
    // threshold keeps sparse rasters from silencing every neuron, which
    // would leave the attack without a usable gradient.
    let out = axsnn(
        dir.path(),
        &[
            "train", "--out", "snet.axsn", "--set", "epochs=1", "--set", "hidden=4",
            "--set", "neuromorphic=true", "--set", "attacks=FRAME", "--train-count", "12",
            "--test-count", "6", "--events", "150", "--time-steps", "6", "--v-th", "0.25",
            "--quality", "0",
        ],
    );
    assert_exit(&out, 0);
    let out = axsnn(
        dir.path(),
        &[
            "attack", "--attack", "sparse", "--net", "snet.axsn", "--in-stream", "in.axev",
            "--out-stream", "sparse.axev", "--label", "0", "--bins", "6", "--iters", "2",
        ],
    );
    assert_exit(&out, 0);
    let sparse = load_events(dir.path().join("sparse.axev")).unwrap();
    assert_eq!(sparse.height(), stream.height());
}

#[test]
fn eval_reports_a_row_or_the_quality_gate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "eval", "--time-steps", "8", "--epsilon", "0.5", "--json",
    ];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--quality", "0"]);
    let out = axsnn(dir.path(), &args);
    assert_exit(&out, 0);
    let row: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(row["epsilon"], 0.5);
    assert!(row["robustness"].as_f64().unwrap() <= 100.0);

    // An untrained network cannot reach Q = 99.
    let out = axsnn(
        dir.path(),
        &[
            "eval", "--set", "epochs=0", "--train-count", "32", "--test-count", "32",
            "--quality", "99",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn sweep_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--set",
        "v_th_grid=1.0",
        "--set",
        "t_grid=8",
        "--set",
        "schemes=FP32,INT8",
        "--set",
        "approx_levels=0,0.1",
        "--set",
        "epsilons=0,0.5",
        "--set",
        "attacks=PGD",
        "--emit-plotdata",
        "plot.csv",
    ];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--quality", "50"]);

    let out = axsnn(dir.path(), &args);
    assert_exit(&out, 0);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("v_th,time_steps,scheme,a_lvl,attack,epsilon"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2, "header plus one row per cell");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 8);
    assert!(dir.path().join("plot.csv").exists());

    // Same seed, different worker count: byte-identical CSV.
    let rerun_dir = tempfile::tempdir().unwrap();
    let mut rerun = args.clone();
    rerun.extend_from_slice(&["--workers", "2"]);
    let out = axsnn(rerun_dir.path(), &rerun);
    assert_exit(&out, 0);
    let csv2 = std::fs::read_to_string(rerun_dir.path().join("report.csv")).unwrap();
    assert_eq!(csv, csv2);
}

#[test]
fn sweep_with_an_unreachable_quality_level_exits_accordingly() {
    let dir = tempfile::tempdir().unwrap();
    let out = axsnn(
        dir.path(),
        &[
            "sweep", "--set", "v_th_grid=1.0", "--set", "t_grid=8", "--set", "schemes=FP32",
            "--set", "approx_levels=0", "--set", "epsilons=0", "--set", "attacks=PGD",
            "--set", "epochs=0", "--train-count", "32", "--test-count", "32",
            "--quality", "99",
        ],
    );
    assert_exit(&out, 2);
    assert!(
        stdout(&out).contains("no configuration met Q"),
        "missing marker: {}",
        stdout(&out)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    // The file demands perfection; the flag relaxes it back to zero.
    std::fs::write(
        dir.path().join("run.conf"),
        "epochs = 0   # untrained network stays at chance\nquality = 99\n",
    )
    .unwrap();
    let base = vec![
        "train", "--out", "net.axsn", "--config", "run.conf", "--train-count", "32",
        "--test-count", "32",
    ];
    let out = axsnn(dir.path(), &base);
    assert_exit(&out, 3);

    let mut relaxed = base.clone();
    relaxed.extend_from_slice(&["--quality", "0"]);
    let out = axsnn(dir.path(), &relaxed);
    assert_exit(&out, 0);
}

#[test]
fn malformed_config_files_exit_with_the_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "epochs 4\n").unwrap();
    let out = axsnn(
        dir.path(),
        &["train", "--out", "net.axsn", "--config", "bad.conf"],
    );
    assert_exit(&out, 4);
    assert!(
        stderr(&out).contains("key = value"),
        "unhelpful message: {}",
        stderr(&out)
    );

    std::fs::write(dir.path().join("unknown.conf"), "warp_speed = 9\n").unwrap();
    let out = axsnn(
        dir.path(),
        &["train", "--out", "net.axsn", "--config", "unknown.conf"],
    );
    assert_exit(&out, 4);
    assert!(stderr(&out).contains("warp_speed"));
}
