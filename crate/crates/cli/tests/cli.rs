use std::path::Path;
use std::process::{Command, Output};

use megacity::net::{load_checkpoint, Layer, Network, NetworkConfig};

fn megacity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_megacity")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = megacity(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn synth_then_labelgen_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--seed", "3", "synth", "--rows", "8", "--cols", "8", "--out", "city"]);
    for f in ["raster.mcr", "buildings.geojson", "blocks.geojson", "landuse.geojson"] {
        assert!(dir.path().join("city").join(f).is_file(), "{f}");
    }
    ok(dir.path(), &["--seed", "3", "labelgen", "--in", "city", "--out", "labels", "--holdout-per-class", "1"]);
    for layer in ["land.csv", "bd.csv", "far.csv", "pop.csv"] {
        let text = std::fs::read_to_string(dir.path().join("labels").join(layer)).unwrap();
        assert_eq!(text.lines().count(), 65, "{layer}");
    }
    let holdout = std::fs::read_to_string(dir.path().join("labels/holdout.csv")).unwrap();
    assert_eq!(holdout.lines().count(), 14);
    let samples = std::fs::read_to_string(dir.path().join("labels/samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 4 * (64 - 13));
}

#[test]
fn zero_epoch_training_keeps_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--seed", "5", "synth", "--rows", "4", "--cols", "4", "--out", "city"]);
    ok(dir.path(), &["--seed", "5", "labelgen", "--in", "city", "--out", "labels"]);
    let stdout = ok(
        dir.path(),
        &["--seed", "5", "train1", "--raster", "city/raster.mcr", "--labels", "labels", "--out", "m.mck", "--epochs", "0"],
    );
    assert!(stdout.contains("trained on 48 samples"), "{stdout}");
    let config = NetworkConfig::default();
    let trained: Network<f32> = load_checkpoint(dir.path().join("m.mck"), &config).unwrap();
    let fresh = Network::<f32>::build(&config, 5).unwrap();
    for layer in Layer::ALL {
        assert_eq!(trained.layer(layer).weight.value, fresh.layer(layer).weight.value, "{}", layer.name());
        assert_eq!(trained.layer(layer).bias.value, fresh.layer(layer).bias.value, "{}", layer.name());
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("m.loss.csv")).unwrap(), "epoch,loss\n");
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["gradcheck", "--weights", "2"]);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.ends_with("PASS")).count(), 9, "{stdout}");
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(megacity(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(megacity(dir.path(), &["synth", "--rows", "many"]).status.code(), Some(1));
    let missing = megacity(dir.path(), &["infer", "--checkpoint", "none.mck", "--raster", "none.mcr"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(megacity(dir.path(), &["synth", "--rows", "2", "--out", "c"]).status.code(), Some(2));
    assert!(megacity(dir.path(), &["--help"]).status.success());
}

#[test]
fn dumped_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# tweaks\nseed = 9\ntrain.batch_size = 16\nbins.pop.levels = 40\n").unwrap();
    ok(dir.path(), &["--config", "run.cfg", "--dump-config", "a.cfg", "synth", "--rows", "4", "--cols", "4", "--out", "c"]);
    ok(dir.path(), &["--config", "a.cfg", "--dump-config", "b.cfg", "synth", "--rows", "4", "--cols", "4", "--out", "c"]);
    let a = std::fs::read_to_string(dir.path().join("a.cfg")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.cfg")).unwrap());
    assert!(a.contains("seed = 9") && a.contains("train.batch_size = 16"), "{a}");

    std::fs::write(dir.path().join("bad.cfg"), "train.bogus = 1\n").unwrap();
    assert_eq!(megacity(dir.path(), &["--config", "bad.cfg", "synth"]).status.code(), Some(2));
}

#[test]
fn eval_of_a_stored_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/error_matrix_counts.csv");
    let stdout = ok(dir.path(), &["eval", "--matrix", matrix.to_str().unwrap(), "--out", "report"]);
    assert!(stdout.contains("92.35"), "{stdout}");
    assert!(stdout.contains("0.9143"), "{stdout}");
    let accuracy = std::fs::read_to_string(dir.path().join("report/accuracy.csv")).unwrap();
    assert!(accuracy.contains("commercial,94.74,90.83"), "{accuracy}");
}

#[test]
fn synthetic_pipeline_is_reproducible() {
    let run = |dir: &Path| {
        ok(dir, &["--seed", "21", "synth", "--rows", "4", "--cols", "4", "--out", "city"]);
        ok(dir, &["--seed", "21", "labelgen", "--in", "city", "--out", "labels"]);
        ok(dir, &["--seed", "21", "train1", "--raster", "city/raster.mcr", "--labels", "labels", "--out", "m.mck", "--epochs", "1"]);
        ok(dir, &["--seed", "21", "--threads", "1", "infer", "--checkpoint", "m.mck", "--raster", "city/raster.mcr", "--out", "pred"]);
        ["m.mck", "m.loss.csv", "pred/land.csv", "pred/pop.csv", "pred/land.ppm", "city/raster.mcr"]
            .map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run(a.path()) == run(b.path()));
}
