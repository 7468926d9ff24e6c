use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use droidsel::ensemble::{save_ensemble, save_pool, EnsemblePool, WeightVector};
use droidsel::fixtures::sample_apk;
use droidsel::learner::{LearnerSpec, TrainedLearner};

fn droidsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_droidsel")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_apk(dir: &Path, name: &str, malicious: bool, variant: usize) -> PathBuf {
    let mut perms = vec!["android.permission.INTERNET"];
    let mut methods = vec![("Landroid/app/Activity;", "onCreate")];
    let actions: &[&str] = if malicious {
        perms.push("android.permission.SEND_SMS");
        methods.push(("Landroid/telephony/SmsManager;", "sendTextMessage"));
        &["android.provider.Telephony.SMS_RECEIVED"]
    } else {
        perms.push("android.permission.ACCESS_NETWORK_STATE");
        methods.push(("Landroid/widget/Toast;", "show"));
        &["android.intent.action.MAIN"]
    };
    if variant % 3 == 0 {
        perms.push("android.permission.VIBRATE");
    }
    let path = dir.join(format!("{name}.apk"));
    fs::write(&path, sample_apk(&perms, actions, &[&methods])).unwrap();
    path
}

#[test]
fn extract_two_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_apk(dir.path(), "a", true, 0);
    let b = write_apk(dir.path(), "b", false, 1);
    let out = dir.path().join("records.txt");
    let o = droidsel(&["extract", p(&a), p(&b), "--out", p(&out), "--label", "+1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("a\t+1\tperm:"));
    assert!(lines[1].starts_with("b\t+1\t"));
}

#[test]
fn extract_tolerates_corrupt_files_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_apk(dir.path(), "good", true, 0);
    let bad = dir.path().join("bad.apk");
    fs::write(&bad, b"PK\x03\x04 not really").unwrap();
    let out = dir.path().join("records.txt");

    let o = droidsel(&["extract", p(&good), p(&bad), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
    assert!(stderr(&o).contains("bad.apk"), "{}", stderr(&o));

    let o = droidsel(&["extract", p(&good), p(&bad), "--out", p(&out), "--strict"]);
    assert_eq!(o.status.code(), Some(4));

    let o = droidsel(&["extract", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn extract_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = droidsel(&["extract", p(&empty), "--out", p(&dir.path().join("r.txt"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("no inputs"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = droidsel(&["train-pool", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (mal, ben) = (d.join("mal"), d.join("ben"));
    fs::create_dir(&mal).unwrap();
    fs::create_dir(&ben).unwrap();
    for i in 0..12 {
        write_apk(&mal, &format!("m{i:02}"), true, i);
        write_apk(&ben, &format!("b{i:02}"), false, i);
    }
    let (mal_rec, ben_rec, records) = (d.join("mal.txt"), d.join("ben.txt"), d.join("all.txt"));
    assert!(droidsel(&["extract", p(&mal), "--out", p(&mal_rec), "--label", "+1"]).status.success());
    assert!(droidsel(&["extract", p(&ben), "--out", p(&ben_rec), "--label", "-1"]).status.success());
    let all = fs::read_to_string(&mal_rec).unwrap() + &fs::read_to_string(&ben_rec).unwrap();
    assert_eq!(all.lines().count(), 24);
    fs::write(&records, all).unwrap();

    let (data, vocab) = (d.join("data.txt"), d.join("vocab.txt"));
    let o = droidsel(&["vectorize", "--records", p(&records), "--out", p(&data), "--vocab-out", p(&vocab)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let pool = d.join("pool");
    let o = droidsel(&["train-pool", "--data", p(&data), "--out", p(&pool), "--size", "5", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(pool.join("pool.txt").is_file());

    let (ensemble, report) = (d.join("ensemble.txt"), d.join("ga.txt"));
    let o = droidsel(&[
        "select", "--pool", p(&pool), "--data", p(&data), "--out", p(&ensemble), "--report", p(&report), "--max-iter", "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ga = fs::read_to_string(&report).unwrap();
    assert_eq!(ga.lines().filter(|l| l.starts_with("generation=")).count(), 6);

    let o = droidsel(&["evaluate", "--ensemble", p(&ensemble), "--data", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("accuracy=1.000000"));

    let o = droidsel(&["predict", "--ensemble", p(&ensemble), "--vocab", p(&vocab), "--records", p(&records)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 24);
    assert_eq!(lines[0], "m00\t+1");
    assert_eq!(lines[23], "b11\t-1");

    // Running the same stage twice gives the same files.
    let pool2 = d.join("pool2");
    assert!(droidsel(&["train-pool", "--data", p(&data), "--out", p(&pool2), "--size", "5", "--seed", "3"]).status.success());
    assert_eq!(fs::read(pool.join("learner-000.txt")).unwrap(), fs::read(pool2.join("learner-000.txt")).unwrap());

    // A vocabulary of another dimension is rejected.
    let other_vocab = d.join("other-vocab.txt");
    let first_line = fs::read_to_string(&vocab).unwrap().lines().next().unwrap().to_string();
    fs::write(&other_vocab, first_line + "\n").unwrap();
    let o = droidsel(&["predict", "--ensemble", p(&ensemble), "--vocab", p(&other_vocab), "--records", p(&records)]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn record_without_known_features_predicts_malicious_under_zero_bias() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let vocab = d.join("vocab.txt");
    fs::write(&vocab, "0\tperm:android.permission.SEND_SMS\t3\n1\tapi:Lx;->y\t2\n").unwrap();
    // Zero-bias learners: the all-zero vector has margin 0 everywhere.
    let learners = [[1.0, -0.5, 0.0], [-2.0, 1.0, 0.0], [0.5, 0.5, 0.0]]
        .iter()
        .map(|w| TrainedLearner::from_parameters(LearnerSpec::default(), 2, w.to_vec()).unwrap())
        .collect();
    let pool = EnsemblePool::new(learners, vec![1, 2, 3], 9).unwrap();
    let manifest = save_pool(&pool, d.join("pool")).unwrap();
    let ensemble = d.join("ensemble.txt");
    save_ensemble(&ensemble, &manifest, &WeightVector::all_ones(3)).unwrap();
    let records = d.join("records.txt");
    fs::write(&records, "unknown\t?\tperm:android.permission.CAMERA\tapi:Lq;->r\nempty\t?\n").unwrap();

    let o = droidsel(&["predict", "--ensemble", p(&ensemble), "--vocab", p(&vocab), "--records", p(&records)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "unknown\t+1\nempty\t+1\n");
}

#[test]
fn experiment_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "repeats = 0\n").unwrap();
    let o = droidsel(&["experiment", "--config", p(&config)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("repeats"), "{}", stderr(&o));

    fs::write(&config, "pool_sise = 3\n").unwrap();
    let o = droidsel(&["experiment", "--config", p(&config)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("pool_sise"));

    let o = droidsel(&["experiment", "--config", p(&dir.path().join("missing.conf"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn small_experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.conf");
    fs::write(
        &config,
        "repeats = 2\npool_size = 4\nsynthetic_samples = 100\nsynthetic_features = 10\nga_max_iter = 3\nepochs = 3\n",
    )
    .unwrap();
    let out = dir.path().join("report.txt");
    let o = droidsel(&["experiment", "--config", p(&config), "--out", p(&out), "--noise-test"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("config noise_test = true"));
    assert_eq!(text.lines().filter(|l| l.starts_with("run ")).count(), 2);
    assert_eq!(text.lines().filter(|l| l.starts_with("summary ")).count(), 12);
}
