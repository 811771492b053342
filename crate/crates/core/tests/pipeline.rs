use std::fs;
use std::process::Command;

use activetree::acquisition::Criterion;
use activetree::belief::{BeliefState, ThetaTable};
use activetree::datastream::{sample_from_theta, stagger_concept_at, stagger_stream, DataPoint, StaggerObject};
use activetree::experiment::{parse_config_text, run_experiment, ExperimentConfig, RECORDS_FILE, SUMMARY_FILE};
use activetree::learner::{run_online, DriftSettings, LearnerConfig, OfsConfig};
use activetree::seed::Rng as SeedRng;
use activetree::session::HypothesisMode;
use rand::SeedableRng;

fn stagger_config(dir: &std::path::Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "stream.source = stagger\nstream.length = 10\nstream.test_size = 20\nlearner.hypotheses = 12\n\
         run.seeds = 3,8\noutput.dir = {}\n{extra}",
        dir.display()
    );
    ExperimentConfig::from_raw(&parse_config_text(&text).unwrap()).unwrap()
}

#[test]
fn two_seeds_ten_epochs_give_twenty_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = stagger_config(dir.path(), "");
    let summary = run_experiment(&config).unwrap();
    let records = fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap();
    let lines: Vec<&str> = records.lines().collect();
    assert_eq!(lines.len(), 20);
    assert_eq!(summary.records, 20);

    let keys = ["seed", "t", "cost", "correct", "train_utility", "test_utility", "stop_reason", "queries"];
    let mut cost_sum = 0.0;
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 8);
        assert!(keys.iter().all(|k| obj.contains_key(*k)));
        cost_sum += v["cost"].as_f64().unwrap();
    }
    assert!(lines[0].starts_with("{\"seed\":3,\"t\":0,"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(json["cost_sum"].as_f64().unwrap(), cost_sum);
    assert!((json["total_cost"]["mean"].as_f64().unwrap() - cost_sum / 2.0).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&stagger_config(a.path(), "learner.drift = true\n")).unwrap();
    run_experiment(&stagger_config(b.path(), "learner.drift = true\nrun.parallelism = 2\n")).unwrap();
    for f in [RECORDS_FILE, SUMMARY_FILE, "models/seed_3.json", "models/seed_8.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_replicate_still_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, "a,b,label\n0.5,1,x\n1.5,0,y\n2.5,1,x\n3.5,0,y\n4.5,1,x\n").unwrap();
    let out = dir.path().join("out");
    let text = format!(
        "stream.source = file\nstream.path = {}\nstream.test_fraction = 0.4\noutput.dir = {}\n",
        data.display(),
        out.display()
    );
    let config = ExperimentConfig::from_raw(&parse_config_text(&text).unwrap()).unwrap();
    let err = run_experiment(&config).unwrap_err().to_string();
    assert!(err.contains("learner.continuous"), "{err}");
    assert!(out.join(SUMMARY_FILE).is_file());
}

#[test]
fn label_never_affects_its_own_epoch() {
    let theta = ThetaTable::new(vec![vec![0.9, 0.2], vec![0.4, 0.7], vec![0.6, 0.1], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap();
    let stream = sample_from_theta(&theta, 40, &mut SeedRng::seed_from_u64(1));
    let mut config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Sample(20), 5);
    config.drift = Some(DriftSettings::default());
    config.feature_selection = Some(OfsConfig::new(3));
    let (base, _) = run_online(&config, &stream, BeliefState::uniform(4, 2)).unwrap();
    for t in [0, 17, 39] {
        let mut flipped = stream.clone();
        flipped[t].label = 1 - flipped[t].label;
        let (alt, _) = run_online(&config, &flipped, BeliefState::uniform(4, 2)).unwrap();
        assert_eq!(base[..t], alt[..t]);
        assert_eq!(base[t].prediction, alt[t].prediction);
        assert_eq!(base[t].queried, alt[t].queried);
        assert_eq!(base[t].candidates, alt[t].candidates);
    }
}

#[test]
fn same_seed_same_records() {
    let theta = ThetaTable::new(vec![vec![0.8, 0.3]; 5], vec![0.5, 0.5]).unwrap();
    let stream = sample_from_theta(&theta, 60, &mut SeedRng::seed_from_u64(2));
    for criterion in [Criterion::Ec2, Criterion::InfoGain, Criterion::Uncertainty, Criterion::Random] {
        let config = LearnerConfig::new(criterion, HypothesisMode::Sample(15), 11);
        let a = run_online(&config, &stream, BeliefState::uniform(5, 2)).unwrap();
        let b = run_online(&config, &stream, BeliefState::uniform(5, 2)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn stagger_concepts_switch_at_drift_points() {
    assert_eq!(stagger_concept_at(59, &[60, 120]), 0);
    assert_eq!(stagger_concept_at(60, &[60, 120]), 1);
    assert_eq!(stagger_concept_at(120, &[60, 120]), 2);
    let point = StaggerObject { size: 0, color: 0, shape: 1 }.point(0);
    assert_eq!(point.label, 1);

    let stream = stagger_stream(10_000, &[], &mut SeedRng::seed_from_u64(4)).unwrap();
    let rate = stream.iter().filter(|p| p.label == 1).count() as f64 / 1e4;
    assert!((rate - 1.0 / 9.0).abs() < 0.03, "{rate}");
    let again = stagger_stream(10_000, &[], &mut SeedRng::seed_from_u64(4)).unwrap();
    assert_eq!(stream, again);
}

#[test]
fn separable_stream_is_learned_exactly() {
    let star = ThetaTable::new(vec![vec![0.0, 1.0], vec![0.3, 0.7], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap();
    let stream: Vec<DataPoint> = sample_from_theta(&star, 500, &mut SeedRng::seed_from_u64(9));
    let config = LearnerConfig::new(Criterion::Ec2, HypothesisMode::Enumerate, 9);
    let (records, _) = run_online(&config, &stream, BeliefState::uniform(3, 2)).unwrap();
    assert!(records[400..].iter().all(|r| r.prediction == r.truth));
}

#[test]
fn cli_round_trip() {
    let bin = env!("CARGO_BIN_EXE_activetree");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stagger.csv");
    let status = Command::new(bin)
        .args(["gen-stagger", "--T", "40", "--drift", "20", "--seed", "1", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 41);
    assert!(text.starts_with("size_small,size_medium,size_large,"));

    let cfg = dir.path().join("exp.cfg");
    fs::write(
        &cfg,
        format!(
            "stream.source = file\nstream.path = {}\nstream.test_fraction = 0.25\nlearner.hypotheses = 10\noutput.dir = {}\n",
            csv.display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = Command::new(bin).arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let bad = Command::new(bin).arg("validate").arg(&cfg).args(["--learner.bogus", "1"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("learner.bogus"));

    let run = Command::new(bin).arg("run").arg(&cfg).args(["--learner.criterion", "ig"]).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let lines = fs::read_to_string(dir.path().join("out").join(RECORDS_FILE)).unwrap().lines().count();
    assert_eq!(lines, 30);

    let eval = Command::new(bin)
        .arg("eval")
        .arg("--belief")
        .arg(dir.path().join("out/models/seed_0.json"))
        .arg("--test")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let printed = String::from_utf8_lossy(&eval.stdout);
    let value: f64 = printed.split_whitespace().last().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
}
