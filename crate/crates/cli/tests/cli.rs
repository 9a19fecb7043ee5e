use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use recinfluence::diagnostics::{read_influence_csv, read_plot_csv, AblationReport, InfluenceReport};
use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recinfluence"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// 7 users × 6 items with a few holes; user 7 rates a single item.
const TOY: &str = "\
1\t1\t5\t100\n1\t2\t3\t101\n1\t3\t4\t102\n1\t5\t1\t103\n1\t6\t2\t104
2\t1\t4\t105\n2\t2\t2\t106\n2\t4\t5\t107\n2\t5\t2\t108
3\t2\t5\t109\n3\t3\t3\t110\n3\t4\t4\t111\n3\t6\t1\t112
4\t1\t2\t113\n4\t3\t5\t114\n4\t4\t3\t115\n4\t5\t4\t116\n4\t6\t5\t117
5\t1\t3\t118\n5\t2\t4\t119\n5\t5\t5\t120\n5\t6\t3\t121
6\t2\t1\t122\n6\t3\t2\t123\n6\t4\t4\t124\n6\t5\t3\t125
7\t3\t4\t126
";

struct Toy {
    dir: TempDir,
}

impl Toy {
    fn new(contents: &str) -> Toy {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("u.data"), contents).unwrap();
        Toy { dir }
    }

    fn data(&self) -> String {
        self.dir.path().join("u.data").to_str().unwrap().to_string()
    }

    fn out(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn missing_dataset_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["stats", "--dataset", "/nonexistent/u.data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["stats", "--metric", "bogus"]).status.code(), Some(2));
    let toy = Toy::new(TOY);
    let data = toy.data();
    assert_eq!(
        run(dir.path(), &["train-eval", "--dataset", &data, "--model", "svd", "--epochs", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["train-eval", "--dataset", &data, "--workers", "0"]).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "seed = \"x\"").unwrap();
    let bad = dir.path().join("bad.toml");
    assert_eq!(run(dir.path(), &["stats", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn stats_match_counting_oracle() {
    let toy = Toy::new(TOY);
    let out = toy.out("o");
    ok(&out, &["stats", "--dataset", &toy.data(), "--title", "Toy"]);
    let stats = &json(out.join("stats.json"))["stats"];

    let mut per_user: BTreeMap<u64, usize> = BTreeMap::new();
    let mut per_item: BTreeMap<u64, usize> = BTreeMap::new();
    let mut sum = 0.0;
    let mut n = 0usize;
    for line in TOY.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        *per_user.entry(f[0].parse().unwrap()).or_default() += 1;
        *per_item.entry(f[1].parse().unwrap()).or_default() += 1;
        sum += f[2].parse::<f64>().unwrap();
        n += 1;
    }
    assert_eq!(stats["n_ratings"], n);
    assert_eq!(stats["n_users"], per_user.len());
    assert_eq!(stats["n_items"], per_item.len());
    assert_eq!(stats["min_ratings_per_user"], *per_user.values().min().unwrap());
    assert_eq!(stats["max_ratings_per_user"], *per_user.values().max().unwrap());
    assert_eq!(stats["min_ratings_per_item"], *per_item.values().min().unwrap());
    assert_eq!(stats["max_ratings_per_item"], *per_item.values().max().unwrap());
    let close = |v: &Value, want: f64| (v.as_f64().unwrap() - want).abs() < 1e-12;
    assert!(close(&stats["avg_rating"], sum / n as f64));
    assert!(close(&stats["density"], n as f64 / (per_user.len() * per_item.len()) as f64));
    assert!(close(&stats["avg_ratings_per_user"], n as f64 / per_user.len() as f64));
    let table = fs::read_to_string(out.join("stats.txt")).unwrap();
    assert!(table.contains("Toy") && table.contains("# Ratings"));
}

#[test]
fn dense_toy_gives_perfect_map() {
    // With every pair rated, a user's unseen items are exactly their
    // held-out items, so every ranking is perfect.
    let mut rows = String::new();
    for u in 1..=5 {
        for i in 1..=6 {
            rows.push_str(&format!("{u}\t{i}\t{}\t0\n", 1 + (u * i) % 5));
        }
    }
    let toy = Toy::new(&rows);
    for model in ["svd", "ncf"] {
        let out = toy.out(model);
        ok(&out, &["train-eval", "--dataset", &toy.data(), "--model", model]);
        let report = &json(out.join(format!("metrics_{model}.json")))["evaluation"]["report"];
        assert_eq!(report["map"], 1.0, "{model}");
        assert!(out.join(format!("model_{model}.json")).is_file());
    }
    assert!(toy.out("ncf").join("loss_ncf.csv").is_file());
}

#[test]
fn train_eval_records_config_hash_and_is_reproducible() {
    let toy = Toy::new(TOY);
    let a = toy.out("a");
    let b = toy.out("b");
    ok(&a, &["train-eval", "--dataset", &toy.data(), "--epochs", "3"]);
    ok(&b, &["train-eval", "--dataset", &toy.data(), "--epochs", "3"]);
    let ma = json(a.join("metrics_ncf.json"));
    assert_eq!(ma["config_hash"].as_str().unwrap().len(), 64);
    for f in ["metrics_ncf.json", "metrics_ncf.txt", "model_ncf.json", "loss_ncf.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(a.join("run_log.jsonl").is_file());
}

#[test]
fn influence_outputs_are_consistent_projections() {
    let toy = Toy::new(TOY);
    let out = toy.out("o");
    ok(&out, &["influence-users", "--dataset", &toy.data(), "--model", "svd", "--svg"]);
    let report = InfluenceReport::from_json(&fs::read_to_string(out.join("influence_users.json")).unwrap()).unwrap();
    assert_eq!(report.records.len(), 7);

    let csv = read_influence_csv(fs::File::open(out.join("influence_users.csv")).unwrap()).unwrap();
    assert_eq!(csv, report.records);

    let plot = read_plot_csv(fs::File::open(out.join("plot_users.csv")).unwrap()).unwrap();
    assert_eq!(plot.len(), report.records.len());
    for (k, (row, rec)) in plot.iter().zip(&report.records).enumerate() {
        assert_eq!(row.index, k + 1);
        assert_eq!(row.entity_id, rec.entity_id);
        assert_eq!(row.influence, rec.influence);
    }
    let reaggregated: f64 = plot.iter().filter_map(|r| r.influence).sum();
    let direct: f64 = report.records.iter().filter_map(|r| r.influence).sum();
    assert_eq!(reaggregated, direct);

    let hist = fs::read_to_string(out.join("hist_users.csv")).unwrap();
    let max = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).max();
    assert_eq!(max, Some(5));
    assert!(fs::read_to_string(out.join("plot_users.svg")).unwrap().starts_with("<svg"));
    assert!(out.join("timings_users.csv").is_file());
}

#[test]
fn reruns_are_byte_identical_apart_from_timings() {
    let toy = Toy::new(TOY);
    let (a, b) = (toy.out("a"), toy.out("b"));
    let data = toy.data();
    for dir in [&a, &b] {
        ok(dir, &["influence-items", "--dataset", &data, "--epochs", "2", "--workers", "2"]);
    }
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.starts_with("timings_") || name == "run_log.jsonl" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
        compared += 1;
    }
    assert!(compared >= 4);
}

#[test]
fn ablate_with_zero_entities_is_identity() {
    let toy = Toy::new(TOY);
    let out = toy.out("o");
    let data = toy.data();
    ok(&out, &["influence-users", "--dataset", &data, "--model", "svd"]);
    let stdout = ok(&out, &["ablate", "--dataset", &data, "--kind", "users", "--direction", "least", "--n", "0"]);
    assert!(stdout.contains("0 of 7"));
    let report: AblationReport =
        serde_json::from_str(&fs::read_to_string(out.join("ablation_users_least_0.json")).unwrap()).unwrap();
    assert!(report.removed_entities.is_empty());
    assert_eq!(report.before, report.after);

    ok(&out, &["ablate", "--dataset", &data, "--kind", "users", "--direction", "most", "--n", "2"]);
    let report: AblationReport =
        serde_json::from_str(&fs::read_to_string(out.join("ablation_users_most_2.json")).unwrap()).unwrap();
    assert_eq!(report.removed_entities.len(), 2);
    let table = fs::read_to_string(out.join("ablation_users_most_2.txt")).unwrap();
    assert!(table.contains("% Difference"));
}

#[test]
fn ablate_rejects_missing_or_mismatched_report() {
    let toy = Toy::new(TOY);
    let out = toy.out("o");
    let data = toy.data();
    let missing = run(&out, &["ablate", "--dataset", &data, "--kind", "users", "--direction", "most"]);
    assert_eq!(missing.status.code(), Some(2));

    ok(&out, &["influence-items", "--dataset", &data, "--model", "svd"]);
    let wrong_kind = run(
        &out,
        &[
            "ablate",
            "--dataset",
            &data,
            "--kind",
            "users",
            "--direction",
            "most",
            "--report",
            out.join("influence_items.json").to_str().unwrap(),
        ],
    );
    assert_eq!(wrong_kind.status.code(), Some(2));

    let other = Toy::new(&TOY.replace("7\t3\t4", "7\t3\t5"));
    let wrong_data = run(&out, &["ablate", "--dataset", &other.data(), "--kind", "items", "--direction", "most"]);
    assert_eq!(wrong_data.status.code(), Some(2));
}

#[test]
fn cost_estimate_writes_projection() {
    let toy = Toy::new(TOY);
    let out = toy.out("o");
    ok(&out, &["cost-estimate", "--dataset", &toy.data(), "--model", "svd", "--entities", "3", "--workers", "2"]);
    let body = json(out.join("cost_estimate.json"));
    let est = &body["estimate"];
    assert_eq!(est["n_entities"], 3);
    assert_eq!(est["workers"], 2);
    let t = est["t_train_secs"].as_f64().unwrap();
    assert!((est["projected_secs"].as_f64().unwrap() - 1.5 * t).abs() < 1e-12);
}
