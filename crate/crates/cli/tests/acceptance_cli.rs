//! CLI-level acceptance checks: rerunning any command with identical config
//! and inputs produces byte-identical outputs, exit codes follow the
//! contract, and the full synthetic pipeline recovers the planted effect.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_slant");

fn workspace(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slant_cli_{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path) {
    let config = r#"{
  "seed": 4242,
  "out_dir": "out",
  "corpora": {
    "fnc": "out/synth/fnc.jsonl",
    "cnn": "out/synth/cnn.jsonl",
    "articles": "out/synth/articles.jsonl"
  },
  "panel": {
    "counties": "out/synth/counties.csv",
    "circulation": "out/synth/circulation.csv",
    "outlets": "out/synth/outlets.csv"
  },
  "vocab_threshold": 2,
  "k_features": 2000,
  "lambda_grid": [0.01],
  "simulate": {
    "vocab_size": 160,
    "separation": 0.3,
    "charged_count": 10,
    "charged_mass": 0.7,
    "n_snippets": 3000,
    "snippet_words": 60,
    "n_counties": 150,
    "n_outlets": 80,
    "n_states": 10,
    "max_extra_counties": 2,
    "articles_per_outlet": 120
  },
  "topics": { "k": 3, "passes": 3, "batch_size": 128, "min_doc_freq": 3, "source": "articles", "labels": "topic_labels.csv" },
  "regressions": [
    {
      "name": "tsls_main",
      "outcome": "slant",
      "treatment": "viewership_outlet_rel",
      "instruments": ["position_outlet_rel"],
      "fe": "state",
      "controls": ["demo_income", "demo_college", "demo_urban"],
      "weight": "circulation",
      "clusters": ["outlet", "county"],
      "standardize": false
    },
    {
      "name": "tsls_local",
      "outcome": "slant_local",
      "treatment": "viewership_outlet_rel",
      "instruments": ["position_outlet_rel"],
      "fe": "state",
      "controls": ["demo_income", "demo_college", "demo_urban"],
      "weight": "circulation",
      "clusters": ["outlet", "county"],
      "standardize": false
    }
  ],
  "id_check": {
    "instrument": "position_rel",
    "viewership_outcome": "viewership_rel",
    "slant_outcome": "slant",
    "demographics": ["demo_income", "demo_college", "demo_urban"],
    "fe": "state",
    "weight": "circulation",
    "clusters": ["outlet", "county"]
  },
  "binscatters": [
    { "y": "slant", "x": "position_outlet_rel", "controls": [], "fe": "state", "weight": "circulation", "bins": 16 }
  ]
}"#;
    fs::write(dir.join("slant.json"), config).unwrap();
    fs::write(
        dir.join("topic_labels.csv"),
        "topic_index,label,is_local,is_no_label\n0,crime,1,0\n1,economy,1,0\n2,no label,0,1\n",
    )
    .unwrap();
}

fn run(dir: &Path, command: &str) {
    let status = Command::new(BIN)
        .current_dir(dir)
        .args(["--config", "slant.json", command])
        .status()
        .unwrap();
    assert!(status.success(), "`slant {command}` failed in {}", dir.display());
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    fn walk(base: &Path, dir: &Path, files: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, files);
            } else {
                let rel = path.strip_prefix(base).unwrap().display().to_string();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    walk(dir, dir, &mut files);
    files
}

const STAGES: [&str; 7] =
    ["simulate", "prepare", "train", "topics", "score", "regress", "report"];

#[test]
fn criterion_12_reruns_are_byte_identical() {
    let dir = workspace("determinism");
    write_config(&dir);
    for stage in STAGES {
        run(&dir, stage);
    }
    let first = snapshot(&dir.join("out"));
    assert!(first.len() > 20, "expected a full artifact tree, got {}", first.len());
    // The locality path produced LOCAL/NONLOCAL slants and a local-outcome
    // regression column.
    let slants = String::from_utf8(first["scores/slants.csv"].clone()).unwrap();
    assert!(slants.contains("LOCAL"), "locality subsets missing:\n{slants}");
    let tables = String::from_utf8(first["tables/tables.csv"].clone()).unwrap();
    assert!(tables.contains("tsls_local"), "local-outcome spec missing");

    // Rerun every command against the same config and inputs.
    for stage in STAGES {
        run(&dir, stage);
    }
    let second = snapshot(&dir.join("out"));
    assert_eq!(first.len(), second.len());
    for (name, bytes) in &first {
        let rerun = second.get(name).unwrap_or_else(|| panic!("{name} missing after rerun"));
        assert_eq!(bytes, rerun, "{name} changed between identical runs");
    }
    println!(
        "acceptance 12 cli_determinism: PASS ({} files byte-identical across reruns)",
        first.len()
    );
}

#[test]
fn full_pipeline_recovers_planted_theta() {
    let dir = workspace("recovery");
    write_config(&dir);
    for stage in ["simulate", "prepare", "train", "topics", "score", "regress"] {
        run(&dir, stage);
    }

    // Implied effect on the measured-slant scale: θ_mixture times the score
    // gap between the held-out channel corpora.
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/synth/ground_truth.json")).unwrap())
            .unwrap();
    let theta_mixture = truth["panel"]["theta_mixture"].as_f64().unwrap();

    let selector =
        slant_core::features::read_selector(&dir.join("out/model/selector.tsv")).unwrap();
    let (model, _) = slant_core::classifier::read_model(&dir.join("out/model/model.tsv")).unwrap();
    let stopwords = slant_core::textprep::default_stopwords();
    let mean_score = |file: &str| -> f64 {
        let text = fs::read_to_string(dir.join(format!("out/synth/{file}"))).unwrap();
        let mut sum = 0.0;
        let mut n = 0.0;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let b = slant_core::textprep::snippet_bigrams(v["text"].as_str().unwrap(), &stopwords);
            let fv = slant_core::features::vectorize(&b, &selector);
            sum += slant_core::classifier::predict_proba(&model, &fv).unwrap();
            n += 1.0;
        }
        sum / n
    };
    let gap = mean_score("fnc_eval.jsonl") - mean_score("cnn_eval.jsonl");
    assert!(gap > 0.3, "measurement gap {gap}");
    let theta_implied = theta_mixture * gap;

    let tables: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/tables/tables.json")).unwrap())
            .unwrap();
    let column = &tables["columns"][0];
    assert_eq!(column["name"], "tsls_main");
    let theta = column["theta"].as_f64().unwrap();
    let se = column["se"].as_f64().unwrap();
    let kp = column["kp_f"].as_f64().unwrap();
    assert!(kp > 10.0, "first stage should be strong, KP-F {kp}");
    assert!(
        (theta - theta_implied).abs() < 1.96 * se,
        "95% CI around {theta:.4} (se {se:.4}) misses implied theta {theta_implied:.4}"
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = workspace("exit_codes");
    write_config(&dir);

    // Missing upstream artifact: validation error, exit 2, names the stage.
    let out = Command::new(BIN)
        .current_dir(&dir)
        .args(["--config", "slant.json", "train"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "train before prepare must exit 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("slant prepare"), "error should name the missing stage: {stderr}");

    // Missing config file: exit 2.
    let out = Command::new(BIN)
        .current_dir(&dir)
        .args(["--config", "nonexistent.json", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed config: exit 2.
    fs::write(dir.join("broken.json"), "{ not json").unwrap();
    let out = Command::new(BIN)
        .current_dir(&dir)
        .args(["--config", "broken.json", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Healthy command: exit 0.
    let out = Command::new(BIN)
        .current_dir(&dir)
        .args(["--config", "slant.json", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flag_overrides_take_precedence() {
    let dir = workspace("overrides");
    write_config(&dir);
    let out = Command::new(BIN)
        .current_dir(&dir)
        .args(["--config", "slant.json", "--out-dir", "alt", "--seed", "7", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("alt/synth/ground_truth.json").exists());
    assert!(!dir.join("out").exists());
}
