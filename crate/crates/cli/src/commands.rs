//! The seven pipeline stages. Every command reads the shared config, writes
//! its artifacts under a stage directory, and drops a run manifest hashing
//! the config and each input file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use slant_core::classifier::{self, TrainConfig};
use slant_core::corpus::{self, Snippet, Source};
use slant_core::econ::{self, LanguageFeatures, PanelBuildInputs, RegressionSpec};
use slant_core::features;
use slant_core::manifest::RunManifest;
use slant_core::report as core_report;
use slant_core::scoring::{self, SlantSubset};
use slant_core::synth;
use slant_core::textprep;
use slant_core::topics;

use crate::config::{require_artifact, PipelineConfig, TopicsSource};
use crate::errors::invalid;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_manifest(dir: &Path, mut manifest: RunManifest, inputs: &[&Path]) -> Result<()> {
    for path in inputs {
        manifest.add_input(path)?;
    }
    fs::write(dir.join("manifest.json"), manifest.to_json())
        .with_context(|| format!("cannot write manifest in {}", dir.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// prepare

pub fn prepare(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let dir = config.prepared_dir();
    ensure_dir(&dir)?;
    let mut inputs: Vec<PathBuf> = Vec::new();

    let fnc_path = config.corpora.fnc.as_ref().ok_or_else(|| invalid("config lacks corpora.fnc"))?;
    let cnn_path = config.corpora.cnn.as_ref().ok_or_else(|| invalid("config lacks corpora.cnn"))?;
    let fnc = corpus::load_labeled_corpus(fnc_path, Source::Fnc)?;
    let cnn = corpus::load_labeled_corpus(cnn_path, Source::CnnMsnbc)?;
    inputs.push(fnc_path.clone());
    inputs.push(cnn_path.clone());
    if fnc.skipped + cnn.skipped > 0 {
        eprintln!("prepare: skipped {} malformed transcript lines", fnc.skipped + cnn.skipped);
    }

    let mut labeled = corpus::segment_corpus(&fnc.documents, config.segmentation_window);
    labeled.extend(corpus::segment_corpus(&cnn.documents, config.segmentation_window));
    let balanced = corpus::balance_sample(&labeled, config.seed)?;
    corpus::write_snippets(&dir.join("labeled.jsonl"), &balanced)?;
    println!(
        "prepare: {} labeled snippets balanced to {}",
        labeled.len(),
        balanced.len()
    );

    if let Some(articles_path) = &config.corpora.articles {
        let articles = corpus::load_labeled_corpus(articles_path, Source::Newspaper)?;
        inputs.push(articles_path.clone());
        if articles.skipped > 0 {
            eprintln!("prepare: skipped {} malformed article lines", articles.skipped);
        }
        let snippets = corpus::segment_corpus(&articles.documents, config.segmentation_window);
        corpus::write_snippets(&dir.join("articles.jsonl"), &snippets)?;
        println!("prepare: {} article snippets", snippets.len());
    }

    let manifest = RunManifest::new("prepare", config_bytes);
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&dir, manifest, &input_refs)
}

// ---------------------------------------------------------------------------
// train

#[derive(Serialize)]
struct TrainSummary {
    train_size: usize,
    test_size: usize,
    vocabulary_size: usize,
    k: usize,
    best_lambda: f64,
    cv_mean_accuracy: Vec<(f64, f64)>,
    test_accuracy: f64,
    fold_accuracy_sd: Option<f64>,
    degenerate_features: usize,
    selector_hash: String,
    converged: bool,
}

pub fn train(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let prepared = config.prepared_dir().join("labeled.jsonl");
    require_artifact(&prepared, "prepare")?;
    let dir = config.model_dir();
    ensure_dir(&dir)?;

    let stopwords = config.stopword_set()?;
    let snippets = corpus::read_snippets(&prepared)?;
    let labels: Vec<bool> = snippets
        .iter()
        .map(|s| s.label.ok_or_else(|| invalid(format!("snippet {} lacks a label", s.snippet_id()))))
        .collect::<Result<_>>()?;
    let bigrams: Vec<_> =
        snippets.iter().map(|s| textprep::snippet_bigrams(&s.text, &stopwords)).collect();

    // Stratified train/test split.
    let (train_idx, test_idx) =
        corpus::stratified_split(&labels, config.train_fraction, config.seed);
    let take = |idx: &[usize]| -> (Vec<_>, Vec<bool>) {
        (
            idx.iter().map(|&i| bigrams[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (train_bigrams, train_labels) = take(&train_idx);
    let (test_bigrams, test_labels) = take(&test_idx);

    // Vocabulary over the full labeled corpus; selection and scaling on the
    // training split only.
    let fnc_seqs: Vec<_> = bigrams
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l)
        .map(|(b, _)| b.clone())
        .collect();
    let cnn_seqs: Vec<_> = bigrams
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| !l)
        .map(|(b, _)| b.clone())
        .collect();
    let vocab = features::build_vocabulary(&fnc_seqs, &cnn_seqs, config.vocab_threshold)?;

    let scores =
        features::chi2_scores(&train_bigrams, &train_labels, &vocab, config.chi2_mode.into())?;
    let k = config.k_features.min(vocab.len());
    if k < config.k_features {
        eprintln!("train: k clamped to vocabulary size {k}");
    }
    let mut selector = features::select_top_k(&vocab, &scores, k)?;
    let scaler_report = features::fit_scaler(&mut selector, &train_bigrams)?;
    if !scaler_report.degenerate.is_empty() {
        eprintln!("train: {} zero-variance features got scale 1", scaler_report.degenerate.len());
    }

    let x_train: Vec<_> = train_bigrams.iter().map(|b| features::vectorize(b, &selector)).collect();
    let x_test: Vec<_> = test_bigrams.iter().map(|b| features::vectorize(b, &selector)).collect();

    let base = TrainConfig {
        penalty: config.penalty,
        fit_intercept: config.fit_intercept,
        ..TrainConfig::default()
    };
    let (best_lambda, cv_mean, fold_accs) = if config.lambda_grid.len() > 1 {
        let cv = classifier::cross_validate(
            &x_train,
            &train_labels,
            k,
            &config.lambda_grid,
            config.folds,
            config.seed,
            &base,
        )?;
        let winner = cv.mean_accuracy.iter().position(|&(l, _)| l == cv.best_lambda).unwrap_or(0);
        (cv.best_lambda, cv.mean_accuracy.clone(), Some(cv.fold_accuracies[winner].clone()))
    } else {
        (config.lambda_grid.first().copied().unwrap_or(2.0), Vec::new(), None)
    };

    let model = classifier::train(
        &x_train,
        &train_labels,
        k,
        &TrainConfig { lambda: best_lambda, ..base },
    )?;
    let mut eval = classifier::evaluate(&model, &x_test, &test_labels)?;
    if let Some(accs) = &fold_accs {
        eval.fold_accuracies = accs.clone();
    }

    let corpus_hash = |want: bool| -> u64 {
        let mut bytes = Vec::new();
        for (s, &l) in snippets.iter().zip(&labels) {
            if l == want {
                bytes.extend_from_slice(s.text.as_bytes());
                bytes.push(b'\n');
            }
        }
        slant_core::manifest::fnv1a64(&bytes)
    };
    features::write_selector(
        &dir.join("selector.tsv"),
        &selector,
        (corpus_hash(true), corpus_hash(false)),
    )?;
    classifier::write_model(&dir.join("model.tsv"), &model, &selector)?;
    write_json(&dir.join("eval.json"), &eval)?;
    core_report::write_calibration_csv(&dir.join("calibration.csv"), &eval)?;
    core_report::write_confusion_csv(&dir.join("confusion.csv"), &eval)?;
    core_report::write_distinctive_bigrams_csv(
        &dir.join("distinctive_bigrams.csv"),
        &model,
        &selector,
        100,
    )?;

    let fold_sd = fold_accs.as_ref().map(|a| slant_core::math::sample_sd(a));
    let summary = TrainSummary {
        train_size: train_idx.len(),
        test_size: test_idx.len(),
        vocabulary_size: vocab.len(),
        k,
        best_lambda,
        cv_mean_accuracy: cv_mean,
        test_accuracy: eval.accuracy,
        fold_accuracy_sd: fold_sd,
        degenerate_features: scaler_report.degenerate.len(),
        selector_hash: format!("{:016x}", selector.hash()),
        converged: model.converged,
    };
    write_json(&dir.join("train_summary.json"), &summary)?;
    println!(
        "train: |V|={} k={k} lambda={best_lambda} test accuracy {:.3}",
        vocab.len(),
        eval.accuracy
    );

    let manifest = RunManifest::new("train", config_bytes);
    write_manifest(&dir, manifest, &[&prepared])
}

// ---------------------------------------------------------------------------
// score

pub fn score(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let articles_path = config.prepared_dir().join("articles.jsonl");
    let selector_path = config.model_dir().join("selector.tsv");
    let model_path = config.model_dir().join("model.tsv");
    require_artifact(&articles_path, "prepare")?;
    require_artifact(&selector_path, "train")?;
    require_artifact(&model_path, "train")?;
    let dir = config.scores_dir();
    ensure_dir(&dir)?;

    let stopwords = config.stopword_set()?;
    let selector = features::read_selector(&selector_path)?;
    let (model, _) = classifier::read_model(&model_path)?;
    if model.selector_hash != selector.hash() {
        return Err(invalid("model and selector files disagree; retrain"));
    }
    let snippets = corpus::read_snippets(&articles_path)?;

    let mut scores = scoring::score_corpus(&model, &selector, &snippets, &stopwords)?;

    // Locality tags when a topic model and labels are available.
    let topics_model_path = config.topics_dir().join("topics.tsv");
    let labels_path = config.topics_dir().join("labels.csv");
    let mut shares_by_outlet: Vec<(String, topics::TopicShares)> = Vec::new();
    let mut topic_inputs: Vec<PathBuf> = Vec::new();
    if topics_model_path.exists() {
        let model = topics::read_topic_model(&topics_model_path)?;
        topic_inputs.push(topics_model_path.clone());
        let labels = if labels_path.exists() {
            topic_inputs.push(labels_path.clone());
            Some(topics::read_topic_labels(&labels_path, model.k)?)
        } else {
            None
        };
        let stems: Vec<_> =
            snippets.iter().map(|s| textprep::snippet_stems(&s.text, &stopwords)).collect();
        let all_shares = topics::infer_shares_batch(&model, &stems);
        for (score, shares) in scores.iter_mut().zip(all_shares) {
            if let Some(labels) = &labels {
                score.is_local = Some(topics::classify_local(&shares, labels));
            }
            if let Some(outlet) = &score.outlet_id {
                shares_by_outlet.push((outlet.clone(), shares.clone()));
            }
            score.topic_shares = Some(shares.shares);
        }
        if !shares_by_outlet.is_empty() {
            let covariates = topics::topic_covariates(&shares_by_outlet, model.k);
            write_topic_share_csv(&dir.join("topic_shares.csv"), &covariates)?;
        }
    }

    scoring::write_scores_csv(&dir.join("scores.csv"), &scores)?;
    let mut slants = Vec::new();
    let (all, warnings) = scoring::aggregate_slant(&scores, SlantSubset::All)?;
    for w in &warnings {
        eprintln!("score: {w}");
    }
    slants.extend(all);
    if scores.iter().any(|s| s.is_local.is_some()) {
        for subset in [SlantSubset::Local, SlantSubset::NonLocal] {
            let (records, warnings) = scoring::aggregate_slant(&scores, subset)?;
            for w in &warnings {
                eprintln!("score: {w}");
            }
            slants.extend(records);
        }
    }
    scoring::write_slants_csv(&dir.join("slants.csv"), &slants)?;

    if let Some(circ_path) = &config.panel.circulation {
        if circ_path.exists() {
            let links = corpus::load_circulation(circ_path)?;
            let all_records: Vec<_> = slants
                .iter()
                .filter(|r| r.subset == SlantSubset::All)
                .cloned()
                .collect();
            let (county, warnings) = scoring::county_slant(&all_records, &links);
            for w in &warnings {
                eprintln!("score: {w}");
            }
            let mut out = String::from("county_id,slant,total_circulation\n");
            for c in &county {
                out.push_str(&format!("{},{},{}\n", c.county_id, c.slant, c.total_circulation));
            }
            fs::write(dir.join("county_slant.csv"), out)?;
        }
    }

    write_language_csv(&dir.join("language.csv"), &snippets)?;
    println!("score: {} snippets across {} outlets", scores.len(), {
        let outlets: HashSet<_> = scores.iter().filter_map(|s| s.outlet_id.as_deref()).collect();
        outlets.len()
    });

    let manifest = RunManifest::new("score", config_bytes);
    let mut input_refs: Vec<&Path> = vec![&articles_path, &selector_path, &model_path];
    input_refs.extend(topic_inputs.iter().map(PathBuf::as_path));
    write_manifest(&dir, manifest, &input_refs)
}

fn write_topic_share_csv(path: &Path, covariates: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    let k = covariates.values().next().map(Vec::len).unwrap_or(0);
    let mut out = String::from("outlet_id");
    for t in 0..k {
        out.push_str(&format!(",topic_share_{t:03}"));
    }
    out.push('\n');
    for (outlet, shares) in covariates {
        out.push_str(outlet);
        for s in shares {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generic language features per outlet, computed on the raw snippet text:
/// type/token ratio, mean word length, words per sentence, words per article.
fn write_language_csv(path: &Path, snippets: &[Snippet]) -> Result<()> {
    struct Acc {
        words: f64,
        chars: f64,
        sentences: f64,
        articles: f64,
        types: HashSet<String>,
    }
    let mut by_outlet: BTreeMap<String, Acc> = BTreeMap::new();
    for s in snippets {
        let Some(outlet) = &s.outlet_id else { continue };
        let acc = by_outlet.entry(outlet.clone()).or_insert_with(|| Acc {
            words: 0.0,
            chars: 0.0,
            sentences: 0.0,
            articles: 0.0,
            types: HashSet::new(),
        });
        acc.articles += 1.0;
        acc.sentences += s.text.matches(['.', '!', '?']).count().max(1) as f64;
        for w in s.text.split_whitespace() {
            acc.words += 1.0;
            acc.chars += w.chars().count() as f64;
            acc.types.insert(w.to_lowercase());
        }
    }
    let mut out = String::from(
        "outlet_id,lang_vocab_size,lang_word_length,lang_sentence_length,lang_article_length\n",
    );
    for (outlet, acc) in &by_outlet {
        if acc.words == 0.0 {
            continue;
        }
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            outlet,
            acc.types.len() as f64 / acc.words,
            acc.chars / acc.words,
            acc.words / acc.sentences,
            acc.words / acc.articles,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// topics

pub fn cmd_topics(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let source_path = match config.topics.source {
        TopicsSource::Articles => config.prepared_dir().join("articles.jsonl"),
        TopicsSource::Transcripts => config.prepared_dir().join("labeled.jsonl"),
    };
    require_artifact(&source_path, "prepare")?;
    let dir = config.topics_dir();
    ensure_dir(&dir)?;

    let stopwords = config.stopword_set()?;
    let snippets = corpus::read_snippets(&source_path)?;
    let docs: Vec<_> =
        snippets.iter().map(|s| textprep::snippet_stems(&s.text, &stopwords)).collect();
    let mut tc = config.topics.config.clone();
    if tc.seed == 0 {
        tc.seed = config.seed;
    }
    let outcome = topics::train_lda(&docs, &tc)?;
    topics::write_topic_model(&dir.join("topics.tsv"), &outcome.model)?;

    let mut top_words = String::from("topic,rank,word,probability\n");
    for t in 0..outcome.model.k {
        for (rank, (word, p)) in outcome.model.top_words(t, 10).iter().enumerate() {
            top_words.push_str(&format!("{t},{},{word},{p}\n", rank + 1));
        }
    }
    fs::write(dir.join("top_words.csv"), top_words)?;

    #[derive(Serialize)]
    struct Perplexity {
        heldout: f64,
        random_init: f64,
    }
    write_json(
        &dir.join("perplexity.json"),
        &Perplexity { heldout: outcome.heldout_perplexity, random_init: outcome.init_perplexity },
    )?;

    let mut inputs: Vec<PathBuf> = vec![source_path.clone()];
    if let Some(labels_path) = &config.topics.labels {
        let labels = topics::read_topic_labels(labels_path, outcome.model.k)?;
        topics::write_topic_labels(&dir.join("labels.csv"), &labels)?;
        inputs.push(labels_path.clone());
    }
    println!(
        "topics: K={} vocabulary {} heldout perplexity {:.1} (random init {:.1})",
        outcome.model.k,
        outcome.model.vocab.len(),
        outcome.heldout_perplexity,
        outcome.init_perplexity
    );

    let manifest = RunManifest::new("topics", config_bytes);
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&dir, manifest, &input_refs)
}

// ---------------------------------------------------------------------------
// regress

fn load_panel_rows(config: &PipelineConfig) -> Result<(Vec<econ::PanelRow>, Vec<PathBuf>)> {
    let counties_path =
        config.panel.counties.as_ref().ok_or_else(|| invalid("config lacks panel.counties"))?;
    let circulation_path = config
        .panel
        .circulation
        .as_ref()
        .ok_or_else(|| invalid("config lacks panel.circulation"))?;
    let outlets_path =
        config.panel.outlets.as_ref().ok_or_else(|| invalid("config lacks panel.outlets"))?;
    let slants_path = config.scores_dir().join("slants.csv");
    require_artifact(&slants_path, "score")?;

    let (counties, links, outlets) =
        corpus::load_panel_inputs(counties_path, circulation_path, outlets_path)?;
    let slants = scoring::read_slants_csv(&slants_path)?;

    let language_path = config.scores_dir().join("language.csv");
    let language = if language_path.exists() { Some(read_language_csv(&language_path)?) } else { None };
    let shares_path = config.scores_dir().join("topic_shares.csv");
    let topic_shares =
        if shares_path.exists() { Some(read_topic_share_csv(&shares_path)?) } else { None };

    let inputs = PanelBuildInputs {
        counties: &counties,
        links: &links,
        outlets: &outlets,
        slants: &slants,
        language: language.as_ref(),
        topic_shares: topic_shares.as_ref(),
    };
    let (rows, warnings) = econ::build_panel(&inputs)?;
    for w in &warnings {
        eprintln!("regress: {w}");
    }
    let mut input_paths =
        vec![counties_path.clone(), circulation_path.clone(), outlets_path.clone(), slants_path];
    if language.is_some() {
        input_paths.push(language_path);
    }
    if topic_shares.is_some() {
        input_paths.push(shares_path);
    }
    Ok((rows, input_paths))
}

fn read_language_csv(path: &Path) -> Result<BTreeMap<String, LanguageFeatures>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(invalid(format!("{}: bad language row {line:?}", path.display())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| invalid(format!("{}: bad number {:?}", path.display(), fields[i])))
        };
        out.insert(
            fields[0].to_string(),
            LanguageFeatures {
                vocab_size: num(1)?,
                word_length: num(2)?,
                sentence_length: num(3)?,
                article_length: num(4)?,
            },
        );
    }
    Ok(out)
}

fn read_topic_share_csv(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let outlet = fields.next().unwrap_or("").to_string();
        let shares: Vec<f64> = fields.map(|f| f.parse().unwrap_or(f64::NAN)).collect();
        out.insert(outlet, shares);
    }
    Ok(out)
}

fn default_regressions() -> Vec<RegressionSpec> {
    let base = RegressionSpec {
        name: "tsls_main".into(),
        instruments: vec!["position_rel".into()],
        ..RegressionSpec::default()
    };
    vec![
        base.clone(),
        RegressionSpec { name: "ols_main".into(), instruments: vec![], ..base.clone() },
        RegressionSpec {
            name: "reduced_form".into(),
            treatment: "position_rel".into(),
            instruments: vec![],
            ..base.clone()
        },
        RegressionSpec {
            name: "first_stage".into(),
            outcome: "viewership_rel".into(),
            treatment: "position_rel".into(),
            instruments: vec![],
            ..base
        },
    ]
}

pub fn regress(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let dir = config.tables_dir();
    ensure_dir(&dir)?;
    let (rows, input_paths) = load_panel_rows(config)?;

    let specs = if config.regressions.is_empty() {
        default_regressions()
    } else {
        config.regressions.clone()
    };
    let report = econ::run_table(&specs, &rows)?;
    report.write_csv(&dir.join("tables.csv"))?;
    report.write_json(&dir.join("tables.json"))?;
    for c in &report.columns {
        let kp = c.kp_f.map(|f| format!(" KP-F {f:.1}")).unwrap_or_default();
        println!("regress: {} theta {:.4} (se {:.4}){} n {}", c.name, c.theta, c.se, kp, c.n);
    }

    if let Some(id_spec) = &config.id_check {
        let outcome = econ::identification_check(&rows, id_spec)?;
        write_json(&dir.join("id_check.json"), &outcome)?;
        println!(
            "regress: identification check t-stats {:.2} (viewership) {:.2} (slant)",
            outcome.viewership.theta_t().unwrap_or(f64::NAN),
            outcome.slant.theta_t().unwrap_or(f64::NAN)
        );
    }

    let manifest = RunManifest::new("regress", config_bytes);
    let input_refs: Vec<&Path> = input_paths.iter().map(PathBuf::as_path).collect();
    write_manifest(&dir, manifest, &input_refs)
}

// ---------------------------------------------------------------------------
// simulate

pub fn simulate(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let dir = config.synth_dir();
    ensure_dir(&dir)?;
    let mut sc = config.simulate.clone();
    if sc.seed == 0 {
        sc.seed = config.seed;
    }

    // Oversample the channel corpora, then split off an evaluation share so
    // the measurement gap can be estimated on unseen text.
    let eval_fraction = 0.2;
    let mut gen_config = sc.clone();
    gen_config.n_snippets = ((sc.n_snippets as f64) * (1.0 + eval_fraction)) as usize;
    let (snippets, channel_truth) = synth::gen_channel_corpora(&gen_config)?;
    let (fnc, cnn): (Vec<_>, Vec<_>) =
        snippets.into_iter().partition(|s| s.label == Some(true));
    let cut_fnc = ((fnc.len() as f64) / (1.0 + eval_fraction)).round() as usize;
    let cut_cnn = ((cnn.len() as f64) / (1.0 + eval_fraction)).round() as usize;
    synth::write_corpus_jsonl(
        &dir.join("fnc.jsonl"),
        &synth::snippets_as_documents(&fnc[..cut_fnc]),
    )?;
    synth::write_corpus_jsonl(
        &dir.join("cnn.jsonl"),
        &synth::snippets_as_documents(&cnn[..cut_cnn]),
    )?;
    synth::write_corpus_jsonl(
        &dir.join("fnc_eval.jsonl"),
        &synth::snippets_as_documents(&fnc[cut_fnc..]),
    )?;
    synth::write_corpus_jsonl(
        &dir.join("cnn_eval.jsonl"),
        &synth::snippets_as_documents(&cnn[cut_cnn..]),
    )?;

    let panel = synth::gen_panel(&sc)?;
    synth::write_corpus_jsonl(&dir.join("articles.jsonl"), &panel.articles)?;
    synth::write_panel_files(&dir, &panel)?;

    #[derive(Serialize)]
    struct GroundTruthFile<'a> {
        channel: &'a synth::ChannelTruth,
        panel: &'a synth::PanelTruth,
        config: &'a synth::SynthConfig,
    }
    write_json(
        &dir.join("ground_truth.json"),
        &GroundTruthFile { channel: &channel_truth, panel: &panel.truth, config: &sc },
    )?;
    println!(
        "simulate: {} labeled + {} eval snippets, {} articles, {} panel rows (bayes rate {:.3})",
        cut_fnc + cut_cnn,
        fnc.len() - cut_fnc + cnn.len() - cut_cnn,
        panel.articles.len(),
        panel.rows.len(),
        channel_truth.bayes_rate
    );

    let manifest = RunManifest::new("simulate", config_bytes);
    write_manifest(&dir, manifest, &[])
}

// ---------------------------------------------------------------------------
// report

pub fn report(config: &PipelineConfig, config_bytes: &[u8]) -> Result<()> {
    let dir = config.report_dir();
    ensure_dir(&dir)?;
    let mut inputs: Vec<PathBuf> = Vec::new();

    // Classifier-side artifacts.
    let eval_path = config.model_dir().join("eval.json");
    if eval_path.exists() {
        let eval: classifier::EvalReport =
            serde_json::from_str(&fs::read_to_string(&eval_path)?)?;
        core_report::write_calibration_csv(&dir.join("calibration.csv"), &eval)?;
        core_report::write_confusion_csv(&dir.join("confusion.csv"), &eval)?;
        inputs.push(eval_path);

        let selector_path = config.model_dir().join("selector.tsv");
        let model_path = config.model_dir().join("model.tsv");
        if selector_path.exists() && model_path.exists() {
            let selector = features::read_selector(&selector_path)?;
            let (model, _) = classifier::read_model(&model_path)?;
            core_report::write_distinctive_bigrams_csv(
                &dir.join("distinctive_bigrams.csv"),
                &model,
                &selector,
                100,
            )?;
            inputs.push(selector_path);
            inputs.push(model_path);
        }
    }

    // Panel-side binscatters.
    if config.panel.counties.is_some() && config.scores_dir().join("slants.csv").exists() {
        let (rows, panel_inputs) = load_panel_rows(config)?;
        inputs.extend(panel_inputs);
        for section in &config.binscatters {
            let scatter = core_report::binscatter(
                &rows,
                &section.y,
                &section.x,
                &section.controls,
                section.fe.as_deref(),
                section.weight.as_deref(),
                section.bins,
            )?;
            let name = format!("binscatter_{}_{}.csv", section.y, section.x);
            core_report::write_binscatter_csv(&dir.join(name), &scatter)?;
        }
    }

    if inputs.is_empty() {
        return Err(invalid(
            "nothing to report: run `slant train` (calibration) or `slant score` (binscatters) first",
        ));
    }
    println!("report: wrote {} artifact sets", inputs.len());
    let manifest = RunManifest::new("report", config_bytes);
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(&dir, manifest, &input_refs)
}
