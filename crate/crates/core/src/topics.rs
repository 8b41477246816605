//! LDA topic modeling by online variational Bayes, topic-share inference,
//! local/non-local article classification, and topic-share covariates.
//!
//! The model follows the online VB scheme: per-batch E-steps update the
//! variational document-topic posteriors, and the topic-word parameters blend
//! in sufficient statistics at learning rate (τ₀ + t)^(−κ). Topics operate on
//! unigram stems, a separate feature space from the classifier's bigrams.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{digamma, ln_gamma};
use crate::rng;
use crate::textprep::TokenSequence;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsConfig {
    /// Topic count K.
    pub k: usize,
    pub passes: usize,
    pub batch_size: usize,
    /// Learning-rate decay κ ∈ (0.5, 1].
    pub kappa: f64,
    /// Learning-rate offset τ₀.
    pub tau0: f64,
    /// Document-topic Dirichlet prior; defaults to 1/K.
    pub alpha: Option<f64>,
    /// Topic-word Dirichlet prior; defaults to 1/K.
    pub eta: Option<f64>,
    /// Minimum document frequency for the topic vocabulary.
    pub min_doc_freq: usize,
    /// Cap on training documents (subsampled deterministically).
    pub sample_size: Option<usize>,
    /// Share of documents held out for the perplexity bound.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            k: 128,
            passes: 3,
            batch_size: 256,
            kappa: 0.7,
            tau0: 64.0,
            alpha: None,
            eta: None,
            min_doc_freq: 5,
            sample_size: None,
            holdout_fraction: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    /// Unigram-stem vocabulary, sorted.
    pub vocab: Vec<String>,
    /// K × V variational parameters, row-major.
    lambda: Vec<f64>,
}

/// Document-topic posterior mean; a probability simplex of length K.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicShares {
    pub shares: Vec<f64>,
    /// Set when the document had no in-vocabulary tokens (uniform shares).
    pub out_of_vocab: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicLabel {
    pub index: usize,
    pub label: String,
    pub is_local: bool,
    pub is_no_label: bool,
}

/// Hand-authored labels for all K topics.
#[derive(Debug, Clone)]
pub struct TopicLabelSet {
    labels: Vec<TopicLabel>,
}

impl TopicLabelSet {
    /// Labels must cover topics 0..k exactly once.
    pub fn new(mut labels: Vec<TopicLabel>, k: usize) -> Result<Self> {
        labels.sort_by_key(|l| l.index);
        if labels.len() != k || labels.iter().enumerate().any(|(i, l)| l.index != i) {
            return Err(Error::validation(format!(
                "label set must cover topics 0..{k} exactly once"
            )));
        }
        Ok(TopicLabelSet { labels })
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[TopicLabel] {
        &self.labels
    }

    pub fn is_local(&self, topic: usize) -> bool {
        self.labels[topic].is_local
    }
}

/// Outcome of training: the model plus held-out perplexities for the final
/// parameters and for the seed-matched random initialization.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: TopicModel,
    pub heldout_perplexity: f64,
    pub init_perplexity: f64,
}

/// Sorted unigram vocabulary with document frequency ≥ `min_doc_freq`.
pub fn build_topic_vocab(docs: &[TokenSequence], min_doc_freq: usize) -> Vec<String> {
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    let mut seen: Vec<&str> = Vec::new();
    for doc in docs {
        seen.clear();
        for t in &doc.tokens {
            if !seen.contains(&t.as_str()) {
                seen.push(t);
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
    }
    let mut vocab: Vec<String> = doc_freq
        .into_iter()
        .filter(|&(_, df)| df >= min_doc_freq.max(1))
        .map(|(t, _)| t.to_string())
        .collect();
    vocab.sort();
    vocab
}

/// Bag of words over the model vocabulary: (word index, count) pairs.
fn to_bow(tokens: &TokenSequence, index: &HashMap<&str, usize>) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &tokens.tokens {
        if let Some(&i) = index.get(t.as_str()) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

impl TopicModel {
    fn vocab_index(&self) -> HashMap<&str, usize> {
        self.vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }

    /// Row-stochastic topic-word matrix (posterior mean of each topic).
    pub fn topic_word(&self) -> Vec<Vec<f64>> {
        let v = self.vocab.len();
        (0..self.k)
            .map(|t| {
                let row = &self.lambda[t * v..(t + 1) * v];
                let sum: f64 = row.iter().sum();
                row.iter().map(|x| x / sum).collect()
            })
            .collect()
    }

    /// The n highest-probability words of a topic, probability-descending
    /// with lexicographic tie-break.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(String, f64)> {
        assert!(topic < self.k, "topic index out of range");
        let v = self.vocab.len();
        let row = &self.lambda[topic * v..(topic + 1) * v];
        let sum: f64 = row.iter().sum();
        let mut pairs: Vec<(usize, f64)> =
            row.iter().enumerate().map(|(i, x)| (i, x / sum)).collect();
        pairs.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).unwrap().then_with(|| self.vocab[a.0].cmp(&self.vocab[b.0]))
        });
        pairs.into_iter().take(n).map(|(i, p)| (self.vocab[i].clone(), p)).collect()
    }
}

/// exp(E[log β]) for every topic-word cell, from the current λ.
fn exp_elog_beta(lambda: &[f64], k: usize, v: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * v];
    for t in 0..k {
        let row = &lambda[t * v..(t + 1) * v];
        let psi_sum = digamma(row.iter().sum::<f64>());
        for (w, &x) in row.iter().enumerate() {
            out[t * v + w] = (digamma(x) - psi_sum).exp();
        }
    }
    out
}

/// Variational E-step for one document. Returns (γ, φ-weighted statistics
/// callback applied into sstats when provided).
fn e_step_doc(
    bow: &[(usize, f64)],
    alpha: f64,
    k: usize,
    v: usize,
    exp_elog_beta: &[f64],
    mut sstats: Option<&mut [f64]>,
) -> Vec<f64> {
    let n_d: f64 = bow.iter().map(|&(_, c)| c).sum();
    let mut gamma = vec![alpha + n_d / k as f64; k];
    let mut exp_elog_theta = vec![0.0; k];
    let update_theta = |gamma: &[f64], out: &mut [f64]| {
        let psi_sum = digamma(gamma.iter().sum::<f64>());
        for (o, &g) in out.iter_mut().zip(gamma) {
            *o = (digamma(g) - psi_sum).exp();
        }
    };
    update_theta(&gamma, &mut exp_elog_theta);

    let mut phinorm = vec![0.0; bow.len()];
    for _ in 0..100 {
        for (slot, &(w, _)) in phinorm.iter_mut().zip(bow) {
            let mut acc = 1e-100;
            for t in 0..k {
                acc += exp_elog_theta[t] * exp_elog_beta[t * v + w];
            }
            *slot = acc;
        }
        let mut change = 0.0;
        let mut new_gamma = vec![alpha; k];
        for t in 0..k {
            let mut acc = 0.0;
            for (i, &(w, c)) in bow.iter().enumerate() {
                acc += c / phinorm[i] * exp_elog_beta[t * v + w];
            }
            new_gamma[t] += exp_elog_theta[t] * acc;
            change += (new_gamma[t] - gamma[t]).abs();
        }
        gamma = new_gamma;
        update_theta(&gamma, &mut exp_elog_theta);
        if change / (k as f64) < 1e-3 {
            break;
        }
    }

    if let Some(stats) = sstats.take() {
        for (slot, &(w, _)) in phinorm.iter_mut().zip(bow) {
            let mut acc = 1e-100;
            for t in 0..k {
                acc += exp_elog_theta[t] * exp_elog_beta[t * v + w];
            }
            *slot = acc;
        }
        for t in 0..k {
            for (i, &(w, c)) in bow.iter().enumerate() {
                stats[t * v + w] += exp_elog_theta[t] * c / phinorm[i];
            }
        }
    }
    gamma
}

/// Per-word variational bound on held-out documents, exponentiated:
/// perplexity = exp(−Σ bound / Σ words). Lower is better.
fn heldout_perplexity(lambda: &[f64], alpha: f64, k: usize, v: usize, docs: &[Vec<(usize, f64)>]) -> f64 {
    let eeb = exp_elog_beta(lambda, k, v);
    // E[log β] recovered from its exp for the bound terms.
    let mut total_bound = 0.0;
    let mut total_words = 0.0;
    for bow in docs {
        if bow.is_empty() {
            continue;
        }
        let gamma = e_step_doc(bow, alpha, k, v, &eeb, None);
        let gamma_sum: f64 = gamma.iter().sum();
        let elog_theta: Vec<f64> =
            gamma.iter().map(|&g| digamma(g) - digamma(gamma_sum)).collect();
        let mut score = 0.0;
        for &(w, c) in bow {
            // log Σ_k exp(Elogθ_k + Elogβ_kw), stabilized.
            let mut max = f64::NEG_INFINITY;
            let mut terms = Vec::with_capacity(k);
            for (t, lt) in elog_theta.iter().enumerate() {
                let term = lt + eeb[t * v + w].ln();
                terms.push(term);
                if term > max {
                    max = term;
                }
            }
            let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            score += c * lse;
            total_words += c;
        }
        // E[log p(θ|α) − log q(θ|γ)].
        for t in 0..k {
            score += (alpha - gamma[t]) * elog_theta[t];
            score += ln_gamma(gamma[t]) - ln_gamma(alpha);
        }
        score += ln_gamma(alpha * k as f64) - ln_gamma(gamma_sum);
        total_bound += score;
    }
    if total_words == 0.0 {
        return f64::NAN;
    }
    (-total_bound / total_words).exp()
}

/// Train LDA by online VB. Deterministic per seed; returns the model plus
/// held-out perplexities of the trained and freshly initialized parameters.
pub fn train_lda(docs: &[TokenSequence], config: &TopicsConfig) -> Result<TrainOutcome> {
    if config.k < 1 {
        return Err(Error::validation("topic count must be at least 1"));
    }
    if docs.is_empty() {
        return Err(Error::validation("cannot train a topic model on an empty corpus"));
    }
    let vocab = build_topic_vocab(docs, config.min_doc_freq);
    if vocab.is_empty() {
        return Err(Error::validation(
            "empty topic vocabulary: lower min_doc_freq or supply more documents",
        ));
    }
    let k = config.k;
    let v = vocab.len();
    let alpha = config.alpha.unwrap_or(1.0 / k as f64);
    let eta = config.eta.unwrap_or(1.0 / k as f64);

    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut bows: Vec<Vec<(usize, f64)>> = docs.iter().map(|d| to_bow(d, &index)).collect();

    let mut order_rng = rng::stream(config.seed, "lda_order");
    bows.shuffle(&mut order_rng);
    if let Some(cap) = config.sample_size {
        bows.truncate(cap.max(1));
    }
    let n_holdout = ((bows.len() as f64 * config.holdout_fraction) as usize).clamp(1, 512);
    let n_holdout = n_holdout.min(bows.len().saturating_sub(1)).max(0);
    let heldout: Vec<Vec<(usize, f64)>> = bows.split_off(bows.len() - n_holdout.max(1));
    if bows.is_empty() {
        // Tiny corpora: train and validate on the same documents.
        bows = heldout.clone();
    }
    let d_total = bows.len();

    // Seed-matched random initialization λ ~ Gamma(100, 0.01).
    let mut init_rng = rng::stream(config.seed, "lda_init");
    let gamma_dist = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
    let mut lambda: Vec<f64> = (0..k * v).map(|_| gamma_dist.sample(&mut init_rng)).collect();
    let init_perplexity = heldout_perplexity(&lambda, alpha, k, v, &heldout);

    let mut update_count = 0.0f64;
    for _pass in 0..config.passes.max(1) {
        for batch in bows.chunks(config.batch_size.max(1)) {
            let eeb = exp_elog_beta(&lambda, k, v);
            let mut sstats = vec![0.0; k * v];
            for bow in batch {
                e_step_doc(bow, alpha, k, v, &eeb, Some(&mut sstats));
            }
            let rho = (config.tau0 + update_count).powf(-config.kappa);
            let scale = d_total as f64 / batch.len() as f64;
            for i in 0..k * v {
                let target = eta + scale * sstats[i] * eeb[i];
                lambda[i] = (1.0 - rho) * lambda[i] + rho * target;
            }
            update_count += 1.0;
        }
    }

    let heldout_perp = heldout_perplexity(&lambda, alpha, k, v, &heldout);
    Ok(TrainOutcome {
        model: TopicModel { k, alpha, eta, vocab, lambda },
        heldout_perplexity: heldout_perp,
        init_perplexity,
    })
}

/// Variational posterior-mean topic shares for one document. Documents with
/// no in-vocabulary tokens get uniform shares and a flag.
pub fn infer_shares(model: &TopicModel, tokens: &TokenSequence) -> TopicShares {
    let index = model.vocab_index();
    let eeb = exp_elog_beta(&model.lambda, model.k, model.vocab.len());
    infer_with(model, &index, &eeb, tokens)
}

fn infer_with(
    model: &TopicModel,
    index: &HashMap<&str, usize>,
    eeb: &[f64],
    tokens: &TokenSequence,
) -> TopicShares {
    let bow = to_bow(tokens, index);
    if bow.is_empty() {
        return TopicShares {
            shares: vec![1.0 / model.k as f64; model.k],
            out_of_vocab: true,
        };
    }
    let gamma = e_step_doc(&bow, model.alpha, model.k, model.vocab.len(), eeb, None);
    let sum: f64 = gamma.iter().sum();
    TopicShares { shares: gamma.iter().map(|g| g / sum).collect(), out_of_vocab: false }
}

/// Shares for many documents, computed in parallel with the expectation
/// tables built once. Output order matches input order.
pub fn infer_shares_batch(model: &TopicModel, docs: &[TokenSequence]) -> Vec<TopicShares> {
    use rayon::prelude::*;
    let index = model.vocab_index();
    let eeb = exp_elog_beta(&model.lambda, model.k, model.vocab.len());
    docs.par_iter().map(|d| infer_with(model, &index, &eeb, d)).collect()
}

/// True iff strictly more than half the topic mass sits on local topics.
pub fn classify_local(shares: &TopicShares, labels: &TopicLabelSet) -> bool {
    let local_mass: f64 = shares
        .shares
        .iter()
        .enumerate()
        .filter(|(t, _)| labels.is_local(*t))
        .map(|(_, s)| s)
        .sum();
    local_mass > 0.5
}

/// Mean topic-share vector per outlet.
pub fn topic_covariates(
    shares: &[(String, TopicShares)],
    k: usize,
) -> BTreeMap<String, Vec<f64>> {
    let mut acc: BTreeMap<String, (Vec<f64>, u64)> = BTreeMap::new();
    for (outlet, s) in shares {
        let entry = acc.entry(outlet.clone()).or_insert_with(|| (vec![0.0; k], 0));
        for (slot, v) in entry.0.iter_mut().zip(&s.shares) {
            *slot += v;
        }
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|(outlet, (sums, n))| (outlet, sums.iter().map(|s| s / n as f64).collect()))
        .collect()
}

/// Model file: header lines, a vocabulary line, then one tab-separated λ row
/// per topic.
pub fn write_topic_model(path: &Path, model: &TopicModel) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# k={}", model.k).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# alpha={}", model.alpha).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# eta={}", model.eta).map_err(|e| Error::io(path, e))?;
    writeln!(f, "{}", model.vocab.join("\t")).map_err(|e| Error::io(path, e))?;
    let v = model.vocab.len();
    for t in 0..model.k {
        let row: Vec<String> =
            model.lambda[t * v..(t + 1) * v].iter().map(|x| format!("{x}")).collect();
        writeln!(f, "{}", row.join("\t")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_topic_model(path: &Path) -> Result<TopicModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header: HashMap<String, f64> = HashMap::new();
    let mut vocab: Option<Vec<String>> = None;
    let mut lambda: Vec<f64> = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((key, value)) = rest.split_once('=') {
                header.insert(
                    key.to_string(),
                    value.parse().map_err(|_| Error::validation("bad model header"))?,
                );
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if vocab.is_none() {
            vocab = Some(line.split('\t').map(str::to_string).collect());
            continue;
        }
        for field in line.split('\t') {
            lambda.push(
                field
                    .parse()
                    .map_err(|_| Error::validation(format!("bad lambda value {field:?}")))?,
            );
        }
    }
    let vocab = vocab.ok_or_else(|| Error::validation("model file lacks a vocabulary line"))?;
    let k = *header.get("k").ok_or_else(|| Error::validation("model file lacks k"))? as usize;
    if lambda.len() != k * vocab.len() {
        return Err(Error::validation("lambda shape does not match k × vocabulary"));
    }
    Ok(TopicModel {
        k,
        alpha: *header.get("alpha").unwrap_or(&(1.0 / k as f64)),
        eta: *header.get("eta").unwrap_or(&(1.0 / k as f64)),
        vocab,
        lambda,
    })
}

/// Labels file: "topic_index,label,is_local,is_no_label" CSV.
pub fn read_topic_labels(path: &Path, k: usize) -> Result<TopicLabelSet> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let parse_flag = |s: &str| matches!(s.trim(), "1" | "true" | "TRUE");
        labels.push(TopicLabel {
            index: record
                .get(0)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::validation("bad topic index"))?,
            label: record.get(1).unwrap_or("").trim().to_string(),
            is_local: parse_flag(record.get(2).unwrap_or("")),
            is_no_label: parse_flag(record.get(3).unwrap_or("")),
        });
    }
    TopicLabelSet::new(labels, k)
}

pub fn write_topic_labels(path: &Path, labels: &TopicLabelSet) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "topic_index,label,is_local,is_no_label").map_err(|e| Error::io(path, e))?;
    for l in labels.labels() {
        writeln!(
            f,
            "{},{},{},{}",
            l.index,
            l.label,
            l.is_local as u8,
            l.is_no_label as u8
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
