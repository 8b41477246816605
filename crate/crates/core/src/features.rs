//! Bigram vocabulary construction, χ² feature selection, variance scaling,
//! and sparse vectorization.
//!
//! The vocabulary keeps exactly the bigrams appearing strictly more than
//! `threshold` times in *both* labeled corpora. The top-k bigrams by χ² for
//! the class label become the feature set; each is scaled by the reciprocal
//! of its training-set standard deviation (variance one, mean left in place
//! to preserve sparsity). All orderings are lexicographic-deterministic and
//! never depend on hash iteration order.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifest::fnv1a64;
use crate::textprep::BigramSequence;

/// The intersected bigram set V with per-corpus frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    /// bigram → (freq in FNC corpus, freq in CNN/MSNBC corpus); BTreeMap so
    /// iteration order is lexicographic.
    map: BTreeMap<String, (u64, u64)>,
    threshold: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn contains(&self, bigram: &str) -> bool {
        self.map.contains_key(bigram)
    }

    pub fn frequencies(&self, bigram: &str) -> Option<(u64, u64)> {
        self.map.get(bigram).copied()
    }

    /// Bigrams in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, (u64, u64))> {
        self.map.iter().map(|(b, &f)| (b.as_str(), f))
    }
}

fn count_bigrams(corpus: &[BigramSequence]) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for seq in corpus {
        for b in &seq.bigrams {
            *counts.entry(b.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Intersect the corpus vocabularies: keep bigrams with total occurrence
/// count strictly greater than `threshold` in both corpora.
pub fn build_vocabulary(
    fnc: &[BigramSequence],
    cnn: &[BigramSequence],
    threshold: u64,
) -> Result<Vocabulary> {
    if fnc.is_empty() || cnn.is_empty() {
        return Err(Error::validation("both corpora must be nonempty to build a vocabulary"));
    }
    let fnc_counts = count_bigrams(fnc);
    let cnn_counts = count_bigrams(cnn);
    let mut map = BTreeMap::new();
    for (bigram, &f_fnc) in &fnc_counts {
        if f_fnc <= threshold {
            continue;
        }
        if let Some(&f_cnn) = cnn_counts.get(bigram) {
            if f_cnn > threshold {
                map.insert(bigram.clone(), (f_fnc, f_cnn));
            }
        }
    }
    if map.is_empty() {
        return Err(Error::validation(format!(
            "vocabulary unusable: no bigram exceeds {threshold} occurrences in both corpora"
        )));
    }
    Ok(Vocabulary { map, threshold })
}

/// Whether χ² counts raw occurrences or per-snippet presence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Chi2Mode {
    #[default]
    Counts,
    Presence,
}

/// Per-feature χ² score for the binary label, aligned with the vocabulary's
/// lexicographic order.
///
/// For feature totals O_c per class c, expected E_c = total × (class snippet
/// share); χ² = Σ_c (O_c − E_c)²/E_c. Features absent everywhere score 0.
pub fn chi2_scores(
    snippets: &[BigramSequence],
    labels: &[bool],
    vocab: &Vocabulary,
    mode: Chi2Mode,
) -> Result<Vec<f64>> {
    if snippets.len() != labels.len() {
        return Err(Error::validation("snippets and labels must have equal length"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("chi2 requires both classes present"));
    }

    let index: HashMap<&str, usize> =
        vocab.map.keys().enumerate().map(|(i, b)| (b.as_str(), i)).collect();
    let mut pos_totals = vec![0u64; vocab.len()];
    let mut neg_totals = vec![0u64; vocab.len()];
    let mut scratch: HashMap<usize, u64> = HashMap::new();
    for (seq, &label) in snippets.iter().zip(labels) {
        match mode {
            Chi2Mode::Counts => {
                for b in &seq.bigrams {
                    if let Some(&i) = index.get(b.as_str()) {
                        if label {
                            pos_totals[i] += 1;
                        } else {
                            neg_totals[i] += 1;
                        }
                    }
                }
            }
            Chi2Mode::Presence => {
                scratch.clear();
                for b in &seq.bigrams {
                    if let Some(&i) = index.get(b.as_str()) {
                        scratch.insert(i, 1);
                    }
                }
                for (&i, _) in scratch.iter() {
                    if label {
                        pos_totals[i] += 1;
                    } else {
                        neg_totals[i] += 1;
                    }
                }
            }
        }
    }

    let share_pos = n_pos as f64 / labels.len() as f64;
    let share_neg = n_neg as f64 / labels.len() as f64;
    let scores = pos_totals
        .iter()
        .zip(&neg_totals)
        .map(|(&o_pos, &o_neg)| {
            let total = (o_pos + o_neg) as f64;
            if total == 0.0 {
                return 0.0;
            }
            let e_pos = total * share_pos;
            let e_neg = total * share_neg;
            (o_pos as f64 - e_pos).powi(2) / e_pos + (o_neg as f64 - e_neg).powi(2) / e_neg
        })
        .collect();
    Ok(scores)
}

/// The selected and scaled feature set S.
#[derive(Debug, Clone)]
pub struct FeatureSelector {
    /// Bigrams ordered by non-increasing χ², ties broken lexicographically.
    selected: Vec<String>,
    chi2: Vec<f64>,
    /// Reciprocal training-set standard deviation per feature; empty until
    /// [`fit_scaler`] runs.
    scale: Vec<f64>,
    index: HashMap<String, u32>,
    threshold: u64,
}

impl FeatureSelector {
    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self) -> &[String] {
        &self.selected
    }

    pub fn chi2(&self) -> &[f64] {
        &self.chi2
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn is_fitted(&self) -> bool {
        !self.scale.is_empty()
    }

    pub fn feature_index(&self, bigram: &str) -> Option<u32> {
        self.index.get(bigram).copied()
    }

    /// Content fingerprint covering features, scores, and scales. Models and
    /// vectors stamped with this hash are mutually compatible.
    pub fn hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for ((b, c), s) in self
            .selected
            .iter()
            .zip(&self.chi2)
            .zip(self.scale.iter().chain(std::iter::repeat(&f64::NAN)))
        {
            bytes.extend_from_slice(b.as_bytes());
            bytes.push(b'\t');
            bytes.extend_from_slice(&c.to_bits().to_le_bytes());
            bytes.extend_from_slice(&s.to_bits().to_le_bytes());
            bytes.push(b'\n');
        }
        fnv1a64(&bytes)
    }
}

/// Select the k highest-χ² features. Ties break toward the lexicographically
/// smaller bigram so selection is deterministic.
pub fn select_top_k(vocab: &Vocabulary, scores: &[f64], k: usize) -> Result<FeatureSelector> {
    if k == 0 || k > vocab.len() {
        return Err(Error::validation(format!(
            "k must lie in 1..={} (vocabulary size), got {k}",
            vocab.len()
        )));
    }
    if scores.len() != vocab.len() {
        return Err(Error::validation("scores must align with the vocabulary"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let bigrams: Vec<&String> = vocab.map.keys().collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap().then_with(|| bigrams[a].cmp(bigrams[b]))
    });
    order.truncate(k);
    let selected: Vec<String> = order.iter().map(|&i| bigrams[i].clone()).collect();
    let chi2: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let index = selected.iter().enumerate().map(|(i, b)| (b.clone(), i as u32)).collect();
    Ok(FeatureSelector { selected, chi2, scale: Vec::new(), index, threshold: vocab.threshold })
}

/// Outcome of fitting the variance scaler.
#[derive(Debug, Clone, Default)]
pub struct ScalerReport {
    /// Features with zero training variance (scale forced to 1).
    pub degenerate: Vec<String>,
}

/// Fit per-feature scales 1/sd on the training snippets, population formula
/// (divisor M*). Zero-variance features get scale 1 and a warning entry.
pub fn fit_scaler(
    selector: &mut FeatureSelector,
    training: &[BigramSequence],
) -> Result<ScalerReport> {
    if training.is_empty() {
        return Err(Error::validation("cannot fit a scaler on an empty training set"));
    }
    let k = selector.k();
    let m = training.len() as f64;
    let mut sums = vec![0.0f64; k];
    let mut sq_sums = vec![0.0f64; k];
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for seq in training {
        counts.clear();
        for b in &seq.bigrams {
            if let Some(i) = selector.feature_index(b) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        for (&i, &c) in counts.iter() {
            let c = c as f64;
            sums[i as usize] += c;
            sq_sums[i as usize] += c * c;
        }
    }
    let mut report = ScalerReport::default();
    let mut scale = Vec::with_capacity(k);
    for i in 0..k {
        let mean = sums[i] / m;
        let var = (sq_sums[i] / m - mean * mean).max(0.0);
        if var > 0.0 {
            scale.push(1.0 / var.sqrt());
        } else {
            report.degenerate.push(selector.selected[i].clone());
            scale.push(1.0);
        }
    }
    selector.scale = scale;
    Ok(report)
}

/// Sparse scaled-count vector over the selected features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// (feature index, raw count × scale), sorted by index.
    pub entries: Vec<(u32, f64)>,
    pub selector_hash: u64,
}

impl FeatureVector {
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| weights[i as usize] * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Count the selected bigrams in a snippet and apply the fitted scales.
/// Unselected bigrams are ignored.
pub fn vectorize(bigrams: &BigramSequence, selector: &FeatureSelector) -> FeatureVector {
    assert!(selector.is_fitted(), "selector must be fitted with scales before vectorizing");
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for b in &bigrams.bigrams {
        if let Some(i) = selector.feature_index(b) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let entries = counts
        .into_iter()
        .map(|(i, c)| (i, c as f64 * selector.scale[i as usize]))
        .collect();
    FeatureVector { entries, selector_hash: selector.hash() }
}

/// Persist the selector as a flat file: hash-comment header plus one
/// `bigram<TAB>chi2<TAB>scale` line per feature.
pub fn write_selector(
    path: &Path,
    selector: &FeatureSelector,
    corpus_hashes: (u64, u64),
) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# k={}", selector.k()).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# threshold={}", selector.threshold).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# corpus_fnc={:016x}", corpus_hashes.0).map_err(|e| Error::io(path, e))?;
    writeln!(f, "# corpus_cnn={:016x}", corpus_hashes.1).map_err(|e| Error::io(path, e))?;
    for i in 0..selector.k() {
        let scale = selector.scale.get(i).copied().unwrap_or(f64::NAN);
        writeln!(f, "{}\t{}\t{}", selector.selected[i], selector.chi2[i], scale)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_selector(path: &Path) -> Result<FeatureSelector> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut selected = Vec::new();
    let mut chi2 = Vec::new();
    let mut scale = Vec::new();
    let mut threshold = 0u64;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# threshold=") {
            threshold = rest.trim().parse().unwrap_or(0);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (b, c, s) = (parts.next(), parts.next(), parts.next());
        match (b, c, s) {
            (Some(b), Some(c), Some(s)) => {
                selected.push(b.to_string());
                chi2.push(c.parse::<f64>().map_err(|_| {
                    Error::validation(format!("{}: bad chi2 {c:?}", path.display()))
                })?);
                scale.push(s.parse::<f64>().map_err(|_| {
                    Error::validation(format!("{}: bad scale {s:?}", path.display()))
                })?);
            }
            _ => return Err(Error::validation(format!("{}: bad selector line", path.display()))),
        }
    }
    if selected.is_empty() {
        return Err(Error::validation(format!("{}: empty selector", path.display())));
    }
    let index = selected.iter().enumerate().map(|(i, b)| (b.clone(), i as u32)).collect();
    Ok(FeatureSelector { selected, chi2, scale, index, threshold })
}
