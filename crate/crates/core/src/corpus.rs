//! Corpus ingestion and segmentation.
//!
//! Transcript and article corpora arrive as line-delimited JSON (one object
//! per line with `id`, `date`, `text`, and optional `outlet_id`); panel
//! metadata arrives as CSV. Documents are segmented into fixed-length word
//! windows before any linguistic preprocessing, and the labeled training
//! sample is balanced by under-sampling the majority class.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Which corpus a document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Fnc,
    CnnMsnbc,
    Newspaper,
}

impl Source {
    /// The training label: 1 for FNC, 0 for CNN/MSNBC, none for newspapers.
    pub fn label(self) -> Option<bool> {
        match self {
            Source::Fnc => Some(true),
            Source::CnnMsnbc => Some(false),
            Source::Newspaper => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub outlet_id: Option<String>,
    pub date: String,
    pub text: String,
}

/// One fixed-length text unit; the granularity for training and scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub index: u32,
    pub text: String,
    pub word_count: u32,
    /// Present iff the parent document is labeled (true = FNC).
    pub label: Option<bool>,
    pub outlet_id: Option<String>,
}

impl Snippet {
    pub fn snippet_id(&self) -> String {
        format!("{}#{}", self.doc_id, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endorsement {
    Dem,
    Rep,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outlet {
    pub outlet_id: String,
    pub name: String,
    pub endorsement_1996: Endorsement,
    pub headquarters_county: Option<String>,
}

/// County-level channel and demographic data. Triples are ordered
/// (FNC, CNN, MSNBC).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountyRecord {
    pub county_id: String,
    pub state: String,
    pub positions: [f64; 3],
    pub ratings: [f64; 3],
    pub access_shares: [f64; 3],
    pub population: f64,
    pub surveyed_households: f64,
    /// Named demographic covariates, ordered by column name.
    pub demographics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CirculationLink {
    pub outlet_id: String,
    pub county_id: String,
    pub circulation: f64,
    pub circulation_1995: Option<f64>,
}

/// Result of loading a line-delimited corpus file.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    /// Count of malformed lines skipped with a warning.
    pub skipped: usize,
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    id: String,
    date: String,
    text: String,
    #[serde(default)]
    outlet_id: Option<String>,
}

/// Load a JSONL corpus, attaching `source_label` to every document.
///
/// Malformed lines are skipped and counted; an unreadable file is fatal.
pub fn load_labeled_corpus(path: &Path, source_label: Source) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    let mut skipped = 0usize;
    let mut seen: HashSet<String> = HashSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawDocument>(&line) {
            Ok(raw) => {
                if !seen.insert(raw.id.clone()) {
                    return Err(Error::DuplicateKey { kind: "document", key: raw.id });
                }
                if source_label == Source::Newspaper && raw.outlet_id.is_none() {
                    skipped += 1;
                    continue;
                }
                documents.push(Document {
                    id: raw.id,
                    source: source_label,
                    outlet_id: raw.outlet_id,
                    date: raw.date,
                    text: raw.text,
                });
            }
            Err(_) => skipped += 1,
        }
    }
    Ok(LoadedCorpus { documents, skipped })
}

/// Segment a document into consecutive non-overlapping word windows.
///
/// A trailing remainder is kept iff it has at least `window/2` words, except
/// that a document shorter than the window is returned whole as one snippet.
/// Words are raw whitespace tokens; linguistic preprocessing happens later.
pub fn segment(document: &Document, window: u32) -> Vec<Snippet> {
    assert!(window >= 1, "segmentation window must be positive");
    let words: Vec<&str> = document.text.split_whitespace().collect();
    if words.is_empty() {
        return Vec::new();
    }
    let label = document.source.label();
    let w = window as usize;
    if words.len() <= w {
        return vec![Snippet {
            doc_id: document.id.clone(),
            index: 0,
            text: words.join(" "),
            word_count: words.len() as u32,
            label,
            outlet_id: document.outlet_id.clone(),
        }];
    }
    let mut snippets = Vec::with_capacity(words.len() / w + 1);
    let mut start = 0usize;
    while start < words.len() {
        let remaining = words.len() - start;
        if remaining < w && 2 * remaining < w {
            break; // short trailing remainder dropped
        }
        let take = remaining.min(w);
        snippets.push(Snippet {
            doc_id: document.id.clone(),
            index: snippets.len() as u32,
            text: words[start..start + take].join(" "),
            word_count: take as u32,
            label,
            outlet_id: document.outlet_id.clone(),
        });
        start += take;
    }
    snippets
}

/// Balance a labeled snippet collection by uniformly under-sampling the
/// majority class without replacement. Deterministic per seed; output
/// preserves the input order of the retained snippets.
pub fn balance_sample(snippets: &[Snippet], seed: u64) -> Result<Vec<Snippet>> {
    let n_pos = snippets.iter().filter(|s| s.label == Some(true)).count();
    let n_neg = snippets.iter().filter(|s| s.label == Some(false)).count();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation(format!(
            "training corpus unusable: class counts fnc={n_pos}, cnn={n_neg}"
        )));
    }
    let target = n_pos.min(n_neg);
    let majority = n_pos.max(n_neg);
    let majority_label = Some(n_pos > n_neg);

    let mut rng = rng::stream(seed, "balance_sample");
    let mut keep_majority = vec![false; majority];
    let mut idx: Vec<usize> = (0..majority).collect();
    idx.shuffle(&mut rng);
    for &i in idx.iter().take(target) {
        keep_majority[i] = true;
    }

    let mut nth_majority = 0usize;
    let mut out = Vec::with_capacity(2 * target);
    for s in snippets {
        if s.label.is_none() {
            continue;
        }
        if s.label == majority_label {
            if keep_majority[nth_majority] {
                out.push(s.clone());
            }
            nth_majority += 1;
        } else {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// Stratified train/test index split: shuffle each class with the seed and
/// cut at `train_fraction`. Both outputs are sorted ascending.
pub fn stratified_split(
    labels: &[bool],
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::stream(seed, "train_test_split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let cut = ((idx.len() as f64) * train_fraction).round() as usize;
        let cut = cut.clamp(1, idx.len().saturating_sub(1).max(1));
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Load and cross-validate the three panel input tables.
///
/// Every circulation link must reference a known county and outlet, and
/// (outlet, county) pairs must be unique.
pub fn load_panel_inputs(
    county_path: &Path,
    circulation_path: &Path,
    outlet_path: &Path,
) -> Result<(Vec<CountyRecord>, Vec<CirculationLink>, Vec<Outlet>)> {
    let counties = load_counties(county_path)?;
    let outlets = load_outlets(outlet_path)?;
    let links = load_circulation(circulation_path)?;

    let county_ids: HashSet<&str> = counties.iter().map(|c| c.county_id.as_str()).collect();
    let outlet_ids: HashSet<&str> = outlets.iter().map(|o| o.outlet_id.as_str()).collect();
    let mut pairs: HashSet<(String, String)> = HashSet::new();
    for link in &links {
        if !county_ids.contains(link.county_id.as_str()) {
            return Err(Error::DanglingReference { kind: "county", key: link.county_id.clone() });
        }
        if !outlet_ids.contains(link.outlet_id.as_str()) {
            return Err(Error::DanglingReference { kind: "outlet", key: link.outlet_id.clone() });
        }
        if !pairs.insert((link.outlet_id.clone(), link.county_id.clone())) {
            return Err(Error::DuplicateKey {
                kind: "circulation link",
                key: format!("{}/{}", link.outlet_id, link.county_id),
            });
        }
    }
    Ok((counties, links, outlets))
}

/// Fixed county columns; all other columns are demographic covariates.
const COUNTY_FIXED: [&str; 13] = [
    "county_id",
    "state",
    "pos_fnc",
    "pos_cnn",
    "pos_msnbc",
    "rating_fnc",
    "rating_cnn",
    "rating_msnbc",
    "access_fnc",
    "access_cnn",
    "access_msnbc",
    "population",
    "surveyed_households",
];

pub fn load_counties(path: &Path) -> Result<Vec<CountyRecord>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let headers =
        reader.headers().map_err(|e| Error::Csv { path: path.into(), source: e })?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("{}: missing column {name}", path.display())))
    };
    let idx: Vec<usize> = COUNTY_FIXED.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let demo_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !COUNTY_FIXED.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let parse = |field: &str, what: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| {
            Error::validation(format!("{}: bad number {field:?} in {what}", path.display()))
        })
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let county_id = get(idx[0]).to_string();
        if !seen.insert(county_id.clone()) {
            return Err(Error::DuplicateKey { kind: "county", key: county_id });
        }
        let positions = [
            parse(get(idx[2]), "pos_fnc")?,
            parse(get(idx[3]), "pos_cnn")?,
            parse(get(idx[4]), "pos_msnbc")?,
        ];
        if positions.iter().any(|&p| p <= 0.0) {
            return Err(Error::validation(format!(
                "county {county_id}: channel numbers must be positive"
            )));
        }
        let access = [
            parse(get(idx[8]), "access_fnc")?,
            parse(get(idx[9]), "access_cnn")?,
            parse(get(idx[10]), "access_msnbc")?,
        ];
        if access.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::validation(format!(
                "county {county_id}: access shares must lie in [0,1]"
            )));
        }
        let mut demographics = BTreeMap::new();
        for (i, name) in &demo_cols {
            demographics.insert(name.clone(), parse(get(*i), name)?);
        }
        out.push(CountyRecord {
            county_id,
            state: get(idx[1]).to_string(),
            positions,
            ratings: [
                parse(get(idx[5]), "rating_fnc")?,
                parse(get(idx[6]), "rating_cnn")?,
                parse(get(idx[7]), "rating_msnbc")?,
            ],
            access_shares: access,
            population: parse(get(idx[11]), "population")?,
            surveyed_households: parse(get(idx[12]), "surveyed_households")?,
            demographics,
        });
    }
    Ok(out)
}

pub fn load_outlets(path: &Path) -> Result<Vec<Outlet>> {
    #[derive(Deserialize)]
    struct Row {
        outlet_id: String,
        name: String,
        #[serde(default)]
        endorsement_1996: String,
        #[serde(default)]
        hq_county: Option<String>,
    }
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        if !seen.insert(row.outlet_id.clone()) {
            return Err(Error::DuplicateKey { kind: "outlet", key: row.outlet_id });
        }
        let endorsement = match row.endorsement_1996.trim().to_ascii_uppercase().as_str() {
            "DEM" => Endorsement::Dem,
            "REP" => Endorsement::Rep,
            "" | "NONE" => Endorsement::None,
            other => {
                return Err(Error::validation(format!(
                    "outlet {}: unknown endorsement {other:?}",
                    row.outlet_id
                )))
            }
        };
        out.push(Outlet {
            outlet_id: row.outlet_id,
            name: row.name,
            endorsement_1996: endorsement,
            headquarters_county: row.hq_county.filter(|c| !c.is_empty()),
        });
    }
    Ok(out)
}

pub fn load_circulation(path: &Path) -> Result<Vec<CirculationLink>> {
    #[derive(Deserialize)]
    struct Row {
        outlet_id: String,
        county_id: String,
        circulation: f64,
        #[serde(default)]
        circulation_1995: Option<f64>,
    }
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        if row.circulation < 0.0 {
            return Err(Error::validation(format!(
                "link {}/{}: circulation must be nonnegative",
                row.outlet_id, row.county_id
            )));
        }
        out.push(CirculationLink {
            outlet_id: row.outlet_id,
            county_id: row.county_id,
            circulation: row.circulation,
            circulation_1995: row.circulation_1995,
        });
    }
    Ok(out)
}

/// Write snippets as JSONL (the prepared-store format).
pub fn write_snippets(path: &Path, snippets: &[Snippet]) -> Result<()> {
    use std::io::Write;
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for s in snippets {
        let line = serde_json::to_string(s).expect("snippet serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_snippets(path: &Path) -> Result<Vec<Snippet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Snippet = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{}: bad snippet line: {e}", path.display())))?;
        out.push(s);
    }
    Ok(out)
}

/// Per-document segmentation over a whole corpus.
pub fn segment_corpus(documents: &[Document], window: u32) -> Vec<Snippet> {
    documents.iter().flat_map(|d| segment(d, window)).collect()
}
