//! Scoring unlabeled snippets and aggregating to outlet- and county-level
//! slant.
//!
//! Outlet slant is the unweighted mean predicted probability over the
//! outlet's qualifying snippets; county slant is the circulation-weighted
//! mean of outlet slants. Stored slants stay on the probability scale;
//! standardization for regressions happens downstream.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict_proba, LogisticModel};
use crate::corpus::{CirculationLink, Snippet};
use crate::error::{Error, Result};
use crate::features::{vectorize, FeatureSelector};
use crate::textprep;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnippetScore {
    pub snippet_id: String,
    pub outlet_id: Option<String>,
    pub p_fnc: f64,
    pub is_local: Option<bool>,
    pub topic_shares: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlantSubset {
    All,
    Local,
    NonLocal,
}

impl SlantSubset {
    fn admits(self, score: &SnippetScore) -> bool {
        match self {
            SlantSubset::All => true,
            SlantSubset::Local => score.is_local == Some(true),
            SlantSubset::NonLocal => score.is_local == Some(false),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SlantSubset::All => "ALL",
            SlantSubset::Local => "LOCAL",
            SlantSubset::NonLocal => "NONLOCAL",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlantRecord {
    pub outlet_id: String,
    pub slant: f64,
    pub n_snippets: u64,
    pub subset: SlantSubset,
}

/// Score every snippet with the trained model. Each score depends only on
/// its own snippet, so the map runs in parallel with order preserved.
pub fn score_corpus(
    model: &LogisticModel,
    selector: &FeatureSelector,
    snippets: &[Snippet],
    stopwords: &std::collections::HashSet<String>,
) -> Result<Vec<SnippetScore>> {
    use rayon::prelude::*;
    snippets
        .par_iter()
        .map(|s| {
            let bigrams = textprep::snippet_bigrams(&s.text, stopwords);
            let v = vectorize(&bigrams, selector);
            let p = predict_proba(model, &v)?;
            Ok(SnippetScore {
                snippet_id: s.snippet_id(),
                outlet_id: s.outlet_id.clone(),
                p_fnc: p,
                is_local: None,
                topic_shares: None,
            })
        })
        .collect()
}

/// Unweighted mean p_fnc per outlet over the filtered subset. Outlets with
/// zero qualifying snippets are omitted, with one warning each.
pub fn aggregate_slant(
    scores: &[SnippetScore],
    subset: SlantSubset,
) -> Result<(Vec<SlantRecord>, Vec<String>)> {
    let mut sums: BTreeMap<&str, (f64, u64)> = BTreeMap::new();
    let mut all_outlets: BTreeMap<&str, ()> = BTreeMap::new();
    for score in scores {
        let outlet = score
            .outlet_id
            .as_deref()
            .ok_or_else(|| Error::validation(format!("score {} lacks an outlet", score.snippet_id)))?;
        all_outlets.insert(outlet, ());
        if subset.admits(score) {
            let entry = sums.entry(outlet).or_insert((0.0, 0));
            entry.0 += score.p_fnc;
            entry.1 += 1;
        }
    }
    let mut warnings = Vec::new();
    for outlet in all_outlets.keys() {
        if !sums.contains_key(outlet) {
            warnings.push(format!(
                "outlet {outlet}: no {} snippets, omitted from slant table",
                subset.as_str()
            ));
        }
    }
    let records = sums
        .into_iter()
        .map(|(outlet_id, (sum, n))| SlantRecord {
            outlet_id: outlet_id.to_string(),
            slant: sum / n as f64,
            n_snippets: n,
            subset,
        })
        .collect();
    Ok((records, warnings))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountySlant {
    pub county_id: String,
    pub slant: f64,
    pub total_circulation: f64,
}

/// Circulation-weighted mean of outlet slants per county. Counties whose
/// linked outlets have zero total circulation are omitted with a warning.
pub fn county_slant(
    slants: &[SlantRecord],
    links: &[CirculationLink],
) -> (Vec<CountySlant>, Vec<String>) {
    let by_outlet: BTreeMap<&str, f64> =
        slants.iter().map(|r| (r.outlet_id.as_str(), r.slant)).collect();
    let mut acc: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut counties_seen: HashSet<&str> = HashSet::new();
    for link in links {
        counties_seen.insert(link.county_id.as_str());
        if let Some(&slant) = by_outlet.get(link.outlet_id.as_str()) {
            let entry = acc.entry(link.county_id.as_str()).or_insert((0.0, 0.0));
            entry.0 += link.circulation * slant;
            entry.1 += link.circulation;
        }
    }
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (county, (weighted_sum, total)) in acc {
        if total > 0.0 {
            out.push(CountySlant {
                county_id: county.to_string(),
                slant: weighted_sum / total,
                total_circulation: total,
            });
        } else {
            warnings.push(format!("county {county}: zero total circulation, omitted"));
        }
    }
    for county in counties_seen {
        if !out.iter().any(|c| c.county_id == county)
            && !warnings.iter().any(|w| w.contains(county))
        {
            warnings.push(format!("county {county}: no scored outlets, omitted"));
        }
    }
    (out, warnings)
}

pub fn write_scores_csv(path: &Path, scores: &[SnippetScore]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "snippet_id,outlet_id,p_fnc,is_local").map_err(|e| Error::io(path, e))?;
    for s in scores {
        let local = match s.is_local {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(f, "{},{},{},{}", s.snippet_id, s.outlet_id.as_deref().unwrap_or(""), s.p_fnc, local)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn write_slants_csv(path: &Path, records: &[SlantRecord]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "outlet_id,subset,slant,n").map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{},{},{},{}", r.outlet_id, r.subset.as_str(), r.slant, r.n_snippets)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_slants_csv(path: &Path) -> Result<Vec<SlantRecord>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let subset = match record.get(1).unwrap_or("") {
            "ALL" => SlantSubset::All,
            "LOCAL" => SlantSubset::Local,
            "NONLOCAL" => SlantSubset::NonLocal,
            other => return Err(Error::validation(format!("unknown subset {other:?}"))),
        };
        out.push(SlantRecord {
            outlet_id: record.get(0).unwrap_or("").to_string(),
            subset,
            slant: record
                .get(2)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::validation("bad slant value"))?,
            n_snippets: record
                .get(3)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::validation("bad snippet count"))?,
        });
    }
    Ok(out)
}
