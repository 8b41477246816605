//! Column resolution and numeric frame assembly for regressions.
//!
//! A [`RegressionSpec`](super::RegressionSpec) names columns; this module
//! turns panel rows into aligned numeric vectors, applying sample filters,
//! listwise deletion of rows with unresolvable columns, and optional
//! standardization of outcome, treatment, and instruments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{relative_measure, sample_sd_weighted, PanelRow, RegressionSpec};

/// Resolve a named column for one row. Built-in names cover the slant
/// outcome and the treatment/instrument constructions; anything else is
/// looked up in the row's named-control map. `None` means the row lacks the
/// column and is dropped listwise.
pub(crate) fn resolve(row: &PanelRow, name: &str) -> Option<f64> {
    let v = match name {
        "slant" => row.slant,
        "viewership_fnc" => row.viewership[0],
        "viewership_cnn" => row.viewership[1],
        "viewership_msnbc" => row.viewership[2],
        "viewership_rel" => relative_measure(row.viewership[0], row.viewership[1], row.viewership[2]),
        "viewership_rel_cnn" => row.viewership[0] - row.viewership[1],
        "viewership_rel_msnbc" => row.viewership[0] - row.viewership[2],
        "position_fnc" => row.position[0],
        "position_cnn" => row.position[1],
        "position_msnbc" => row.position[2],
        "position_rel" => relative_measure(row.position[0], row.position[1], row.position[2]),
        "position_rel_cnn" => row.position[0] - row.position[1],
        "position_rel_msnbc" => row.position[0] - row.position[2],
        "rep_vote_1996" => row.rep_vote_1996,
        "weight" | "circulation" => row.weight,
        other => return row.controls.get(other).copied().filter(|v| v.is_finite()),
    };
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub n: usize,
    pub outcome: Vec<f64>,
    pub outcome_name: String,
    pub treatment: Option<Vec<f64>>,
    pub treatment_name: String,
    pub instruments: Vec<Vec<f64>>,
    pub instrument_names: Vec<String>,
    pub controls: Vec<Vec<f64>>,
    pub control_names: Vec<String>,
    /// Dense group ids, group count, group labels; None = include intercept.
    pub fe: Option<(Vec<u32>, usize, Vec<String>)>,
    pub weights: Vec<f64>,
    pub clusters: Vec<Vec<u64>>,
    pub dropped_rows: usize,
}

pub(crate) fn apply_filter<'a>(
    panel: &'a [PanelRow],
    spec: &RegressionSpec,
) -> Result<Vec<&'a PanelRow>> {
    let mut rows: Vec<&PanelRow> = panel.iter().collect();
    if let Some(e) = spec.filter.endorsement {
        rows.retain(|r| r.endorsement == e);
    }
    if let Some(t) = spec.filter.vote_tercile {
        if !(1..=3).contains(&t) {
            return Err(Error::validation("vote_tercile must be 1, 2, or 3"));
        }
        // Tercile boundaries over distinct counties.
        let mut by_county: BTreeMap<&str, f64> = BTreeMap::new();
        for r in panel {
            if r.rep_vote_1996.is_finite() {
                by_county.insert(&r.county_id, r.rep_vote_1996);
            }
        }
        if by_county.len() < 3 {
            return Err(Error::validation("too few counties for a tercile split"));
        }
        let mut votes: Vec<f64> = by_county.values().copied().collect();
        votes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let b1 = votes[votes.len() / 3];
        let b2 = votes[2 * votes.len() / 3];
        rows.retain(|r| {
            if !r.rep_vote_1996.is_finite() {
                return false;
            }
            let tercile = if r.rep_vote_1996 <= b1 {
                1
            } else if r.rep_vote_1996 <= b2 {
                2
            } else {
                3
            };
            tercile == t
        });
    }
    Ok(rows)
}

pub(crate) fn build_frame(spec: &RegressionSpec, panel: &[PanelRow]) -> Result<Frame> {
    if spec.clusters.len() > 2 {
        return Err(Error::validation("at most two cluster dimensions are supported"));
    }
    let rows = apply_filter(panel, spec)?;

    // Listwise deletion: keep rows where every referenced column resolves
    // and the weight is strictly positive.
    let mut kept: Vec<&PanelRow> = Vec::with_capacity(rows.len());
    let mut dropped = 0usize;
    'rows: for row in rows {
        let mut referenced: Vec<&str> = vec![spec.outcome.as_str()];
        if !spec.treatment.is_empty() {
            referenced.push(spec.treatment.as_str());
        }
        referenced.extend(spec.instruments.iter().map(String::as_str));
        referenced.extend(spec.controls.iter().map(String::as_str));
        for name in referenced {
            if resolve(row, name).is_none() {
                dropped += 1;
                continue 'rows;
            }
        }
        if let Some(wname) = &spec.weight {
            match resolve(row, wname) {
                Some(w) if w > 0.0 => {}
                _ => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        if row.state.is_empty() {
            return Err(Error::validation(format!(
                "row {}/{} has an empty state",
                row.outlet_id, row.county_id
            )));
        }
        kept.push(row);
    }
    if kept.is_empty() {
        return Err(Error::validation("no rows left after filtering and listwise deletion"));
    }
    let n = kept.len();

    let collect = |name: &str| -> Vec<f64> {
        kept.iter().map(|r| resolve(r, name).expect("checked above")).collect()
    };
    let mut outcome = collect(&spec.outcome);
    let mut treatment =
        if spec.treatment.is_empty() { None } else { Some(collect(&spec.treatment)) };
    let mut instruments: Vec<Vec<f64>> = spec.instruments.iter().map(|i| collect(i)).collect();
    let controls: Vec<Vec<f64>> = spec.controls.iter().map(|c| collect(c)).collect();
    let weights: Vec<f64> = match &spec.weight {
        Some(wname) => kept.iter().map(|r| resolve(r, wname).expect("checked above")).collect(),
        None => vec![1.0; n],
    };

    if spec.standardize {
        let sd = |col: &[f64], name: &str| -> Result<f64> {
            let s = sample_sd_weighted(col, &weights, spec.standardize_weighted);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::validation(format!("column {name} has zero variance")));
            }
            Ok(s)
        };
        let s = sd(&outcome, &spec.outcome)?;
        outcome.iter_mut().for_each(|v| *v /= s);
        if let Some(t) = treatment.as_mut() {
            let s = sd(t, &spec.treatment)?;
            t.iter_mut().for_each(|v| *v /= s);
        }
        for (col, name) in instruments.iter_mut().zip(&spec.instruments) {
            let s = sd(col, name)?;
            col.iter_mut().for_each(|v| *v /= s);
        }
    }

    let fe = match spec.fe.as_deref() {
        None | Some("none") => None,
        Some("state") => {
            let mut ids: BTreeMap<&str, u32> = BTreeMap::new();
            for r in &kept {
                let next = ids.len() as u32;
                ids.entry(r.state.as_str()).or_insert(next);
            }
            let labels: Vec<String> = {
                let mut pairs: Vec<(&u32, &&str)> = ids.iter().map(|(s, i)| (i, s)).collect();
                pairs.sort();
                pairs.into_iter().map(|(_, s)| s.to_string()).collect()
            };
            let groups: Vec<u32> = kept.iter().map(|r| ids[r.state.as_str()]).collect();
            Some((groups, ids.len(), labels))
        }
        Some(other) => {
            return Err(Error::validation(format!(
                "unsupported fixed-effect dimension {other:?} (use \"state\" or \"none\")"
            )))
        }
    };

    let mut clusters = Vec::new();
    for cname in &spec.clusters {
        let ids: Vec<u64> = match cname.as_str() {
            "row" => (0..n as u64).collect(),
            "outlet" | "county" | "state" => {
                let mut map: BTreeMap<&str, u64> = BTreeMap::new();
                for r in &kept {
                    let key = match cname.as_str() {
                        "outlet" => r.outlet_id.as_str(),
                        "county" => r.county_id.as_str(),
                        _ => r.state.as_str(),
                    };
                    let next = map.len() as u64;
                    map.entry(key).or_insert(next);
                }
                kept.iter()
                    .map(|r| {
                        let key = match cname.as_str() {
                            "outlet" => r.outlet_id.as_str(),
                            "county" => r.county_id.as_str(),
                            _ => r.state.as_str(),
                        };
                        map[key]
                    })
                    .collect()
            }
            other => {
                return Err(Error::validation(format!(
                    "unknown cluster dimension {other:?} (use outlet, county, state, or row)"
                )))
            }
        };
        clusters.push(ids);
    }

    Ok(Frame {
        n,
        outcome,
        outcome_name: spec.outcome.clone(),
        treatment,
        treatment_name: spec.treatment.clone(),
        instruments,
        instrument_names: spec.instruments.clone(),
        controls,
        control_names: spec.controls.clone(),
        fe,
        weights,
        clusters,
        dropped_rows: dropped,
    })
}

/// Language features carried into the controls map, per outlet.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LanguageFeatures {
    pub vocab_size: f64,
    pub word_length: f64,
    pub sentence_length: f64,
    pub article_length: f64,
}

pub struct PanelBuildInputs<'a> {
    pub counties: &'a [crate::corpus::CountyRecord],
    pub links: &'a [crate::corpus::CirculationLink],
    pub outlets: &'a [crate::corpus::Outlet],
    /// Outlet-level slant on the ALL subset; LOCAL/NONLOCAL records, when
    /// present, become `slant_local` / `slant_nonlocal` columns.
    pub slants: &'a [crate::scoring::SlantRecord],
    pub language: Option<&'a BTreeMap<String, LanguageFeatures>>,
    /// Outlet → mean topic share vector (framing controls).
    pub topic_shares: Option<&'a BTreeMap<String, Vec<f64>>>,
}

/// Join counties, circulation links, outlets, and slant records into panel
/// rows (one per newspaper-county link). Outlets without a slant record are
/// skipped with a warning.
pub fn build_panel(inputs: &PanelBuildInputs) -> Result<(Vec<PanelRow>, Vec<String>)> {
    use crate::scoring::SlantSubset;
    let counties: BTreeMap<&str, &crate::corpus::CountyRecord> =
        inputs.counties.iter().map(|c| (c.county_id.as_str(), c)).collect();
    let outlets: BTreeMap<&str, &crate::corpus::Outlet> =
        inputs.outlets.iter().map(|o| (o.outlet_id.as_str(), o)).collect();
    let mut slant_all: BTreeMap<&str, f64> = BTreeMap::new();
    let mut slant_local: BTreeMap<&str, f64> = BTreeMap::new();
    let mut slant_nonlocal: BTreeMap<&str, f64> = BTreeMap::new();
    for r in inputs.slants {
        let target = match r.subset {
            SlantSubset::All => &mut slant_all,
            SlantSubset::Local => &mut slant_local,
            SlantSubset::NonLocal => &mut slant_nonlocal,
        };
        target.insert(r.outlet_id.as_str(), r.slant);
    }

    // County totals for the relative-share weight variants.
    let mut county_circulation: BTreeMap<&str, f64> = BTreeMap::new();
    for link in inputs.links {
        *county_circulation.entry(link.county_id.as_str()).or_insert(0.0) += link.circulation;
    }

    // Circulation-weighted outlet exposure: mean relative viewership and
    // position over the counties each outlet serves.
    let mut outlet_exposure: BTreeMap<&str, (f64, f64, f64)> = BTreeMap::new();
    for link in inputs.links {
        if let Some(county) = counties.get(link.county_id.as_str()) {
            let entry = outlet_exposure.entry(link.outlet_id.as_str()).or_insert((0.0, 0.0, 0.0));
            let v = relative_measure(county.ratings[0], county.ratings[1], county.ratings[2]);
            let z = relative_measure(county.positions[0], county.positions[1], county.positions[2]);
            entry.0 += link.circulation * v;
            entry.1 += link.circulation * z;
            entry.2 += link.circulation;
        }
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for link in inputs.links {
        let county = counties.get(link.county_id.as_str()).ok_or_else(|| {
            Error::DanglingReference { kind: "county", key: link.county_id.clone() }
        })?;
        let outlet = outlets.get(link.outlet_id.as_str()).ok_or_else(|| {
            Error::DanglingReference { kind: "outlet", key: link.outlet_id.clone() }
        })?;
        let Some(&slant) = slant_all.get(link.outlet_id.as_str()) else {
            warnings.push(format!("outlet {}: no slant record, rows skipped", link.outlet_id));
            continue;
        };

        let mut controls: BTreeMap<String, f64> = county.demographics.clone();
        controls.insert("access_fnc".into(), county.access_shares[0]);
        controls.insert("access_cnn".into(), county.access_shares[1]);
        controls.insert("access_msnbc".into(), county.access_shares[2]);
        if let Some(lang) = inputs.language.and_then(|m| m.get(&link.outlet_id)) {
            controls.insert("lang_vocab_size".into(), lang.vocab_size);
            controls.insert("lang_word_length".into(), lang.word_length);
            controls.insert("lang_sentence_length".into(), lang.sentence_length);
            controls.insert("lang_article_length".into(), lang.article_length);
        }
        if let Some(shares) = inputs.topic_shares.and_then(|m| m.get(&link.outlet_id)) {
            for (t, share) in shares.iter().enumerate() {
                controls.insert(format!("topic_share_{t:03}"), *share);
            }
        }
        if let Some(&s) = slant_local.get(link.outlet_id.as_str()) {
            controls.insert("slant_local".into(), s);
        }
        if let Some(&s) = slant_nonlocal.get(link.outlet_id.as_str()) {
            controls.insert("slant_nonlocal".into(), s);
        }
        if let Some(c95) = link.circulation_1995 {
            controls.insert("weight_circulation_1995".into(), c95);
        }
        let county_total = county_circulation[link.county_id.as_str()];
        if county_total > 0.0 {
            let share = link.circulation / county_total;
            controls.insert("weight_share_surveyed".into(), share * county.surveyed_households);
            controls.insert("weight_share_population".into(), share * county.population);
        }
        if let Some(&(v_sum, z_sum, total)) = outlet_exposure.get(link.outlet_id.as_str()) {
            if total > 0.0 {
                controls.insert("viewership_outlet_rel".into(), v_sum / total);
                controls.insert("position_outlet_rel".into(), z_sum / total);
            }
        }

        let rep_vote = county.demographics.get("rep_vote_1996").copied().unwrap_or(f64::NAN);
        rows.push(PanelRow {
            outlet_id: link.outlet_id.clone(),
            county_id: link.county_id.clone(),
            state: county.state.clone(),
            slant,
            viewership: county.ratings,
            position: county.positions,
            controls,
            weight: link.circulation,
            endorsement: outlet.endorsement_1996,
            rep_vote_1996: rep_vote,
        });
    }
    Ok((rows, warnings))
}
