//! Synthetic-data oracle with known ground truth.
//!
//! Two overlapping categorical word distributions with an exact
//! total-variation gap stand in for the channel corpora; outlet corpora are
//! mixtures of the two whose weight responds to an instrumented exposure
//! variable plus a latent confounder. The instrument is drawn as discrete
//! channel positions and passed through the same relative-measure
//! construction as real data, so the whole estimation pipeline can be
//! verified end to end: the confounder biases OLS while 2SLS stays
//! consistent at the planted θ.
//!
//! Emitted corpora and tables are format-identical to real ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::corpus::{CirculationLink, CountyRecord, Document, Endorsement, Outlet, Snippet, Source};
use crate::econ::{build_panel, relative_measure, PanelBuildInputs, PanelRow};
use crate::error::{Error, Result};
use crate::rng;
use crate::scoring::{SlantRecord, SlantSubset};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub vocab_size: usize,
    /// Total-variation distance between the two channel word distributions.
    pub separation: f64,
    /// How many vocabulary words carry the channel contrast.
    pub charged_count: usize,
    /// Probability mass on the charged words (raised to `separation` when
    /// the requested gap needs more).
    pub charged_mass: f64,
    /// Total labeled snippets (split evenly between channels).
    pub n_snippets: usize,
    pub snippet_words: usize,
    pub n_counties: usize,
    pub n_outlets: usize,
    pub n_states: usize,
    /// Each outlet serves its home county plus up to this many extras.
    pub max_extra_counties: usize,
    pub articles_per_outlet: usize,
    /// True first-stage coefficient δ (outcome units per position unit).
    pub first_stage_delta: f64,
    /// True θ: mixture-weight change per unit of relative viewership.
    pub effect_theta: f64,
    /// Latent county confounder loading into both viewership and slant.
    pub confounder_strength: f64,
    pub viewership_noise: f64,
    pub slant_noise: f64,
    /// Nonzero plants an exogeneity violation: the FNC position is shifted
    /// by this multiple of the first demographic.
    pub instrument_demo_loading: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 500,
            separation: 0.08,
            charged_count: 20,
            charged_mass: 0.6,
            n_snippets: 20_000,
            snippet_words: 80,
            n_counties: 400,
            n_outlets: 150,
            n_states: 20,
            max_extra_counties: 3,
            articles_per_outlet: 100,
            first_stage_delta: -0.008,
            effect_theta: 0.15,
            confounder_strength: 0.15,
            viewership_noise: 0.25,
            slant_noise: 0.02,
            instrument_demo_loading: 0.0,
            seed: 0,
        }
    }
}

/// The generating word distributions and the Bayes-optimal benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelTruth {
    pub tokens: Vec<String>,
    pub p_fnc: Vec<f64>,
    pub p_cnn: Vec<f64>,
    /// Recomputed by direct summation; equals the configured separation.
    pub tv_distance: f64,
    /// Accuracy of the exact likelihood-ratio rule on the generated
    /// snippets (ties scored as half).
    pub bayes_rate: f64,
}

/// Ground truth for a generated panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelTruth {
    pub delta_true: f64,
    /// θ on the mixture-weight scale.
    pub theta_mixture: f64,
    /// θ in outcome units: theta_mixture × measurement_gap.
    pub theta_outcome: f64,
    /// Mean score gap between pure-FNC and pure-CNN text under the slant
    /// measurement in use (1 when slant is the mixture weight itself).
    pub measurement_gap: f64,
    /// Latent mixture weight per outlet, in outlet-id order.
    pub mixture_weights: Vec<f64>,
}

#[derive(Debug)]
pub struct PanelOutput {
    pub counties: Vec<CountyRecord>,
    pub links: Vec<CirculationLink>,
    pub outlets: Vec<Outlet>,
    /// Synthetic newspaper articles (one snippet-sized document each).
    pub articles: Vec<Document>,
    pub rows: Vec<PanelRow>,
    pub truth: PanelTruth,
}

/// Deterministic Porter-stable vocabulary: "x" followed by the index's
/// digits mapped onto consonants, so normalization and stemming leave every
/// token untouched.
pub fn synth_tokens(n: usize) -> Vec<String> {
    const DIGITS: [char; 10] = ['b', 'd', 'g', 'k', 'm', 'p', 'q', 'v', 'w', 'z'];
    (0..n)
        .map(|i| {
            let mut s = String::from("x");
            for c in i.to_string().chars() {
                s.push(DIGITS[c.to_digit(10).unwrap() as usize]);
            }
            s
        })
        .collect()
}

/// The two channel distributions with TV distance exactly
/// min(separation, 1). Charged words sit at the front of the vocabulary:
/// first half pro-FNC, second half pro-CNN.
fn channel_distributions(config: &SynthConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = config.vocab_size;
    let s = config.separation;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::validation("separation must lie in [0, 1]"));
    }
    let n_charged = config.charged_count.max(2).min(v) & !1; // even, ≥ 2
    if n_charged < 2 || v < n_charged {
        return Err(Error::validation("vocabulary too small for the charged words"));
    }
    let mass = config.charged_mass.clamp(s.max(f64::MIN_POSITIVE), 1.0);
    let gamma = if mass > 0.0 { s / mass } else { 0.0 };
    let base = mass / n_charged as f64;
    let neutral = if v > n_charged { (1.0 - mass) / (v - n_charged) as f64 } else { 0.0 };
    let half = n_charged / 2;
    let mut p = vec![neutral; v];
    let mut q = vec![neutral; v];
    for i in 0..half {
        p[i] = base * (1.0 + gamma);
        q[i] = base * (1.0 - gamma);
    }
    for i in half..n_charged {
        p[i] = base * (1.0 - gamma);
        q[i] = base * (1.0 + gamma);
    }
    Ok((p, q))
}

fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Generate the labeled channel corpora plus ground truth. Snippets are
/// drawn word by word from the channel distributions.
pub fn gen_channel_corpora(config: &SynthConfig) -> Result<(Vec<Snippet>, ChannelTruth)> {
    let (p, q) = channel_distributions(config)?;
    let tokens = synth_tokens(config.vocab_size);
    let n_per_channel = (config.n_snippets / 2).max(1);
    let mut rng = rng::stream(config.seed, "channel_corpora");

    // Log-likelihood ratios per word; only drawable words ever contribute.
    let llr: Vec<f64> = p.iter().zip(&q).map(|(&a, &b)| a.ln() - b.ln()).collect();

    let mut snippets = Vec::with_capacity(2 * n_per_channel);
    let mut bayes_credit = 0.0;
    for (channel, dist, label) in [("fnc", &p, true), ("cnn", &q, false)] {
        let sampler = WeightedIndex::new(dist.iter().copied())
            .map_err(|e| Error::validation(format!("bad channel distribution: {e}")))?;
        for i in 0..n_per_channel {
            let mut text = String::with_capacity(config.snippet_words * 5);
            let mut score = 0.0f64;
            for w in 0..config.snippet_words {
                let idx = sampler.sample(&mut rng);
                if w > 0 {
                    text.push(' ');
                }
                text.push_str(&tokens[idx]);
                score += llr[idx];
            }
            if score == 0.0 {
                bayes_credit += 0.5;
            } else if (score > 0.0) == label {
                bayes_credit += 1.0;
            }
            snippets.push(Snippet {
                doc_id: format!("{channel}{i:06}"),
                index: 0,
                text,
                word_count: config.snippet_words as u32,
                label: Some(label),
                outlet_id: None,
            });
        }
    }

    let truth = ChannelTruth {
        tv_distance: tv_distance(&p, &q),
        bayes_rate: bayes_credit / snippets.len() as f64,
        tokens,
        p_fnc: p,
        p_cnn: q,
    };
    Ok((snippets, truth))
}

/// Generate counties, outlets, circulation, articles, and panel rows.
///
/// County-level viewership responds to channel position at `δ` plus the
/// confounder; outlet mixture weights respond to circulation-weighted
/// exposure at `θ` plus the same confounder, so OLS of slant on exposure is
/// biased upward while 2SLS instrumented by position recovers θ. Panel rows
/// carry the outlet-aggregated exposure columns `viewership_outlet_rel` and
/// `position_outlet_rel`.
pub fn gen_panel(config: &SynthConfig) -> Result<PanelOutput> {
    if config.n_counties < 2 || config.n_outlets < 2 {
        return Err(Error::validation("need at least 2 counties and 2 outlets"));
    }
    let mut rng = rng::stream(config.seed, "panel");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n_states = config.n_states.clamp(2, config.n_counties);

    // Counties.
    let state_shift: Vec<f64> = (0..n_states).map(|_| 0.2 * normal.sample(&mut rng)).collect();
    let mut counties = Vec::with_capacity(config.n_counties);
    let mut confounder = Vec::with_capacity(config.n_counties);
    let mut position_rel = Vec::with_capacity(config.n_counties);
    let mut viewership_rel = Vec::with_capacity(config.n_counties);
    let mut demo_by_county: Vec<Vec<f64>> = Vec::with_capacity(config.n_counties);
    for j in 0..config.n_counties {
        let state = j % n_states;
        let c: f64 = normal.sample(&mut rng);
        let demo: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
        let mut pos_fnc = rng.gen_range(1..=79) as f64;
        if config.instrument_demo_loading != 0.0 {
            pos_fnc = (pos_fnc + config.instrument_demo_loading * demo[0]).max(1.0);
        }
        let pos_cnn = rng.gen_range(1..=79) as f64;
        let pos_msnbc = rng.gen_range(1..=79) as f64;
        let pos_rel = relative_measure(pos_fnc, pos_cnn, pos_msnbc);
        // Demographics genuinely shift viewership (and mildly shift slant
        // below); they stay independent of channel positions, so the
        // instrument remains exogenous.
        let demo_effect = 0.08 * demo[0] - 0.04 * demo[1];
        let v_rel = config.first_stage_delta * pos_rel
            + config.confounder_strength * c
            + state_shift[state]
            + demo_effect
            + config.viewership_noise * normal.sample(&mut rng);
        let rating_cnn = (0.3 + 0.05 * normal.sample(&mut rng)).max(0.0);
        let rating_msnbc = (0.15 + 0.05 * normal.sample(&mut rng)).max(0.0);
        let rating_fnc = v_rel + 0.5 * (rating_cnn + rating_msnbc);

        let mut demographics = BTreeMap::new();
        demographics.insert("demo_income".to_string(), demo[0]);
        demographics.insert("demo_college".to_string(), demo[1]);
        demographics.insert("demo_urban".to_string(), demo[2]);
        demographics.insert(
            "rep_vote_1996".to_string(),
            (0.45 + 0.1 * normal.sample(&mut rng)).clamp(0.05, 0.95),
        );
        counties.push(CountyRecord {
            county_id: format!("c{j:04}"),
            state: format!("S{state:02}"),
            positions: [pos_fnc, pos_cnn, pos_msnbc],
            ratings: [rating_fnc, rating_cnn, rating_msnbc],
            access_shares: [
                (0.93 + 0.05 * normal.sample(&mut rng)).clamp(0.0, 1.0),
                (0.95 + 0.04 * normal.sample(&mut rng)).clamp(0.0, 1.0),
                (0.90 + 0.06 * normal.sample(&mut rng)).clamp(0.0, 1.0),
            ],
            population: (50_000.0 * (normal.sample(&mut rng) as f64).exp()).max(500.0),
            surveyed_households: (120.0 * (0.5 * normal.sample(&mut rng)).exp()).max(10.0),
            demographics,
        });
        confounder.push(c);
        position_rel.push(pos_rel);
        viewership_rel.push(v_rel);
        demo_by_county.push(demo);
    }

    // Outlets, served counties, circulation.
    let mut outlets = Vec::with_capacity(config.n_outlets);
    let mut links = Vec::new();
    let mut exposure_v = Vec::with_capacity(config.n_outlets);
    let mut exposure_z = Vec::with_capacity(config.n_outlets);
    let mut exposure_c = Vec::with_capacity(config.n_outlets);
    let mut exposure_d: Vec<[f64; 3]> = Vec::with_capacity(config.n_outlets);
    for i in 0..config.n_outlets {
        let outlet_id = format!("o{i:04}");
        let home = rng.gen_range(0..config.n_counties);
        let mut served = vec![home];
        let extras = rng.gen_range(0..=config.max_extra_counties);
        for _ in 0..extras {
            let county = rng.gen_range(0..config.n_counties);
            if !served.contains(&county) {
                served.push(county);
            }
        }
        let endorsement = match rng.gen_range(0..100) {
            0..=24 => Endorsement::Dem,
            25..=54 => Endorsement::Rep,
            _ => Endorsement::None,
        };
        outlets.push(Outlet {
            outlet_id: outlet_id.clone(),
            name: format!("Synthetic Outlet {i}"),
            endorsement_1996: endorsement,
            headquarters_county: Some(format!("c{home:04}")),
        });
        let circulations: Vec<f64> = served
            .iter()
            .map(|_| (3000.0 * (0.7 * normal.sample(&mut rng)).exp()).max(50.0))
            .collect();
        let total: f64 = circulations.iter().sum();
        let mut v_bar = 0.0;
        let mut z_bar = 0.0;
        let mut c_bar = 0.0;
        let mut d_bar = [0.0f64; 3];
        for (&j, &circ) in served.iter().zip(&circulations) {
            let share = circ / total;
            v_bar += share * viewership_rel[j];
            z_bar += share * position_rel[j];
            c_bar += share * confounder[j];
            for (slot, d) in d_bar.iter_mut().zip(&demo_by_county[j]) {
                *slot += share * d;
            }
            links.push(CirculationLink {
                outlet_id: outlet_id.clone(),
                county_id: format!("c{j:04}"),
                circulation: circ,
                circulation_1995: Some(circ * (0.9 + 0.2 * rng.gen::<f64>())),
            });
        }
        exposure_v.push(v_bar);
        exposure_z.push(z_bar);
        exposure_c.push(c_bar);
        exposure_d.push(d_bar);
    }

    // Latent mixture weights; the confounder loads on both sides, and the
    // exposure-weighted demographics carry a mild direct effect.
    let mut mixture = Vec::with_capacity(config.n_outlets);
    for i in 0..config.n_outlets {
        let w = 0.45
            + config.effect_theta * exposure_v[i]
            + 0.5 * config.confounder_strength * exposure_c[i]
            + 0.01 * exposure_d[i][0]
            - 0.015 * exposure_d[i][2]
            + config.slant_noise * normal.sample(&mut rng);
        mixture.push(w);
    }

    // Outlet corpora from the mixture (weights clamped into (0,1)).
    let (p, q) = channel_distributions(config)?;
    let tokens = synth_tokens(config.vocab_size);
    let fnc_sampler = WeightedIndex::new(p.iter().copied())
        .map_err(|e| Error::validation(format!("bad distribution: {e}")))?;
    let cnn_sampler = WeightedIndex::new(q.iter().copied())
        .map_err(|e| Error::validation(format!("bad distribution: {e}")))?;
    let mut articles = Vec::new();
    if config.articles_per_outlet > 0 {
        for (i, outlet) in outlets.iter().enumerate() {
            let w = mixture[i].clamp(0.02, 0.98);
            for a in 0..config.articles_per_outlet {
                let from_fnc = rng.gen::<f64>() < w;
                let sampler = if from_fnc { &fnc_sampler } else { &cnn_sampler };
                let mut text = String::with_capacity(config.snippet_words * 5);
                for wdx in 0..config.snippet_words {
                    if wdx > 0 {
                        text.push(' ');
                    }
                    text.push_str(&tokens[sampler.sample(&mut rng)]);
                }
                articles.push(Document {
                    id: format!("art_{}_{a:04}", outlet.outlet_id),
                    source: Source::Newspaper,
                    outlet_id: Some(outlet.outlet_id.clone()),
                    date: format!("200{}-0{}-01", 5 + a % 4, 1 + a % 9),
                    text,
                });
            }
        }
    }

    // Panel rows through the real join path, slant = mixture weight.
    let slants: Vec<SlantRecord> = outlets
        .iter()
        .enumerate()
        .map(|(i, o)| SlantRecord {
            outlet_id: o.outlet_id.clone(),
            slant: mixture[i],
            n_snippets: config.articles_per_outlet.max(1) as u64,
            subset: SlantSubset::All,
        })
        .collect();
    let inputs = PanelBuildInputs {
        counties: &counties,
        links: &links,
        outlets: &outlets,
        slants: &slants,
        language: None,
        topic_shares: None,
    };
    let (mut rows, _) = build_panel(&inputs)?;
    let exposure_by_outlet: BTreeMap<&str, (f64, f64)> = outlets
        .iter()
        .enumerate()
        .map(|(i, o)| (o.outlet_id.as_str(), (exposure_v[i], exposure_z[i])))
        .collect();
    for row in &mut rows {
        let (v_bar, z_bar) = exposure_by_outlet[row.outlet_id.as_str()];
        row.controls.insert("viewership_outlet_rel".into(), v_bar);
        row.controls.insert("position_outlet_rel".into(), z_bar);
    }

    Ok(PanelOutput {
        counties,
        links,
        outlets,
        articles,
        rows,
        truth: PanelTruth {
            delta_true: config.first_stage_delta,
            theta_mixture: config.effect_theta,
            theta_outcome: config.effect_theta,
            measurement_gap: 1.0,
            mixture_weights: mixture,
        },
    })
}

/// Replace each outlet's slant with a measured value from the hook (e.g. a
/// trained classifier's mean score over the outlet's articles), and rescale
/// the ground-truth θ by the supplied measurement gap.
pub fn apply_measurement(
    output: &mut PanelOutput,
    scorer: &dyn Fn(&[Snippet]) -> f64,
    measurement_gap: f64,
) {
    let mut by_outlet: BTreeMap<&str, Vec<Snippet>> = BTreeMap::new();
    for doc in &output.articles {
        let outlet = doc.outlet_id.as_deref().expect("articles carry outlets");
        by_outlet.entry(outlet).or_default().push(Snippet {
            doc_id: doc.id.clone(),
            index: 0,
            text: doc.text.clone(),
            word_count: doc.text.split_whitespace().count() as u32,
            label: None,
            outlet_id: doc.outlet_id.clone(),
        });
    }
    let measured: BTreeMap<String, f64> =
        by_outlet.into_iter().map(|(o, snips)| (o.to_string(), scorer(&snips))).collect();
    for row in &mut output.rows {
        if let Some(&slant) = measured.get(&row.outlet_id) {
            row.slant = slant;
        }
    }
    output.truth.measurement_gap = measurement_gap;
    output.truth.theta_outcome = output.truth.theta_mixture * measurement_gap;
}

/// Write the corpora and panel tables in the exact formats ingestion reads.
pub fn write_panel_files(dir: &Path, output: &PanelOutput) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let counties_path = dir.join("counties.csv");
    let mut f = std::fs::File::create(&counties_path).map_err(|e| Error::io(&counties_path, e))?;
    let demo_names: Vec<&String> =
        output.counties.first().map(|c| c.demographics.keys().collect()).unwrap_or_default();
    let mut header = String::from(
        "county_id,state,pos_fnc,pos_cnn,pos_msnbc,rating_fnc,rating_cnn,rating_msnbc,access_fnc,access_cnn,access_msnbc,population,surveyed_households",
    );
    for d in &demo_names {
        header.push(',');
        header.push_str(d);
    }
    writeln!(f, "{header}").map_err(|e| Error::io(&counties_path, e))?;
    for c in &output.counties {
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.county_id,
            c.state,
            c.positions[0],
            c.positions[1],
            c.positions[2],
            c.ratings[0],
            c.ratings[1],
            c.ratings[2],
            c.access_shares[0],
            c.access_shares[1],
            c.access_shares[2],
            c.population,
            c.surveyed_households
        );
        for d in &demo_names {
            line.push(',');
            line.push_str(&format!("{}", c.demographics[*d]));
        }
        writeln!(f, "{line}").map_err(|e| Error::io(&counties_path, e))?;
    }

    let links_path = dir.join("circulation.csv");
    let mut f = std::fs::File::create(&links_path).map_err(|e| Error::io(&links_path, e))?;
    writeln!(f, "outlet_id,county_id,circulation,circulation_1995")
        .map_err(|e| Error::io(&links_path, e))?;
    for l in &output.links {
        writeln!(
            f,
            "{},{},{},{}",
            l.outlet_id,
            l.county_id,
            l.circulation,
            l.circulation_1995.map(|v| format!("{v}")).unwrap_or_default()
        )
        .map_err(|e| Error::io(&links_path, e))?;
    }

    let outlets_path = dir.join("outlets.csv");
    let mut f = std::fs::File::create(&outlets_path).map_err(|e| Error::io(&outlets_path, e))?;
    writeln!(f, "outlet_id,name,endorsement_1996,hq_county")
        .map_err(|e| Error::io(&outlets_path, e))?;
    for o in &output.outlets {
        let endorsement = match o.endorsement_1996 {
            Endorsement::Dem => "DEM",
            Endorsement::Rep => "REP",
            Endorsement::None => "NONE",
        };
        writeln!(
            f,
            "{},{},{},{}",
            o.outlet_id,
            o.name,
            endorsement,
            o.headquarters_county.as_deref().unwrap_or("")
        )
        .map_err(|e| Error::io(&outlets_path, e))?;
    }
    Ok(())
}

/// Write documents as the JSONL corpus format ingestion reads.
pub fn write_corpus_jsonl(path: &Path, docs: &[Document]) -> Result<()> {
    use std::io::Write;
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        date: &'a str,
        text: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        outlet_id: Option<&'a str>,
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for d in docs {
        let line = Line {
            id: &d.id,
            date: &d.date,
            text: &d.text,
            outlet_id: d.outlet_id.as_deref(),
        };
        writeln!(f, "{}", serde_json::to_string(&line).expect("document serializes"))
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Snippets rendered as labeled documents (for emitting channel corpora).
pub fn snippets_as_documents(snippets: &[Snippet]) -> Vec<Document> {
    snippets
        .iter()
        .map(|s| Document {
            id: s.doc_id.clone(),
            source: match s.label {
                Some(true) => Source::Fnc,
                Some(false) => Source::CnnMsnbc,
                None => Source::Newspaper,
            },
            outlet_id: s.outlet_id.clone(),
            date: "2006-06-15".into(),
            text: s.text.clone(),
        })
        .collect()
}
