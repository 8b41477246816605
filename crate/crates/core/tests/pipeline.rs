//! Full synthetic pipeline at the library level: generate channel corpora,
//! train the classifier, measure outlet slant by scoring generated articles,
//! and check that instrumented estimation recovers the planted effect on the
//! measured-slant scale.

use slant_core::classifier::{predict_proba, train, TrainConfig};
use slant_core::corpus::{stratified_split, Snippet};
use slant_core::econ::{tsls, wls, RegressionSpec, SampleFilter};
use slant_core::features::{
    build_vocabulary, chi2_scores, fit_scaler, select_top_k, vectorize, Chi2Mode, FeatureSelector,
};
use slant_core::scoring::{aggregate_slant, score_corpus, SlantSubset};
use slant_core::synth::{apply_measurement, gen_channel_corpora, gen_panel, SynthConfig};
use slant_core::textprep;

fn synth_config() -> SynthConfig {
    SynthConfig {
        vocab_size: 200,
        separation: 0.3,
        charged_count: 10,
        charged_mass: 0.7,
        n_snippets: 4_000,
        snippet_words: 60,
        n_counties: 150,
        n_outlets: 80,
        n_states: 10,
        max_extra_counties: 2,
        articles_per_outlet: 150,
        seed: 7_001,
        ..SynthConfig::default()
    }
}

#[test]
fn planted_effect_recovered_through_text_measurement() {
    let config = synth_config();
    let stopwords = textprep::default_stopwords();

    // Train the classifier on the synthetic channel corpora.
    let (snippets, truth) = gen_channel_corpora(&config).unwrap();
    let bigrams: Vec<_> =
        snippets.iter().map(|s| textprep::snippet_bigrams(&s.text, &stopwords)).collect();
    let labels: Vec<bool> = snippets.iter().map(|s| s.label.unwrap()).collect();
    let (train_idx, _) = stratified_split(&labels, 0.8, 7_002);
    let train_bigrams: Vec<_> = train_idx.iter().map(|&i| bigrams[i].clone()).collect();
    let train_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let fnc: Vec<_> =
        bigrams.iter().zip(&labels).filter(|(_, &l)| l).map(|(b, _)| b.clone()).collect();
    let cnn: Vec<_> =
        bigrams.iter().zip(&labels).filter(|(_, &l)| !l).map(|(b, _)| b.clone()).collect();
    let vocab = build_vocabulary(&fnc, &cnn, 2).unwrap();
    let scores = chi2_scores(&train_bigrams, &train_labels, &vocab, Chi2Mode::Counts).unwrap();
    let k = 2000.min(vocab.len());
    let mut selector = select_top_k(&vocab, &scores, k).unwrap();
    fit_scaler(&mut selector, &train_bigrams).unwrap();
    let x_train: Vec<_> = train_bigrams.iter().map(|b| vectorize(b, &selector)).collect();
    let model = train(
        &x_train,
        &train_labels,
        k,
        &TrainConfig { lambda: 0.01, tol: 1e-6, ..TrainConfig::default() },
    )
    .unwrap();

    // Measurement gap from fresh channel text: the mean score difference
    // between pure-FNC and pure-CNN snippets.
    let eval_config = SynthConfig { n_snippets: 3_000, seed: 7_003, ..config.clone() };
    let (eval_snippets, _) = gen_channel_corpora(&eval_config).unwrap();
    let mean_score = |want: bool| -> f64 {
        let mut sum = 0.0;
        let mut n = 0.0;
        for s in eval_snippets.iter().filter(|s| s.label == Some(want)) {
            let v = vectorize(&textprep::snippet_bigrams(&s.text, &stopwords), &selector);
            sum += predict_proba(&model, &v).unwrap();
            n += 1.0;
        }
        sum / n
    };
    let gap = mean_score(true) - mean_score(false);
    assert!(gap > 0.3, "trained model should separate the channels, gap {gap}");

    // Generate the panel and replace latent slant with measured slant.
    let mut panel = gen_panel(&config).unwrap();
    let selector_ref: &FeatureSelector = &selector;
    let scorer = |snips: &[Snippet]| -> f64 {
        let scored = score_corpus(&model, selector_ref, snips, &stopwords).unwrap();
        let (records, _) = aggregate_slant(&scored, SlantSubset::All).unwrap();
        records[0].slant
    };
    apply_measurement(&mut panel, &scorer, gap);
    let theta_implied = panel.truth.theta_outcome;
    assert!((theta_implied - config.effect_theta * gap).abs() < 1e-12);
    assert!((truth.tv_distance - 0.3).abs() < 1e-12);

    // Instrumented estimation on the measured-slant panel.
    let spec = RegressionSpec {
        name: "e2e".into(),
        outcome: "slant".into(),
        treatment: "viewership_outlet_rel".into(),
        instruments: vec!["position_outlet_rel".into()],
        fe: Some("state".into()),
        controls: vec!["demo_income".into(), "demo_college".into(), "demo_urban".into()],
        weight: Some("circulation".into()),
        clusters: vec!["outlet".into(), "county".into()],
        standardize: false,
        standardize_weighted: false,
        filter: SampleFilter::default(),
    };
    let iv = tsls(&spec, &panel.rows).unwrap();
    let est = iv.theta().unwrap();
    let se = iv.theta_se().unwrap();
    assert!(
        (est - theta_implied).abs() < 1.96 * se,
        "95% CI [{:.4}, {:.4}] misses implied theta {:.4}",
        est - 1.96 * se,
        est + 1.96 * se,
        theta_implied
    );
    assert!(!iv.first_stage.as_ref().unwrap().weak, "first stage should be strong");

    // OLS drifts from the truth more than 2SLS under the planted confounder.
    let ols_spec = RegressionSpec { name: "e2e_ols".into(), instruments: vec![], ..spec };
    let ols = wls(&ols_spec, &panel.rows).unwrap();
    assert!(
        (ols.theta().unwrap() - theta_implied).abs() > (est - theta_implied).abs(),
        "OLS {:.4} should sit farther from {:.4} than 2SLS {:.4}",
        ols.theta().unwrap(),
        theta_implied,
        est
    );
}
