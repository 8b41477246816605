//! Plot-ready data emitters: residualized binned scatterplots, calibration
//! curves, and distinctive-coefficient listings.
//!
//! Binscatters residualize both axes on fixed effects (plus any requested
//! controls) with the same weighted projection the regression module uses,
//! then cut observations into weight-balanced bins along the x residual and
//! report weighted bin means.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::classifier::{top_coefficients, EvalReport, LogisticModel};
use crate::econ::{complete_rows, estimation_weights, partial_out, PanelRow};
use crate::error::{Error, Result};
use crate::features::FeatureSelector;

#[derive(Debug, Clone, Serialize)]
pub struct Bin {
    pub x_mean: f64,
    pub y_mean: f64,
    pub weight: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinScatter {
    pub y_column: String,
    pub x_column: String,
    pub bins: Vec<Bin>,
}

/// Residualize `y_column` and `x_column` on the fixed effects and controls,
/// then average within `n_bins` weight-balanced bins of the x residual.
pub fn binscatter(
    panel: &[PanelRow],
    y_column: &str,
    x_column: &str,
    controls: &[String],
    fe: Option<&str>,
    weight: Option<&str>,
    n_bins: usize,
) -> Result<BinScatter> {
    if n_bins < 1 {
        return Err(Error::validation("need at least one bin"));
    }
    // Pin one estimation sample up front so both residualizations align.
    let mut required = controls.to_vec();
    required.push(y_column.to_string());
    required.push(x_column.to_string());
    let sample = complete_rows(panel, &required, weight);
    let y_res = partial_out(&sample, y_column, controls, fe, weight)?;
    let x_res = partial_out(&sample, x_column, controls, fe, weight)?;
    let weights = estimation_weights(&sample, y_column, controls, fe, weight)?;
    if y_res.len() != x_res.len() || y_res.len() != weights.len() {
        return Err(Error::computation("binscatter axes disagree on the estimation sample"));
    }
    let n = y_res.len();
    if n < n_bins {
        return Err(Error::validation(format!("{n} observations cannot fill {n_bins} bins")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x_res[a].partial_cmp(&x_res[b]).unwrap());
    let total_weight: f64 = weights.iter().sum();
    let target = total_weight / n_bins as f64;

    let mut bins = Vec::with_capacity(n_bins);
    let mut acc_w = 0.0;
    let mut bin = (0.0f64, 0.0f64, 0.0f64, 0usize); // (Σwx, Σwy, Σw, count)
    let mut closed = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        let w = weights[i];
        bin.0 += w * x_res[i];
        bin.1 += w * y_res[i];
        bin.2 += w;
        bin.3 += 1;
        acc_w += w;
        let remaining_rows = n - rank - 1;
        let remaining_bins = n_bins - closed - 1;
        if closed + 1 < n_bins
            && acc_w >= target * (closed + 1) as f64
            && remaining_rows >= remaining_bins
        {
            bins.push(Bin { x_mean: bin.0 / bin.2, y_mean: bin.1 / bin.2, weight: bin.2, count: bin.3 });
            bin = (0.0, 0.0, 0.0, 0);
            closed += 1;
        }
    }
    if bin.3 > 0 {
        bins.push(Bin { x_mean: bin.0 / bin.2, y_mean: bin.1 / bin.2, weight: bin.2, count: bin.3 });
    }
    Ok(BinScatter { y_column: y_column.into(), x_column: x_column.into(), bins })
}

pub fn write_binscatter_csv(path: &Path, scatter: &BinScatter) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "bin,x_mean,y_mean,weight,count").map_err(|e| Error::io(path, e))?;
    for (i, b) in scatter.bins.iter().enumerate() {
        writeln!(f, "{},{},{},{},{}", i, b.x_mean, b.y_mean, b.weight, b.count)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Calibration-curve data in the 20-bin layout.
pub fn write_calibration_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "bin_lo,bin_hi,mean_prediction,empirical_rate,count")
        .map_err(|e| Error::io(path, e))?;
    for b in &report.calibration {
        writeln!(
            f,
            "{},{},{},{},{}",
            b.lo,
            b.hi,
            b.mean_prediction.map(|v| format!("{v}")).unwrap_or_default(),
            b.empirical_rate.map(|v| format!("{v}")).unwrap_or_default(),
            b.count
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn write_confusion_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "actual,predicted_cnn,predicted_fnc").map_err(|e| Error::io(path, e))?;
    writeln!(f, "cnn,{},{}", report.confusion[0][0], report.confusion[0][1])
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "fnc,{},{}", report.confusion[1][0], report.confusion[1][1])
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// The strongest coefficients on each side, in the two-column listing style.
pub fn write_distinctive_bigrams_csv(
    path: &Path,
    model: &LogisticModel,
    selector: &FeatureSelector,
    n: usize,
) -> Result<()> {
    let (pos, neg) = top_coefficients(model, selector, n);
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "rank,fnc_bigram,fnc_psi,cnn_bigram,cnn_psi").map_err(|e| Error::io(path, e))?;
    for i in 0..pos.len().max(neg.len()) {
        let (pb, pv) = pos.get(i).map(|&(b, v)| (b, format!("{v}"))).unwrap_or(("", String::new()));
        let (nb, nv) = neg.get(i).map(|&(b, v)| (b, format!("{v}"))).unwrap_or(("", String::new()));
        writeln!(f, "{},{},{},{},{}", i + 1, pb, pv, nb, nv).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn panel(n: usize, seed: u64) -> Vec<PanelRow> {
        let mut rng = crate::rng::stream(seed, "report_panel");
        (0..n)
            .map(|i| {
                let x: f64 = rng.gen_range(-2.0..2.0);
                let mut controls = BTreeMap::new();
                controls.insert("x".into(), x);
                controls.insert("d".into(), rng.gen_range(-1.0..1.0));
                PanelRow {
                    outlet_id: format!("o{}", i % 11),
                    county_id: format!("c{}", i % 7),
                    state: ["TX", "OH", "VT"][i % 3].into(),
                    slant: 0.4 + 0.1 * x + 0.02 * rng.gen_range(-1.0..1.0),
                    viewership: [0.0; 3],
                    position: [0.0; 3],
                    controls,
                    weight: rng.gen_range(0.5..3.0),
                    endorsement: crate::corpus::Endorsement::None,
                    rep_vote_1996: 0.5,
                }
            })
            .collect()
    }

    #[test]
    fn binscatter_has_weight_balanced_bins_and_recovers_slope() {
        let rows = panel(400, 1);
        let scatter = binscatter(
            &rows,
            "slant",
            "x",
            &["d".into()],
            Some("state"),
            Some("circulation"),
            16,
        )
        .unwrap();
        assert_eq!(scatter.bins.len(), 16);
        let total: f64 = scatter.bins.iter().map(|b| b.weight).sum();
        let target = total / 16.0;
        for b in &scatter.bins {
            assert!(b.count > 0);
            assert!(b.weight < 2.5 * target, "bin weight {} vs target {target}", b.weight);
        }
        // x means increase across bins; slope of y on x across bins ≈ 0.1.
        for pair in scatter.bins.windows(2) {
            assert!(pair[0].x_mean <= pair[1].x_mean);
        }
        let first = scatter.bins.first().unwrap();
        let last = scatter.bins.last().unwrap();
        let slope = (last.y_mean - first.y_mean) / (last.x_mean - first.x_mean);
        assert!((slope - 0.1).abs() < 0.03, "slope {slope}");
    }

    #[test]
    fn binscatter_residualization_matches_partial_out() {
        let rows = panel(120, 2);
        // With zero bins of slack: means of residuals are zero overall.
        let scatter =
            binscatter(&rows, "slant", "x", &[], Some("state"), Some("circulation"), 8).unwrap();
        let total_w: f64 = scatter.bins.iter().map(|b| b.weight).sum();
        let grand_y: f64 =
            scatter.bins.iter().map(|b| b.y_mean * b.weight).sum::<f64>() / total_w;
        assert!(grand_y.abs() < 1e-10, "weighted residual mean {grand_y}");
    }

    #[test]
    fn binscatter_rejects_too_few_rows() {
        let rows = panel(5, 3);
        assert!(binscatter(&rows, "slant", "x", &[], None, None, 16).is_err());
    }
}
