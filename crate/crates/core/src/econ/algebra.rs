//! Dense regression kernels: weighted least squares with absorbed fixed
//! effects, two-stage least squares, and cluster-robust covariance.
//!
//! Fixed effects are absorbed by the weighted within-transformation
//! (subtracting weighted group means), which reproduces explicit-dummy
//! coefficients exactly. Cluster covariance follows the familiar sandwich
//! with cluster-summed scores; the two-way estimator combines the three
//! one-way pieces by inclusion–exclusion (Cameron–Gelbach–Miller), with a
//! small-sample factor G/(G−1)·(n−1)/(n−k) per component and negative
//! eigenvalues of the combined matrix clipped to zero.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Weighted mean of each column within each group subtracted in place.
/// Returns per-group weighted means of the column set for later recovery of
/// absorbed intercepts. Zero-weight groups fall back to unweighted means.
pub fn within_transform(
    columns: &mut [Vec<f64>],
    groups: &[u32],
    weights: &[f64],
    n_groups: usize,
) -> Vec<Vec<f64>> {
    let mut weight_sums = vec![0.0f64; n_groups];
    let mut count = vec![0u64; n_groups];
    for (&g, &w) in groups.iter().zip(weights) {
        weight_sums[g as usize] += w;
        count[g as usize] += 1;
    }
    let mut means = Vec::with_capacity(columns.len());
    for col in columns.iter_mut() {
        let mut sums = vec![0.0f64; n_groups];
        for ((&g, &w), &v) in groups.iter().zip(weights).zip(col.iter()) {
            sums[g as usize] += w * v;
        }
        let mut unweighted = vec![0.0f64; n_groups];
        for (&g, &v) in groups.iter().zip(col.iter()) {
            unweighted[g as usize] += v;
        }
        let group_means: Vec<f64> = (0..n_groups)
            .map(|g| {
                if weight_sums[g] > 0.0 {
                    sums[g] / weight_sums[g]
                } else if count[g] > 0 {
                    unweighted[g] / count[g] as f64
                } else {
                    0.0
                }
            })
            .collect();
        for (&g, v) in groups.iter().zip(col.iter_mut()) {
            *v -= group_means[g as usize];
        }
        means.push(group_means);
    }
    means
}

/// Solution of a weighted least-squares problem.
#[derive(Debug)]
pub struct WlsSolution {
    pub beta: DVector<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// (X'WX)⁻¹, the sandwich bread.
    pub bread: DMatrix<f64>,
}

/// β = (X'WX)⁻¹X'Wy. Rank deficiency is an error naming the collinear
/// columns (diagnosed by column-pivoted QR of the weighted design).
pub fn solve_wls(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    names: &[String],
) -> Result<WlsSolution> {
    let n = x.nrows();
    let p = x.ncols();
    if n < p {
        return Err(Error::validation(format!("{n} rows cannot identify {p} coefficients")));
    }
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    for i in 0..n {
        let w = weights[i];
        for a in 0..p {
            let xa = x[(i, a)];
            xtwy[a] += w * xa * y[i];
            for b in a..p {
                xtwx[(a, b)] += w * xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }

    let chol = xtwx.clone().cholesky();
    let bread = match chol {
        Some(c) => c.inverse(),
        None => return Err(rank_deficiency_error(x, weights, names)),
    };
    // Guard against near-singular designs that slip past Cholesky.
    let cond_probe = (&bread * &xtwx - DMatrix::<f64>::identity(p, p)).abs().max();
    if !cond_probe.is_finite() || cond_probe > 1e-4 {
        return Err(rank_deficiency_error(x, weights, names));
    }

    let beta = &bread * &xtwy;
    let mut fitted = vec![0.0; n];
    let mut residuals = vec![0.0; n];
    for i in 0..n {
        let mut f = 0.0;
        for a in 0..p {
            f += x[(i, a)] * beta[a];
        }
        fitted[i] = f;
        residuals[i] = y[i] - f;
    }
    Ok(WlsSolution { beta, residuals, fitted, bread })
}

fn rank_deficiency_error(x: &DMatrix<f64>, weights: &[f64], names: &[String]) -> Error {
    // Greedily grow an independent column set on the weighted Gram matrix;
    // columns that cannot be added are the collinear ones.
    let p = x.ncols();
    let n = x.nrows();
    let mut gram = DMatrix::zeros(p, p);
    for i in 0..n {
        let w = weights[i].max(0.0);
        for a in 0..p {
            for b in a..p {
                gram[(a, b)] += w * x[(i, a)] * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let scale = (0..p).map(|j| gram[(j, j)]).fold(0.0f64, f64::max).max(1e-300);
    let mut kept: Vec<usize> = Vec::new();
    let mut collinear = Vec::new();
    for j in 0..p {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = DMatrix::from_fn(trial.len(), trial.len(), |a, b| gram[(trial[a], trial[b])]);
        let ok = match sub.cholesky() {
            Some(c) => c.l().diagonal().iter().all(|d| d * d > 1e-12 * scale),
            None => false,
        };
        if ok {
            kept.push(j);
        } else {
            collinear.push(names.get(j).cloned().unwrap_or_else(|| format!("col{j}")));
        }
    }
    if collinear.is_empty() {
        collinear.push("(unidentified)".into());
    }
    Error::computation(format!(
        "design matrix is rank deficient; collinear columns: {}",
        collinear.join(", ")
    ))
}

/// One-way cluster-robust "meat": Σ_g s_g s_g' with s_g = Σ_{i∈g} w_i e_i x_i,
/// scaled by G/(G−1)·(n−1)/(n−k).
fn cluster_meat(
    x: &DMatrix<f64>,
    residuals: &[f64],
    weights: &[f64],
    cluster_ids: &[u64],
    dof_k: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let n = x.nrows();
    let p = x.ncols();
    let mut clusters: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, &c) in cluster_ids.iter().enumerate() {
        clusters.entry(c).or_default().push(i);
    }
    let g = clusters.len();
    if g < 2 {
        return Err(Error::validation("each cluster dimension needs at least 2 clusters"));
    }
    let mut meat = DMatrix::zeros(p, p);
    // Deterministic accumulation order.
    let mut keys: Vec<&u64> = clusters.keys().collect();
    keys.sort();
    for key in keys {
        let rows = &clusters[key];
        let mut score = vec![0.0f64; p];
        for &i in rows {
            let we = weights[i] * residuals[i];
            for a in 0..p {
                score[a] += we * x[(i, a)];
            }
        }
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += score[a] * score[b];
            }
        }
    }
    let gf = g as f64;
    let nf = n as f64;
    let kf = dof_k as f64;
    let correction =
        if nf > kf { (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf)) } else { gf / (gf - 1.0) };
    Ok((meat * correction, g))
}

/// Cluster-robust covariance for one or two cluster dimensions.
///
/// `dof_k` counts all estimated parameters including absorbed fixed-effect
/// intercepts. Returns (covariance, clipped eigenvalue count, G per
/// dimension).
pub fn cluster_cov(
    x: &DMatrix<f64>,
    residuals: &[f64],
    weights: &[f64],
    bread: &DMatrix<f64>,
    clusters: &[Vec<u64>],
    dof_k: usize,
) -> Result<(DMatrix<f64>, usize, Vec<usize>)> {
    if clusters.is_empty() || clusters.len() > 2 {
        return Err(Error::validation("cluster_cov takes one or two cluster dimensions"));
    }
    let n = x.nrows();
    for dim in clusters {
        if dim.len() != n {
            return Err(Error::validation("cluster ids must cover every row"));
        }
    }
    let mut g_sizes = Vec::new();
    let cov = if clusters.len() == 1 {
        let (meat, g) = cluster_meat(x, residuals, weights, &clusters[0], dof_k)?;
        g_sizes.push(g);
        bread * meat * bread
    } else {
        let (meat_a, ga) = cluster_meat(x, residuals, weights, &clusters[0], dof_k)?;
        let (meat_b, gb) = cluster_meat(x, residuals, weights, &clusters[1], dof_k)?;
        // Intersection clustering: rows sharing both ids.
        let mut pair_ids: HashMap<(u64, u64), u64> = HashMap::new();
        let mut inter = Vec::with_capacity(n);
        for i in 0..n {
            let key = (clusters[0][i], clusters[1][i]);
            let next = pair_ids.len() as u64;
            inter.push(*pair_ids.entry(key).or_insert(next));
        }
        let (meat_ab, gab) = cluster_meat(x, residuals, weights, &inter, dof_k)?;
        g_sizes.push(ga);
        g_sizes.push(gb);
        g_sizes.push(gab);
        bread * (meat_a + meat_b - meat_ab) * bread
    };

    // Symmetrize, then clip negative eigenvalues (possible after
    // inclusion–exclusion) to keep the matrix positive semidefinite.
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    let clipped = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    let cov = if clipped > 0 {
        let mut vals = eig.eigenvalues.clone();
        vals.iter_mut().for_each(|v| *v = v.max(0.0));
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    } else {
        sym
    };
    Ok((cov, clipped, g_sizes))
}
