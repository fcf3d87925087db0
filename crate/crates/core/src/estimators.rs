//! Per-cell sufficient statistics: cell probabilities, conditional group
//! probabilities, cell means, group-cell means, and cell covariances —
//! estimated either empirically or with dissimilarity-kernel smoothing
//! across cells.
//!
//! Both estimators are derived from one set of raw per-cell sums, so the
//! smoothed estimator at λ = 0 reproduces the empirical one exactly on every
//! non-empty cell (the identity weight matrix contributes the cell's own
//! sums and nothing else).

use serde::Serialize;

use crate::data::{decode_cell, CellIndex, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{sub_vec, Matrix};
use crate::scalar::Real;

/// Read-only view of a per-cell model, shared by estimated and exact
/// population parameters. Group indices are 1-based to match labels.
pub trait CellModel<T: Real> {
    fn dim(&self) -> usize;
    fn groups(&self) -> usize;
    fn cell_count(&self) -> usize;
    fn cell_prob(&self, m: CellIndex) -> T;
    /// `P(Z = l | U = m)`.
    fn group_given_cell(&self, l: usize, m: CellIndex) -> T;
    fn cell_mean(&self, m: CellIndex) -> Option<&[T]>;
    fn group_cell_mean(&self, l: usize, m: CellIndex) -> Option<&[T]>;
    fn cell_cov(&self, m: CellIndex) -> Option<&Matrix<T>>;
    fn cell_is_empty(&self, m: CellIndex) -> bool {
        self.cell_mean(m).is_none()
    }
}

/// Estimated per-cell statistics. Cells with no (smoothed) mass keep `None`
/// moments and zero probability; consumers weight them out rather than
/// tripping over NaNs.
#[derive(Clone, Debug, Serialize)]
pub struct CellEstimates<T> {
    pub p: usize,
    pub q: usize,
    pub cells: usize,
    pub n: usize,
    /// Raw observation count per cell.
    pub n_m: Vec<usize>,
    /// Raw observation count per (cell, group), indexed `[m][l]`.
    pub n_lm: Vec<Vec<usize>>,
    /// Cell probabilities, sum to one.
    pub p_m: Vec<T>,
    /// `P(Z = l | U = m)`, indexed `[m][l]`; zero row on empty cells.
    #[serde(rename = "p_l_given_m")]
    pub p_lm: Vec<Vec<T>>,
    /// `P(U = m | Z = l)`, indexed `[m][l]` (classification side).
    #[serde(rename = "p_m_given_l")]
    pub p_ml: Vec<Vec<T>>,
    /// Cell means.
    pub mu_m: Vec<Option<Vec<T>>>,
    /// Group-cell means, indexed `[m][l]`.
    pub mu_lm: Vec<Vec<Option<Vec<T>>>>,
    /// Cell covariances (biased 1/N normalization).
    #[serde(rename = "V_m")]
    pub v_m: Vec<Option<Matrix<T>>>,
}

impl<T: Real> CellModel<T> for CellEstimates<T> {
    fn dim(&self) -> usize {
        self.p
    }

    fn groups(&self) -> usize {
        self.q
    }

    fn cell_count(&self) -> usize {
        self.cells
    }

    fn cell_prob(&self, m: CellIndex) -> T {
        self.p_m[m.pos()]
    }

    fn group_given_cell(&self, l: usize, m: CellIndex) -> T {
        self.p_lm[m.pos()][l - 1]
    }

    fn cell_mean(&self, m: CellIndex) -> Option<&[T]> {
        self.mu_m[m.pos()].as_deref()
    }

    fn group_cell_mean(&self, l: usize, m: CellIndex) -> Option<&[T]> {
        self.mu_lm[m.pos()][l - 1].as_deref()
    }

    fn cell_cov(&self, m: CellIndex) -> Option<&Matrix<T>> {
        self.v_m[m.pos()].as_ref()
    }
}

/// Cell dissimilarities and the kernel weights built from them.
#[derive(Clone, Debug)]
pub struct SmoothingWeights<T> {
    pub lambda: T,
    /// Squared Euclidean distance between decoded binary patterns, which on
    /// bits is the Hamming distance. Symmetric, zero diagonal.
    pub dissim: Vec<Vec<u32>>,
    /// `w(m, k) = λ^D(m,k)` with the convention `0^0 = 1`.
    pub w: Matrix<T>,
}

/// Builds the `M × M` weight matrix for `M = 2^d` cells.
pub fn smoothing_weights<T: Real>(d: usize, lambda: T) -> Result<SmoothingWeights<T>> {
    if !(lambda >= T::zero() && lambda < T::one()) {
        return Err(Error::Config(format!("smoothing lambda must lie in [0, 1), got {lambda}")));
    }
    let cells = 1usize << d;
    let mut dissim = vec![vec![0u32; cells]; cells];
    for m in 0..cells {
        for k in 0..cells {
            let a = decode_cell(CellIndex(m + 1), d).expect("in range");
            let b = decode_cell(CellIndex(k + 1), d).expect("in range");
            dissim[m][k] = a.iter().zip(&b).map(|(&x, &y)| (x ^ y) as u32).sum();
        }
    }
    let w = Matrix::from_fn(cells, cells, |m, k| lambda.powi(dissim[m][k] as i32));
    Ok(SmoothingWeights { lambda, dissim, w })
}

/// Raw per-cell sums, computed in one place so the two estimators share the
/// exact same arithmetic.
struct RawCellStats<T> {
    n_m: Vec<usize>,
    n_lm: Vec<Vec<usize>>,
    sum_x_m: Vec<Vec<T>>,
    sum_x_lm: Vec<Vec<Vec<T>>>,
    /// Cell mean where the cell is non-empty (sum / count).
    mu_m: Vec<Option<Vec<T>>>,
    /// Scatter around the cell's own mean: `Σ_{i∈m} (x_i − μ̂_m)(x_i − μ̂_m)ᵀ`.
    scatter_m: Vec<Matrix<T>>,
}

fn raw_cell_stats<T: Real>(ds: &Dataset<T>) -> RawCellStats<T> {
    let p = ds.p();
    let q = ds.q();
    let cells = ds.cells();
    let mut n_m = vec![0usize; cells];
    let mut n_lm = vec![vec![0usize; q]; cells];
    let mut sum_x_m = vec![vec![T::zero(); p]; cells];
    let mut sum_x_lm = vec![vec![vec![T::zero(); p]; q]; cells];
    for obs in ds.observations() {
        let m = obs.cell().pos();
        let l = obs.z - 1;
        n_m[m] += 1;
        n_lm[m][l] += 1;
        for j in 0..p {
            sum_x_m[m][j] += obs.x[j];
            sum_x_lm[m][l][j] += obs.x[j];
        }
    }
    let mu_m: Vec<Option<Vec<T>>> = (0..cells)
        .map(|m| {
            (n_m[m] > 0).then(|| {
                let count = T::of_usize(n_m[m]);
                sum_x_m[m].iter().map(|&s| s / count).collect()
            })
        })
        .collect();
    let mut scatter_m = vec![Matrix::zeros(p, p); cells];
    for obs in ds.observations() {
        let m = obs.cell().pos();
        let mu = mu_m[m].as_ref().expect("occupied cell has a mean");
        let dev = sub_vec(&obs.x, mu);
        scatter_m[m].add_outer(T::one(), &dev);
    }
    RawCellStats { n_m, n_lm, sum_x_m, sum_x_lm, mu_m, scatter_m }
}

/// Empirical estimator: cell-relative frequencies and per-cell moments with
/// biased (1/N) covariance normalization. Empty cells are flagged, not
/// errors; their probability is exactly zero.
pub fn estimate_empirical<T: Real>(ds: &Dataset<T>) -> CellEstimates<T> {
    let raw = raw_cell_stats(ds);
    let p = ds.p();
    let q = ds.q();
    let cells = ds.cells();
    let n = ds.len();
    let n_scalar = T::of_usize(n);
    let n_l = ds.group_counts();

    let p_m: Vec<T> = raw.n_m.iter().map(|&c| T::of_usize(c) / n_scalar).collect();
    let mut p_lm = vec![vec![T::zero(); q]; cells];
    let mut p_ml = vec![vec![T::zero(); q]; cells];
    let mut mu_lm: Vec<Vec<Option<Vec<T>>>> = vec![vec![None; q]; cells];
    let mut v_m: Vec<Option<Matrix<T>>> = vec![None; cells];
    for m in 0..cells {
        if raw.n_m[m] == 0 {
            continue;
        }
        let count = T::of_usize(raw.n_m[m]);
        for l in 0..q {
            p_lm[m][l] = T::of_usize(raw.n_lm[m][l]) / count;
            if n_l[l] > 0 {
                p_ml[m][l] = T::of_usize(raw.n_lm[m][l]) / T::of_usize(n_l[l]);
            }
            if raw.n_lm[m][l] > 0 {
                let cl = T::of_usize(raw.n_lm[m][l]);
                mu_lm[m][l] = Some(raw.sum_x_lm[m][l].iter().map(|&s| s / cl).collect());
            }
        }
        let mut cov = raw.scatter_m[m].scale(T::one() / count);
        cov.symmetrize();
        v_m[m] = Some(cov);
    }
    CellEstimates {
        p,
        q,
        cells,
        n,
        n_m: raw.n_m,
        n_lm: raw.n_lm,
        p_m,
        p_lm,
        p_ml,
        mu_m: raw.mu_m,
        mu_lm,
        v_m,
    }
}

/// Smoothed estimator: every per-cell statistic borrows strength from the
/// other cells with weight `λ^D(m,k)`. At λ = 0 this reduces to
/// [`estimate_empirical`] on non-empty cells.
pub fn estimate_smoothed<T: Real>(ds: &Dataset<T>, lambda: T) -> Result<CellEstimates<T>> {
    let weights = smoothing_weights(ds.d(), lambda)?;
    let raw = raw_cell_stats(ds);
    let p = ds.p();
    let q = ds.q();
    let cells = ds.cells();
    let w = &weights.w;

    // weighted masses per cell and per (cell, group)
    let mass_m: Vec<T> = (0..cells)
        .map(|m| (0..cells).map(|j| w[(m, j)] * T::of_usize(raw.n_m[j])).sum())
        .collect();
    let mass_lm: Vec<Vec<T>> = (0..cells)
        .map(|m| {
            (0..q)
                .map(|l| (0..cells).map(|j| w[(m, j)] * T::of_usize(raw.n_lm[j][l])).sum())
                .collect()
        })
        .collect();
    let total: T = mass_m.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::Numerical("smoothed estimator has zero total mass".into()));
    }
    // column sums per group for the P(U=m | Z=l) normalization
    let group_totals: Vec<T> = (0..q).map(|l| (0..cells).map(|m| mass_lm[m][l]).sum()).collect();

    let p_m: Vec<T> = mass_m.iter().map(|&s| s / total).collect();
    let mut p_lm = vec![vec![T::zero(); q]; cells];
    let mut p_ml = vec![vec![T::zero(); q]; cells];
    let mut mu_m: Vec<Option<Vec<T>>> = vec![None; cells];
    let mut mu_lm: Vec<Vec<Option<Vec<T>>>> = vec![vec![None; q]; cells];
    let mut v_m: Vec<Option<Matrix<T>>> = vec![None; cells];

    for m in 0..cells {
        if mass_m[m] <= T::zero() {
            // reachable only at λ = 0 on a raw-empty cell: same flag as empirical
            continue;
        }
        // weighted mean
        let mut sx = vec![T::zero(); p];
        for j in 0..cells {
            let wj = w[(m, j)];
            for k in 0..p {
                sx[k] += wj * raw.sum_x_m[j][k];
            }
        }
        let mean: Vec<T> = sx.iter().map(|&s| s / mass_m[m]).collect();
        // weighted scatter around the smoothed mean, recentered per cell:
        // Σ_{i∈j}(x_i − μ̃)(x_i − μ̃)ᵀ = C_j + N_j (μ̂_j − μ̃)(μ̂_j − μ̃)ᵀ
        let mut scatter = Matrix::zeros(p, p);
        for j in 0..cells {
            if raw.n_m[j] == 0 {
                continue;
            }
            let wj = w[(m, j)];
            if wj == T::zero() {
                continue;
            }
            let shift = sub_vec(raw.mu_m[j].as_ref().expect("occupied"), &mean);
            let mut cj = raw.scatter_m[j].clone();
            cj.add_outer(T::of_usize(raw.n_m[j]), &shift);
            scatter = scatter.add(&cj.scale(wj));
        }
        let mut cov = scatter.scale(T::one() / mass_m[m]);
        cov.symmetrize();
        for l in 0..q {
            p_lm[m][l] = mass_lm[m][l] / mass_m[m];
            if group_totals[l] > T::zero() {
                p_ml[m][l] = mass_lm[m][l] / group_totals[l];
            }
            if mass_lm[m][l] > T::zero() {
                let mut sxl = vec![T::zero(); p];
                for j in 0..cells {
                    let wj = w[(m, j)];
                    for k in 0..p {
                        sxl[k] += wj * raw.sum_x_lm[j][l][k];
                    }
                }
                mu_lm[m][l] = Some(sxl.iter().map(|&s| s / mass_lm[m][l]).collect());
            }
        }
        mu_m[m] = Some(mean);
        v_m[m] = Some(cov);
    }

    Ok(CellEstimates {
        p,
        q,
        cells,
        n: ds.len(),
        n_m: raw.n_m,
        n_lm: raw.n_lm,
        p_m,
        p_lm,
        p_ml,
        mu_m,
        mu_lm,
        v_m,
    })
}

/// Pooled within-(group, cell) covariance:
/// `Σ̂ = (1/n) Σ_i (x_i − μ_{z_i, u_i}) ⊗ (x_i − μ_{z_i, u_i})`
/// with the stratum means taken from `est` (empirical or smoothed).
pub fn pooled_within_covariance<T: Real>(ds: &Dataset<T>, est: &CellEstimates<T>) -> Result<Matrix<T>> {
    let p = ds.p();
    let mut acc = Matrix::zeros(p, p);
    for obs in ds.observations() {
        let m = obs.cell();
        let mu = est
            .group_cell_mean(obs.z, m)
            .ok_or_else(|| Error::Numerical(format!("stratum (group {}, cell {m}) has no mean in the estimates", obs.z)))?;
        let dev = sub_vec(&obs.x, mu);
        acc.add_outer(T::one(), &dev);
    }
    let mut cov = acc.scale(T::one() / T::of_usize(ds.len()));
    cov.symmetrize();
    Ok(cov)
}
