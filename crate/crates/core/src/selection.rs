//! Variable ordering and dimension estimation.
//!
//! Dropping variable `i` from the full set costs `ξ̂_{K_i}`; adding a
//! decreasing penalty `f_n(i)` and sorting non-increasingly yields the
//! permutation `σ̂`. Nested head-sets of that ordering are then scored with
//! `ψ̂_i = ξ̂_{Ĵ_i} + g_n(i)` for an increasing penalty `g_n`, and the first
//! minimizer gives the dimension `ŝ`. The selected set is `Î₁ = σ̂(1..ŝ)`.
//!
//! Penalties are `f_n(i) = n^{-α} / h(i)` and `g_n(i) = n^{-β} h(i)` for a
//! penalty family `h`; every logarithm inside the families is evaluated as
//! `ln(x+1)` so that `h` stays finite, positive, and strictly increasing on
//! `{1, ..., p}` (plain `ln 1 = 0` would make `f_n(1)` blow up).

use std::str::FromStr;

use serde::Serialize;

use crate::criterion::{criterion, VariableSet};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate_empirical, estimate_smoothed, CellEstimates};
use crate::scalar::Real;

/// The thirteen penalty shape functions `h_k` on `{1, ..., p}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PenaltyFamily {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
    H8,
    H9,
    H10,
    H11,
    H12,
    H13,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 13] = [
        PenaltyFamily::H1,
        PenaltyFamily::H2,
        PenaltyFamily::H3,
        PenaltyFamily::H4,
        PenaltyFamily::H5,
        PenaltyFamily::H6,
        PenaltyFamily::H7,
        PenaltyFamily::H8,
        PenaltyFamily::H9,
        PenaltyFamily::H10,
        PenaltyFamily::H11,
        PenaltyFamily::H12,
        PenaltyFamily::H13,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PenaltyFamily::H1 => "h1",
            PenaltyFamily::H2 => "h2",
            PenaltyFamily::H3 => "h3",
            PenaltyFamily::H4 => "h4",
            PenaltyFamily::H5 => "h5",
            PenaltyFamily::H6 => "h6",
            PenaltyFamily::H7 => "h7",
            PenaltyFamily::H8 => "h8",
            PenaltyFamily::H9 => "h9",
            PenaltyFamily::H10 => "h10",
            PenaltyFamily::H11 => "h11",
            PenaltyFamily::H12 => "h12",
            PenaltyFamily::H13 => "h13",
        }
    }

    /// Evaluates the guarded family at an integer argument `x ≥ 1`.
    pub fn value<T: Real>(self, x: usize) -> T {
        let x = T::of_usize(x);
        let lg = (x + T::one()).ln();
        match self {
            PenaltyFamily::H1 => x,
            PenaltyFamily::H2 => x.powf(T::of(0.1)),
            PenaltyFamily::H3 => x.powf(T::of(0.5)),
            PenaltyFamily::H4 => x.powf(T::of(0.9)),
            PenaltyFamily::H5 => x.powf(T::of(10.0)),
            PenaltyFamily::H6 => lg,
            PenaltyFamily::H7 => lg.powf(T::of(0.1)),
            PenaltyFamily::H8 => lg.powf(T::of(0.5)),
            PenaltyFamily::H9 => lg.powf(T::of(0.9)),
            PenaltyFamily::H10 => x * lg,
            PenaltyFamily::H11 => (x * lg).powf(T::of(0.1)),
            PenaltyFamily::H12 => (x * lg).powf(T::of(0.5)),
            PenaltyFamily::H13 => (x * lg).powf(T::of(0.9)),
        }
    }
}

impl std::fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PenaltyFamily::ALL
            .iter()
            .copied()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown penalty family '{s}', expected h1..h13")))
    }
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::of(0.5) {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in the open interval (0, 1/2), got {alpha}")))
    }
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if beta > T::zero() && beta < T::one() {
        Ok(())
    } else {
        Err(Error::Config(format!("beta must lie in the open interval (0, 1), got {beta}")))
    }
}

/// Ordering penalty `f_n(i) = n^{-α} / h(i)`, strictly decreasing in `i`.
pub fn penalty_f<T: Real>(n: usize, i: usize, alpha: T, family: PenaltyFamily) -> Result<T> {
    check_alpha(alpha)?;
    Ok(T::of_usize(n).powf(-alpha) / family.value(i))
}

/// Dimension penalty `g_n(i) = n^{-β} h(i)`, strictly increasing in `i`.
pub fn penalty_g<T: Real>(n: usize, i: usize, beta: T, family: PenaltyFamily) -> Result<T> {
    check_beta(beta)?;
    Ok(T::of_usize(n).powf(-beta) * family.value(i))
}

/// Which estimator backs the criterion evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EstimatorKind<T> {
    Empirical,
    Smoothed { lambda: T },
}

impl<T: Real> EstimatorKind<T> {
    pub fn estimate(self, ds: &Dataset<T>) -> Result<CellEstimates<T>> {
        match self {
            EstimatorKind::Empirical => Ok(estimate_empirical(ds)),
            EstimatorKind::Smoothed { lambda } => estimate_smoothed(ds, lambda),
        }
    }
}

/// Full configuration of a selection run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SelectionConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub penalty: PenaltyFamily,
    pub estimator: EstimatorKind<T>,
}

impl<T: Real> Default for SelectionConfig<T> {
    fn default() -> Self {
        SelectionConfig {
            alpha: T::of(0.25),
            beta: T::of(0.5),
            penalty: PenaltyFamily::H7,
            estimator: EstimatorKind::Empirical,
        }
    }
}

impl<T: Real> SelectionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_beta(self.beta)?;
        if let EstimatorKind::Smoothed { lambda } = self.estimator {
            if !(lambda >= T::zero() && lambda < T::one()) {
                return Err(Error::Config(format!("smoothing lambda must lie in [0, 1), got {lambda}")));
            }
        }
        Ok(())
    }
}

/// Ordering, dimension, selected set, and the full diagnostic traces.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionResult<T> {
    /// `sigma[r]` is the variable (1-based) at rank `r + 1`.
    pub sigma: Vec<usize>,
    pub s_hat: usize,
    pub selected: VariableSet,
    /// `φ̂_i`, indexed by variable `i` (1-based at offset 0).
    pub phi: Vec<T>,
    /// `ψ̂_r`, indexed by rank position.
    pub psi: Vec<T>,
    /// `ξ̂_{K_i}` for the drop-one sets, indexed by variable.
    pub xi_drop: Vec<T>,
    /// `ξ̂_{Ĵ_r}` for the nested head-sets, indexed by rank position.
    pub xi_nested: Vec<T>,
}

/// Orders variables by non-increasing score; exact ties resolve to the
/// smaller variable index first. Returns the rank → variable map.
pub fn estimate_sigma<T: Real>(phi: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=phi.len()).collect();
    order.sort_by(|&a, &b| {
        phi[b - 1]
            .partial_cmp(&phi[a - 1])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    order
}

/// First position attaining the minimum (1-based).
pub fn estimate_s<T: Real>(psi: &[T]) -> usize {
    let mut best = 0usize;
    for i in 1..psi.len() {
        if psi[i] < psi[best] {
            best = i;
        }
    }
    best + 1
}

/// Runs the whole selection pipeline on a dataset.
pub fn select_variables<T: Real>(ds: &Dataset<T>, cfg: &SelectionConfig<T>) -> Result<SelectionResult<T>> {
    cfg.validate()?;
    let p = ds.p();
    if p < 2 {
        return Err(Error::Config("selection needs at least two continuous variables".into()));
    }
    let est = cfg.estimator.estimate(ds)?;
    let n = ds.len();

    let mut xi_drop = Vec::with_capacity(p);
    let mut phi = Vec::with_capacity(p);
    for i in 1..=p {
        let xi = criterion(&est, &VariableSet::drop_one(p, i))?;
        xi_drop.push(xi);
        phi.push(xi + penalty_f(n, i, cfg.alpha, cfg.penalty)?);
    }
    let sigma = estimate_sigma(&phi);

    let mut xi_nested = Vec::with_capacity(p);
    let mut psi = Vec::with_capacity(p);
    for rank in 1..=p {
        let head = VariableSet::new(sigma[..rank].iter().copied());
        let xi = criterion(&est, &head)?;
        xi_nested.push(xi);
        psi.push(xi + penalty_g(n, rank, cfg.beta, cfg.penalty)?);
    }
    let s_hat = estimate_s(&psi);
    let selected = VariableSet::new(sigma[..s_hat].iter().copied());

    Ok(SelectionResult { sigma, s_hat, selected, phi, psi, xi_drop, xi_nested })
}
