//! Location-model classification restricted to a variable subset.
//!
//! Two-group rule: allocate `(x, y)` with cell `m` to group 1 when
//! `(μ_{m1} − μ_{m2})ᵀ Σ^{-1} (x_K − ½(μ_{m1} + μ_{m2})) ≥ log(p_{m2}/p_{m1}) + log α`,
//! boundary inclusive. Multi-group rule: maximize
//! `δ_m^{(ℓ)} = μ_{mℓ}ᵀ Σ^{-1} x_K − ½ μ_{mℓ}ᵀ Σ^{-1} μ_{mℓ} + log p_{mℓ} + log β_ℓ`
//! over the groups with positive cell mass, ties to the smallest group.
//!
//! `Σ` is the pooled within-(group, cell) covariance on the selected
//! coordinates; `p_{mℓ} = P(U = m | Z = ℓ)` comes from the chosen estimator,
//! so smoothed estimates give every cell positive mass and sidestep the
//! undefined-cell error on patterns unseen in training.

use serde::Serialize;

use crate::criterion::VariableSet;
use crate::data::{encode_cell, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate_empirical, pooled_within_covariance, CellEstimates};
use crate::linalg::{dot, sub_vec, Cholesky, Matrix};
use crate::scalar::Real;

/// Fitted location-model classifier on the coordinates in `K`.
#[derive(Clone, Debug)]
pub struct ClassifierModel<T> {
    k: VariableSet,
    d: usize,
    q: usize,
    /// Group-cell means restricted to `K`, indexed `[m][l]`.
    mu_ml: Vec<Vec<Option<Vec<T>>>>,
    /// `P(U = m | Z = l)`, indexed `[m][l]`.
    p_ml: Vec<Vec<T>>,
    /// Group priors `n_ℓ / n`.
    beta_l: Vec<T>,
    /// Cost constant of the two-group rule.
    alpha_cost: T,
    sigma: Matrix<T>,
    sigma_chol: Cholesky<T>,
}

impl<T: Real> ClassifierModel<T> {
    /// Assembles a model from explicit parameters, validating shapes and
    /// factoring the common covariance.
    pub fn from_parts(
        k: VariableSet,
        d: usize,
        mu_ml: Vec<Vec<Option<Vec<T>>>>,
        p_ml: Vec<Vec<T>>,
        beta_l: Vec<T>,
        alpha_cost: T,
        sigma: Matrix<T>,
    ) -> Result<Self> {
        let cells = 1usize << d;
        let q = beta_l.len();
        if mu_ml.len() != cells || p_ml.len() != cells {
            return Err(Error::Config("classifier tables must have 2^d cells".into()));
        }
        if alpha_cost <= T::zero() {
            return Err(Error::Config(format!("alpha_cost must be positive, got {alpha_cost}")));
        }
        if sigma.nrows() != k.len() || sigma.ncols() != k.len() {
            return Err(Error::Config("common covariance must match the selected set".into()));
        }
        let sigma_chol = Cholesky::new(&sigma)
            .map_err(|_| Error::Numerical(format!("pooled covariance on variables {k} is singular")))?;
        Ok(ClassifierModel { k, d, q, mu_ml, p_ml, beta_l, alpha_cost, sigma, sigma_chol })
    }

    pub fn selected(&self) -> &VariableSet {
        &self.k
    }

    pub fn groups(&self) -> usize {
        self.q
    }

    pub fn priors(&self) -> &[T] {
        &self.beta_l
    }

    pub fn common_covariance(&self) -> &Matrix<T> {
        &self.sigma
    }

    fn cell_of(&self, y: &[u8]) -> Result<usize> {
        if y.len() != self.d {
            return Err(Error::validation(format!("expected {} binary values, got {}", self.d, y.len())));
        }
        Ok(encode_cell(y)?.pos())
    }

    fn restrict(&self, x: &[T]) -> Vec<T> {
        self.k.zero_based().iter().map(|&j| x[j]).collect()
    }
}

/// Fits the classifier with empirical estimates and unit misclassification
/// cost.
pub fn fit_classifier<T: Real>(ds: &Dataset<T>, k: &VariableSet) -> Result<ClassifierModel<T>> {
    let est = estimate_empirical(ds);
    fit_classifier_with(ds, &est, k, T::one())
}

/// Fits the classifier from precomputed cell estimates (empirical or
/// smoothed). Group priors are always the observed group frequencies.
pub fn fit_classifier_with<T: Real>(
    ds: &Dataset<T>,
    est: &CellEstimates<T>,
    k: &VariableSet,
    alpha_cost: T,
) -> Result<ClassifierModel<T>> {
    k.check_within(ds.p())?;
    let group_counts = ds.group_counts();
    if let Some(l) = group_counts.iter().position(|&c| c == 0) {
        return Err(Error::validation(format!("group {} has no observations", l + 1)));
    }
    let idx = k.zero_based();
    let pooled = pooled_within_covariance(ds, est)?;
    let sigma = pooled.principal_submatrix(&idx);
    let n = T::of_usize(ds.len());
    let beta_l: Vec<T> = group_counts.iter().map(|&c| T::of_usize(c) / n).collect();
    let mu_ml: Vec<Vec<Option<Vec<T>>>> = (0..ds.cells())
        .map(|m| {
            (0..ds.q())
                .map(|l| est.mu_lm[m][l].as_ref().map(|mu| idx.iter().map(|&j| mu[j]).collect()))
                .collect()
        })
        .collect();
    ClassifierModel::from_parts(k.clone(), ds.d(), mu_ml, est.p_ml.clone(), beta_l, alpha_cost, sigma)
}

/// Two-group rule. Requires both groups to have positive mass in the cell.
pub fn classify_two_group<T: Real>(model: &ClassifierModel<T>, x: &[T], y: &[u8]) -> Result<usize> {
    if model.q != 2 {
        return Err(Error::Config(format!("two-group rule on a {}-group model", model.q)));
    }
    let m = model.cell_of(y)?;
    let p1 = model.p_ml[m][0];
    let p2 = model.p_ml[m][1];
    if p1 <= T::zero() || p2 <= T::zero() {
        return Err(Error::UndefinedCell { cell: m + 1 });
    }
    let mu1 = model.mu_ml[m][0].as_ref().expect("positive mass implies a mean");
    let mu2 = model.mu_ml[m][1].as_ref().expect("positive mass implies a mean");
    let xk = model.restrict(x);
    let diff = sub_vec(mu1, mu2);
    let half = T::of(0.5);
    let centered: Vec<T> = xk
        .iter()
        .zip(mu1.iter().zip(mu2))
        .map(|(&xv, (&a, &b))| xv - half * (a + b))
        .collect();
    let score = dot(&diff, &model.sigma_chol.solve(&centered));
    let threshold = (p2 / p1).ln() + model.alpha_cost.ln();
    Ok(if score >= threshold { 1 } else { 2 })
}

/// Multi-group rule: argmax of the linear discriminant scores over groups
/// with positive cell mass; ties resolve to the smallest group index.
pub fn classify_multi_group<T: Real>(model: &ClassifierModel<T>, x: &[T], y: &[u8]) -> Result<usize> {
    let m = model.cell_of(y)?;
    let xk = model.restrict(x);
    let solved_x = model.sigma_chol.solve(&xk);
    let half = T::of(0.5);
    let mut best: Option<(usize, T)> = None;
    for l in 0..model.q {
        let p_ml = model.p_ml[m][l];
        if p_ml <= T::zero() {
            continue;
        }
        let mu = model.mu_ml[m][l].as_ref().expect("positive mass implies a mean");
        let lin = dot(mu, &solved_x);
        let quad = dot(mu, &model.sigma_chol.solve(mu));
        let delta = lin - half * quad + p_ml.ln() + model.beta_l[l].ln();
        let better = match best {
            None => true,
            Some((_, cur)) => delta > cur,
        };
        if better {
            best = Some((l + 1, delta));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::UndefinedCell { cell: m + 1 })
}

/// Dispatches on the group count: the two-group rule for `q = 2`, the
/// multi-group rule otherwise.
pub fn classify<T: Real>(model: &ClassifierModel<T>, x: &[T], y: &[u8]) -> Result<usize> {
    if model.q == 2 {
        classify_two_group(model, x, y)
    } else {
        classify_multi_group(model, x, y)
    }
}

/// Proportion of a test set classified into its true group. Observations in
/// cells with no usable training mass count as errors and are reported.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CapacityReport<T> {
    pub capacity: T,
    pub correct: usize,
    pub total: usize,
    pub undefined_cells: usize,
}

pub fn classification_capacity<T: Real>(model: &ClassifierModel<T>, test: &Dataset<T>) -> Result<CapacityReport<T>> {
    if test.is_empty() {
        return Err(Error::validation("empty test set"));
    }
    let mut correct = 0usize;
    let mut undefined = 0usize;
    for obs in test.observations() {
        match classify(model, &obs.x, &obs.y) {
            Ok(pred) => {
                if pred == obs.z {
                    correct += 1;
                }
            }
            Err(Error::UndefinedCell { .. }) => undefined += 1,
            Err(other) => return Err(other),
        }
    }
    Ok(CapacityReport {
        capacity: T::of_usize(correct) / T::of_usize(test.len()),
        correct,
        total: test.len(),
        undefined_cells: undefined,
    })
}
