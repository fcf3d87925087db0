//! Leave-one-out cross-validation for the penalty exponents `(α, β)` and
//! the smoothing level `λ`.
//!
//! Each fold removes one observation, reruns selection on the remainder,
//! fits the classifier on the same reduced sample restricted to the selected
//! variables, and classifies the held-out observation. Folds that fail
//! numerically (singular submatrix, undefined cell) count as misclassified
//! and are tallied separately; the grid never aborts. `CV(α, β)` is the
//! correct-classification proportion, maximized with ties resolved to the
//! smallest `α`, then the smallest `β` (smallest `λ` likewise).

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{classify, fit_classifier_with};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::selection::{select_variables, EstimatorKind, SelectionConfig};

/// Finite search grids. Values must respect the admissible open intervals;
/// `λ = 0` (the empirical estimator) is allowed.
#[derive(Clone, Debug, Serialize)]
pub struct TuningGrid<T> {
    pub alphas: Vec<T>,
    pub betas: Vec<T>,
    pub lambdas: Vec<T>,
}

impl<T: Real> Default for TuningGrid<T> {
    fn default() -> Self {
        let step = |from: f64, count: usize, by: f64| -> Vec<T> {
            (0..count).map(|k| T::of(from + by * k as f64)).collect()
        };
        TuningGrid {
            alphas: step(0.05, 9, 0.05),   // 0.05 .. 0.45
            betas: step(0.05, 19, 0.05),   // 0.05 .. 0.95
            lambdas: step(0.0, 10, 0.1),   // 0.0 .. 0.9
        }
    }
}

impl<T: Real> TuningGrid<T> {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() || self.lambdas.is_empty() {
            return Err(Error::Config("tuning grid axes must be non-empty".into()));
        }
        if self.alphas.iter().any(|&a| a <= T::zero() || a >= T::of(0.5)) {
            return Err(Error::Config("grid alphas must lie in (0, 1/2)".into()));
        }
        if self.betas.iter().any(|&b| b <= T::zero() || b >= T::one()) {
            return Err(Error::Config("grid betas must lie in (0, 1)".into()));
        }
        if self.lambdas.iter().any(|&l| l < T::zero() || l >= T::one()) {
            return Err(Error::Config("grid lambdas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One grid point of the CV surface.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CvEntry<T> {
    pub alpha: T,
    pub beta: T,
    pub cv: T,
    /// Folds that failed numerically (counted as misclassified).
    pub failures: usize,
}

/// The full CV surface and its maximizer.
#[derive(Clone, Debug, Serialize)]
pub struct CvReport<T> {
    pub entries: Vec<CvEntry<T>>,
    pub best_alpha: T,
    pub best_beta: T,
    pub best_cv: T,
    pub folds: usize,
}

/// One grid point of the λ search.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LambdaEntry<T> {
    pub lambda: T,
    pub cv: T,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaReport<T> {
    pub entries: Vec<LambdaEntry<T>>,
    pub best_lambda: T,
    pub best_cv: T,
    pub folds: usize,
}

fn check_loocv_feasible<T: Real>(ds: &Dataset<T>) -> Result<()> {
    if ds.len() < 10 {
        return Err(Error::Config(format!("leave-one-out needs at least 10 observations, got {}", ds.len())));
    }
    if let Some(l) = ds.group_counts().iter().position(|&c| c < 3) {
        return Err(Error::Config(format!(
            "group {} has fewer than 3 observations; every group must keep at least 2 per fold",
            l + 1
        )));
    }
    Ok(())
}

/// Correct-classification count over all leave-one-out folds for one
/// configuration, plus the number of failed folds.
fn loocv_correct_count<T: Real>(ds: &Dataset<T>, cfg: &SelectionConfig<T>) -> (usize, usize) {
    let n = ds.len();
    let mut correct = 0usize;
    let mut failures = 0usize;
    for k in 0..n {
        let fold = match fold_prediction(ds, cfg, k) {
            Ok(pred) => pred,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if fold == ds.observations()[k].z {
            correct += 1;
        }
    }
    (correct, failures)
}

fn fold_prediction<T: Real>(ds: &Dataset<T>, cfg: &SelectionConfig<T>, k: usize) -> Result<usize> {
    let reduced = ds.without(k)?;
    let selection = select_variables(&reduced, cfg)?;
    let est = cfg.estimator.estimate(&reduced)?;
    let model = fit_classifier_with(&reduced, &est, &selection.selected, T::one())?;
    let held_out = &ds.observations()[k];
    classify(&model, &held_out.x, &held_out.y)
}

/// Grid search over `(α, β)` by leave-one-out cross-validation. The
/// template config supplies the penalty family and estimator kind.
pub fn loocv_alpha_beta<T: Real>(
    ds: &Dataset<T>,
    grid: &TuningGrid<T>,
    template: &SelectionConfig<T>,
) -> Result<CvReport<T>> {
    grid.validate()?;
    check_loocv_feasible(ds)?;
    let mut alphas = grid.alphas.clone();
    let mut betas = grid.betas.clone();
    alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    betas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let points: Vec<(T, T)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    let n = ds.len();
    let counted: Vec<(usize, usize)> = points
        .par_iter()
        .map(|&(alpha, beta)| {
            let cfg = SelectionConfig { alpha, beta, ..*template };
            loocv_correct_count(ds, &cfg)
        })
        .collect();

    let entries: Vec<CvEntry<T>> = points
        .iter()
        .zip(&counted)
        .map(|(&(alpha, beta), &(correct, failures))| CvEntry {
            alpha,
            beta,
            cv: T::of_usize(correct) / T::of_usize(n),
            failures,
        })
        .collect();
    // entries are in (α, β) lexicographic order; strict improvement keeps
    // the smallest pair among ties
    let mut best = &entries[0];
    for e in &entries[1..] {
        if e.cv > best.cv {
            best = e;
        }
    }
    Ok(CvReport {
        best_alpha: best.alpha,
        best_beta: best.beta,
        best_cv: best.cv,
        folds: n,
        entries,
    })
}

/// Grid search over the smoothing level λ at fixed `(α, β)`.
pub fn tune_lambda<T: Real>(ds: &Dataset<T>, lambdas: &[T], template: &SelectionConfig<T>) -> Result<LambdaReport<T>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda grid must be non-empty".into()));
    }
    if lambdas.iter().any(|&l| l < T::zero() || l >= T::one()) {
        return Err(Error::Config("grid lambdas must lie in [0, 1)".into()));
    }
    check_loocv_feasible(ds)?;
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = ds.len();
    let counted: Vec<(usize, usize)> = sorted
        .par_iter()
        .map(|&lambda| {
            let cfg = SelectionConfig { estimator: EstimatorKind::Smoothed { lambda }, ..*template };
            loocv_correct_count(ds, &cfg)
        })
        .collect();
    let entries: Vec<LambdaEntry<T>> = sorted
        .iter()
        .zip(&counted)
        .map(|(&lambda, &(correct, failures))| LambdaEntry {
            lambda,
            cv: T::of_usize(correct) / T::of_usize(n),
            failures,
        })
        .collect();
    let mut best = &entries[0];
    for e in &entries[1..] {
        if e.cv > best.cv {
            best = e;
        }
    }
    Ok(LambdaReport { best_lambda: best.lambda, best_cv: best.cv, folds: n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MixedObservation;

    fn obs(x: Vec<f64>, y: Vec<u8>, z: usize) -> MixedObservation<f64> {
        MixedObservation { x, y, z }
    }

    /// Two far-apart groups, both cells populated for both groups, with
    /// within-group jitter so nothing is singular.
    fn separated_dataset() -> Dataset<f64> {
        let mut observations = Vec::new();
        let jitter = [0.0, 0.31, -0.24, 0.17, -0.08, 0.42];
        for (i, &j) in jitter.iter().enumerate() {
            let bit = (i % 2) as u8;
            observations.push(obs(vec![j, -j + 0.1 * i as f64], vec![bit], 1));
            observations.push(obs(vec![20.0 + j, 20.0 - j + 0.1 * i as f64], vec![bit], 2));
        }
        Dataset::new(observations, 2, 1, 2).unwrap()
    }

    #[test]
    fn single_point_grid_is_best() {
        let ds = separated_dataset();
        let grid = TuningGrid { alphas: vec![0.25], betas: vec![0.5], lambdas: vec![0.0] };
        let report = loocv_alpha_beta(&ds, &grid, &SelectionConfig::default()).unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.best_alpha, 0.25);
        assert!(report.best_cv >= 0.0 && report.best_cv <= 1.0);
    }

    #[test]
    fn perfect_separation_ties_to_smallest_pair() {
        let ds = separated_dataset();
        let grid = TuningGrid {
            alphas: vec![0.4, 0.1, 0.25],
            betas: vec![0.9, 0.3],
            lambdas: vec![0.0],
        };
        let report = loocv_alpha_beta(&ds, &grid, &SelectionConfig::default()).unwrap();
        for e in &report.entries {
            assert_eq!(e.cv, 1.0, "α={} β={}", e.alpha, e.beta);
            assert_eq!(e.failures, 0);
        }
        assert_eq!((report.best_alpha, report.best_beta), (0.1, 0.3));
    }

    #[test]
    fn grid_order_does_not_change_best() {
        let ds = separated_dataset();
        let forward = TuningGrid { alphas: vec![0.1, 0.2, 0.3], betas: vec![0.2, 0.4], lambdas: vec![0.0] };
        let reversed = TuningGrid { alphas: vec![0.3, 0.2, 0.1], betas: vec![0.4, 0.2], lambdas: vec![0.0] };
        let a = loocv_alpha_beta(&ds, &forward, &SelectionConfig::default()).unwrap();
        let b = loocv_alpha_beta(&ds, &reversed, &SelectionConfig::default()).unwrap();
        assert_eq!((a.best_alpha, a.best_beta), (b.best_alpha, b.best_beta));
    }

    #[test]
    fn loocv_is_deterministic() {
        let ds = separated_dataset();
        let grid = TuningGrid { alphas: vec![0.1, 0.3], betas: vec![0.25, 0.75], lambdas: vec![0.0] };
        let a = loocv_alpha_beta(&ds, &grid, &SelectionConfig::default()).unwrap();
        let b = loocv_alpha_beta(&ds, &grid, &SelectionConfig::default()).unwrap();
        let fmt = |r: &CvReport<f64>| format!("{r:?}");
        assert_eq!(fmt(&a), fmt(&b));
    }

    #[test]
    fn fold_models_ignore_the_held_out_observation() {
        let ds = separated_dataset();
        let k = 3usize;
        let mut poisoned_obs = ds.observations().to_vec();
        poisoned_obs[k].x = vec![1e9, -1e9];
        let poisoned = Dataset::new(poisoned_obs, 2, 1, 2).unwrap();
        let cfg = SelectionConfig::default();
        // the fold-k reduced sample excludes observation k entirely
        let sel_a = select_variables(&ds.without(k).unwrap(), &cfg).unwrap();
        let sel_b = select_variables(&poisoned.without(k).unwrap(), &cfg).unwrap();
        assert_eq!(sel_a.selected, sel_b.selected);
        assert_eq!(format!("{:?}", sel_a.phi), format!("{:?}", sel_b.phi));
        let est_a = cfg.estimator.estimate(&ds.without(k).unwrap()).unwrap();
        let est_b = cfg.estimator.estimate(&poisoned.without(k).unwrap()).unwrap();
        let m_a = fit_classifier_with(&ds.without(k).unwrap(), &est_a, &sel_a.selected, 1.0).unwrap();
        let m_b = fit_classifier_with(&poisoned.without(k).unwrap(), &est_b, &sel_b.selected, 1.0).unwrap();
        assert_eq!(
            format!("{:?}", m_a.common_covariance()),
            format!("{:?}", m_b.common_covariance())
        );
    }

    #[test]
    fn lambda_grid_of_zero_returns_zero() {
        let ds = separated_dataset();
        let report = tune_lambda(&ds, &[0.0], &SelectionConfig::default()).unwrap();
        assert_eq!(report.best_lambda, 0.0);
    }

    #[test]
    fn lambda_ties_return_smallest() {
        // cell-complete, perfectly separated: CV = 1 for every λ
        let ds = separated_dataset();
        let report = tune_lambda(&ds, &[0.6, 0.3, 0.0], &SelectionConfig::default()).unwrap();
        for e in &report.entries {
            assert_eq!(e.cv, 1.0);
        }
        assert_eq!(report.best_lambda, 0.0);
    }

    #[test]
    fn smoothing_rescues_single_coverage_cell() {
        // Group 1 appears in cell 2 exactly once. At λ = 0 that fold's
        // classifier has p̂(cell 2 | group 1) = 0 and the held-out point hits
        // the undefined cell; λ > 0 borrows mass and classifies it by x.
        let mut observations = Vec::new();
        let jitter = [0.0, 0.3, -0.2, 0.15, -0.1];
        for (i, &j) in jitter.iter().enumerate() {
            observations.push(obs(vec![j, 0.2 * i as f64], vec![0], 1));
            observations.push(obs(vec![30.0 + j, 0.2 * i as f64], vec![0], 2));
            observations.push(obs(vec![30.0 - j, -0.2 * i as f64], vec![1], 2));
        }
        observations.push(obs(vec![0.05, 0.4], vec![1], 1)); // lone group-1 point in cell 2
        let ds = Dataset::new(observations, 2, 1, 2).unwrap();
        let report = tune_lambda(&ds, &[0.0, 0.5], &SelectionConfig::default()).unwrap();
        let cv0 = report.entries.iter().find(|e| e.lambda == 0.0).unwrap();
        let cv5 = report.entries.iter().find(|e| e.lambda == 0.5).unwrap();
        assert!(
            cv5.cv > cv0.cv,
            "smoothing should win: cv(0)={} (failures {}), cv(0.5)={} (failures {})",
            cv0.cv,
            cv0.failures,
            cv5.cv,
            cv5.failures
        );
        assert_eq!(report.best_lambda, 0.5);
    }

    #[test]
    fn rejects_tiny_samples() {
        let ds = Dataset::new(
            vec![obs(vec![0.0, 1.0], vec![0], 1), obs(vec![5.0, 2.0], vec![0], 2)],
            2,
            1,
            2,
        )
        .unwrap();
        let grid = TuningGrid { alphas: vec![0.25], betas: vec![0.5], lambdas: vec![0.0] };
        assert!(loocv_alpha_beta(&ds, &grid, &SelectionConfig::default()).is_err());
    }
}
