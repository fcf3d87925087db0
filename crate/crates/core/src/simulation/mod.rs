//! Synthetic-data experiment harness: multivariate-normal mixed data with
//! independent binary cells, replicated train/test evaluation of the
//! selection + classification pipeline, and the built-in benchmark
//! scenarios.
//!
//! Reproducibility contract: a report is a pure function of the experiment
//! spec. Replications draw from substreams keyed by
//! `(seed, replication, role, group)`, run concurrently, and are reduced in
//! replication order, so worker count never changes the output.

mod scenario;
mod streams;

pub use scenario::{
    builtin_names, builtin_scenario, load_scenario, paper_experiment_spec, paper_population_spec,
    run_scenario, scenario_from_toml, write_scenario_csv, RowConfig, Scenario, ScenarioReport,
    ScenarioRow, ScenarioRows,
};
pub use streams::substream;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{classification_capacity, fit_classifier_with};
use crate::data::{decode_cell, CellIndex, Dataset, MixedObservation};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::selection::{select_variables, SelectionConfig};
use crate::tuning::{loocv_alpha_beta, TuningGrid};

/// Multivariate normal sampler backed by a Cholesky factor.
#[derive(Clone, Debug)]
pub struct MvnSampler {
    mean: Vec<f64>,
    factor: Matrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: Vec<f64>, covariance: &Matrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::Config("covariance shape does not match the mean".into()));
        }
        let chol = Cholesky::new(covariance)
            .map_err(|_| Error::Config("covariance matrix is not positive definite".into()))?;
        Ok(MvnSampler { mean, factor: chol.factor().clone() })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.dim();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| {
                let mut s = self.mean[i];
                for j in 0..=i {
                    s += self.factor[(i, j)] * z[j];
                }
                s
            })
            .collect()
    }
}

/// Full description of one simulated condition.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    /// One mean vector per group.
    pub group_means: Vec<Vec<f64>>,
    /// Common covariance of the continuous vector.
    pub covariance: Matrix<f64>,
    /// Cell distribution per group, each row a probability vector over the
    /// `2^d` cells. Independent of the continuous draw.
    pub cell_distribution: Vec<Vec<f64>>,
    /// Training observations per group.
    pub n_train: Vec<usize>,
    /// Test observations per group.
    pub n_test: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub config: SelectionConfig<f64>,
    /// When set, each replication first picks (α, β) on the training sample
    /// by leave-one-out cross-validation over this grid.
    pub tune: Option<TuningGrid<f64>>,
}

impl ExperimentSpec {
    /// Uniform cell distribution for every group.
    pub fn uniform_cells(q: usize, d: usize) -> Vec<Vec<f64>> {
        let m = 1usize << d;
        vec![vec![1.0 / m as f64; m]; q]
    }

    pub fn total_train(&self) -> usize {
        self.n_train.iter().sum()
    }

    fn compile(&self) -> Result<CompiledSpec> {
        if self.q == 0 || self.group_means.len() != self.q {
            return Err(Error::Config("one mean vector per group is required".into()));
        }
        if self.n_train.len() != self.q || self.n_test.len() != self.q {
            return Err(Error::Config("per-group sample sizes must match the group count".into()));
        }
        if self.n_train.contains(&0) || self.n_test.contains(&0) {
            return Err(Error::Config("every group needs at least one observation".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.cell_distribution.len() != self.q {
            return Err(Error::Config("one cell distribution per group is required".into()));
        }
        let m = 1usize << self.d;
        let mut cumulative = Vec::with_capacity(self.q);
        for dist in &self.cell_distribution {
            if dist.len() != m {
                return Err(Error::Config(format!("cell distribution must have {m} entries")));
            }
            if dist.iter().any(|&w| w < 0.0) {
                return Err(Error::Config("cell probabilities must be non-negative".into()));
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("cell probabilities sum to {total}, expected 1")));
            }
            let mut cum = Vec::with_capacity(m);
            let mut acc = 0.0;
            for &w in dist {
                acc += w;
                cum.push(acc);
            }
            cumulative.push(cum);
        }
        let samplers = self
            .group_means
            .iter()
            .map(|mean| {
                if mean.len() != self.p {
                    return Err(Error::Config(format!("group mean must have {} coordinates", self.p)));
                }
                MvnSampler::new(mean.clone(), &self.covariance)
            })
            .collect::<Result<Vec<_>>>()?;
        self.config.validate()?;
        if let Some(grid) = &self.tune {
            grid.validate()?;
        }
        Ok(CompiledSpec { samplers, cumulative })
    }
}

struct CompiledSpec {
    samplers: Vec<MvnSampler>,
    cumulative: Vec<Vec<f64>>,
}

const ROLE_TRAIN: u64 = 0;
const ROLE_TEST: u64 = 1;

fn draw_cell(cumulative: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i + 1,
        None => cumulative.len(), // numerical tail: last cell absorbs
    }
}

fn generate_role(spec: &ExperimentSpec, compiled: &CompiledSpec, replication: u64, role: u64) -> Dataset<f64> {
    let sizes = if role == ROLE_TRAIN { &spec.n_train } else { &spec.n_test };
    let mut observations = Vec::with_capacity(sizes.iter().sum());
    for (g, &count) in sizes.iter().enumerate() {
        let mut rng = substream(spec.seed, &[replication, role, g as u64]);
        for _ in 0..count {
            let x = compiled.samplers[g].sample(&mut rng);
            let cell = draw_cell(&compiled.cumulative[g], &mut rng);
            let y = decode_cell(CellIndex(cell), spec.d).expect("cell in range");
            observations.push(MixedObservation { x, y, z: g + 1 });
        }
    }
    Dataset::new(observations, spec.p, spec.d, spec.q).expect("generated data is valid")
}

/// Draws the train/test pair for one replication index.
pub fn generate_dataset(spec: &ExperimentSpec, replication: usize) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let compiled = spec.compile()?;
    Ok((
        generate_role(spec, &compiled, replication as u64, ROLE_TRAIN),
        generate_role(spec, &compiled, replication as u64, ROLE_TEST),
    ))
}

/// Outcome of one successful replication.
#[derive(Clone, Debug)]
struct RepOutcome {
    selected: Vec<usize>,
    s_hat: usize,
    capacity: f64,
    undefined: usize,
}

/// Aggregate over replications of one condition.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub replications: usize,
    pub succeeded: usize,
    pub failures: usize,
    pub mean_cc: f64,
    pub se_cc: f64,
    /// Fraction of successful replications selecting each variable.
    pub selection_frequency: Vec<f64>,
    pub mean_s_hat: f64,
    pub undefined_total: usize,
}

fn run_replication(spec: &ExperimentSpec, compiled: &CompiledSpec, rep: usize) -> Result<RepOutcome> {
    let train = generate_role(spec, compiled, rep as u64, ROLE_TRAIN);
    let test = generate_role(spec, compiled, rep as u64, ROLE_TEST);
    let mut cfg = spec.config;
    if let Some(grid) = &spec.tune {
        let cv = loocv_alpha_beta(&train, grid, &cfg)?;
        cfg.alpha = cv.best_alpha;
        cfg.beta = cv.best_beta;
    }
    let selection = select_variables(&train, &cfg)?;
    let est = cfg.estimator.estimate(&train)?;
    let model = fit_classifier_with(&train, &est, &selection.selected, 1.0)?;
    let capacity = classification_capacity(&model, &test)?;
    Ok(RepOutcome {
        selected: selection.selected.indices().to_vec(),
        s_hat: selection.s_hat,
        capacity: capacity.capacity,
        undefined: capacity.undefined_cells,
    })
}

/// Runs every replication of the condition and aggregates. Replications run
/// in parallel; the reduction is sequential in replication order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let compiled = spec.compile()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| run_replication(spec, &compiled, rep))
        .collect();

    let mut ccs = Vec::with_capacity(spec.replications);
    let mut failures = 0usize;
    let mut undefined_total = 0usize;
    let mut sel_counts = vec![0usize; spec.p];
    let mut s_sum = 0usize;
    for outcome in &outcomes {
        match outcome {
            Ok(rep) => {
                ccs.push(rep.capacity);
                undefined_total += rep.undefined;
                s_sum += rep.s_hat;
                for &v in &rep.selected {
                    sel_counts[v - 1] += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let succeeded = ccs.len();
    if succeeded == 0 {
        return Err(Error::Numerical("every replication failed".into()));
    }
    let mean_cc = ccs.iter().sum::<f64>() / succeeded as f64;
    let se_cc = if succeeded > 1 {
        let var = ccs.iter().map(|c| (c - mean_cc).powi(2)).sum::<f64>() / (succeeded - 1) as f64;
        (var / succeeded as f64).sqrt()
    } else {
        0.0
    };
    Ok(ExperimentReport {
        replications: spec.replications,
        succeeded,
        failures,
        mean_cc,
        se_cc,
        selection_frequency: sel_counts.iter().map(|&c| c as f64 / succeeded as f64).collect(),
        mean_s_hat: s_sum as f64 / succeeded as f64,
        undefined_total,
    })
}

/// One row per (α, β): mean classification capacity for curve plots.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub beta: f64,
    pub mean_cc: f64,
    pub failures: usize,
}

/// Sweeps (α, β) over a grid, rerunning the whole experiment per point with
/// common random numbers (the seed and streams do not depend on the config).
pub fn sweep_beta_curves(spec: &ExperimentSpec, alphas: &[f64], betas: &[f64]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            let mut point = spec.clone();
            point.config.alpha = alpha;
            point.config.beta = beta;
            let report = run_experiment(&point)?;
            out.push(CurvePoint { alpha, beta, mean_cc: report.mean_cc, failures: report.failures });
        }
    }
    Ok(out)
}
