//! The subset criterion: a non-negative score that is zero exactly when the
//! subset contains every continuous variable carrying discriminatory
//! information (union over cells of the eigen-support of `V_m^{-1} B_m`).
//!
//! For a subset `K`, each cell contributes
//! `ξ_{K|m} = Σ_ℓ p_{ℓ|m}² ‖(I − V_m Q_{K|m})(μ_{ℓ,m} − μ_m)‖²`
//! where `Q_{K|m}` is the inverse of the `K×K` submatrix of `V_m` scattered
//! back to `p×p`; the aggregate is `ξ_K = Σ_m p_m² ξ_{K|m}`.

use serde::Serialize;

use crate::data::CellIndex;
use crate::error::{Error, Result};
use crate::estimators::CellModel;
use crate::linalg::{norm2, sub_vec, sym_eigen, Cholesky, Matrix, SpdError};
use crate::scalar::Real;

/// Condition-number ceiling for inverting covariance submatrices. Above
/// this the submatrix is reported singular rather than silently inverted.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative eigenvalue/coordinate threshold for the population
/// eigen-characterization.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Sorted, deduplicated set of 1-based variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct VariableSet {
    indices: Vec<usize>,
}

impl VariableSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VariableSet { indices: v }
    }

    /// `I = {1, ..., p}`.
    pub fn full(p: usize) -> Self {
        VariableSet { indices: (1..=p).collect() }
    }

    /// `K_i = I ∖ {i}`.
    pub fn drop_one(p: usize, i: usize) -> Self {
        VariableSet { indices: (1..=p).filter(|&j| j != i).collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &VariableSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// 0-based positions for matrix indexing.
    pub fn zero_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i - 1).collect()
    }

    /// Validates that the set is non-empty and within `{1, ..., p}`.
    pub fn check_within(&self, p: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::Config("variable set must be non-empty".into()));
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i < 1 || i > p) {
            return Err(Error::Config(format!("variable index {bad} outside 1..={p}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for VariableSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Exact per-cell parameters for oracle computations. The cell means are
/// derived from the group-cell means (`μ_m = Σ_ℓ p_{ℓ|m} μ_{ℓ,m}`), which is
/// forced by their definitions as conditional expectations.
#[derive(Clone, Debug)]
pub struct PopulationSpec<T> {
    p: usize,
    q: usize,
    cells: usize,
    p_m: Vec<T>,
    /// `[m][l]`, rows sum to one.
    p_lm: Vec<Vec<T>>,
    /// `[m][l]`.
    mu_lm: Vec<Vec<Vec<T>>>,
    /// Derived mixture means per cell.
    mu_m: Vec<Vec<T>>,
    v_m: Vec<Matrix<T>>,
}

impl<T: Real> PopulationSpec<T> {
    pub fn new(p_m: Vec<T>, p_lm: Vec<Vec<T>>, mu_lm: Vec<Vec<Vec<T>>>, v_m: Vec<Matrix<T>>) -> Result<Self> {
        let cells = p_m.len();
        if cells == 0 || p_lm.len() != cells || mu_lm.len() != cells || v_m.len() != cells {
            return Err(Error::Config("population spec arrays must share the cell count".into()));
        }
        let q = p_lm[0].len();
        let p = mu_lm[0].first().map(|v| v.len()).unwrap_or(0);
        if q == 0 || p == 0 {
            return Err(Error::Config("population spec needs at least one group and one variable".into()));
        }
        let tol = T::of(1e-9);
        let sum_pm: T = p_m.iter().copied().sum();
        if (sum_pm - T::one()).abs() > tol {
            return Err(Error::Config(format!("cell probabilities sum to {sum_pm}, expected 1")));
        }
        let mut mu_m = Vec::with_capacity(cells);
        for m in 0..cells {
            if p_lm[m].len() != q || mu_lm[m].len() != q {
                return Err(Error::Config("ragged group arrays in population spec".into()));
            }
            let sum_plm: T = p_lm[m].iter().copied().sum();
            if (sum_plm - T::one()).abs() > tol {
                return Err(Error::Config(format!("group probabilities in cell {} sum to {sum_plm}", m + 1)));
            }
            if v_m[m].nrows() != p || v_m[m].ncols() != p {
                return Err(Error::Config(format!("covariance in cell {} is not {p}×{p}", m + 1)));
            }
            if Cholesky::new(&v_m[m]).is_err() {
                return Err(Error::Config(format!("covariance in cell {} is not positive definite", m + 1)));
            }
            let mut mean = vec![T::zero(); p];
            for l in 0..q {
                if mu_lm[m][l].len() != p {
                    return Err(Error::Config("ragged mean vectors in population spec".into()));
                }
                for j in 0..p {
                    mean[j] += p_lm[m][l] * mu_lm[m][l][j];
                }
            }
            mu_m.push(mean);
        }
        Ok(PopulationSpec { p, q, cells, p_m, p_lm, mu_lm, mu_m, v_m })
    }
}

impl<T: Real> CellModel<T> for PopulationSpec<T> {
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
        Some(&self.mu_m[m.pos()])
    }

    fn group_cell_mean(&self, l: usize, m: CellIndex) -> Option<&[T]> {
        Some(&self.mu_lm[m.pos()][l - 1])
    }

    fn cell_cov(&self, m: CellIndex) -> Option<&Matrix<T>> {
        Some(&self.v_m[m.pos()])
    }
}

fn q_operator_inner<T: Real>(v: &Matrix<T>, k: &VariableSet) -> Result<Matrix<T>, SpdError> {
    let idx = k.zero_based();
    let sub = v.principal_submatrix(&idx);
    let eig = sym_eigen(&sub);
    let max = eig.values[0];
    let min = *eig.values.last().expect("non-empty subset");
    if min <= T::zero() || max / min > T::of(CONDITION_LIMIT) {
        return Err(SpdError::IllConditioned);
    }
    let inv = Cholesky::new(&sub)?.inverse();
    Ok(Matrix::scatter(v.nrows(), &idx, &inv))
}

/// `Q_{K|m} = A_K* (A_K V A_K*)^{-1} A_K`: the inverse of the `K×K` submatrix
/// of `V`, scattered into the `K` rows/columns of a `p×p` matrix.
/// `V · Q` is then an idempotent (oblique projector onto the `K` columns).
pub fn q_operator<T: Real>(v: &Matrix<T>, k: &VariableSet) -> Result<Matrix<T>> {
    k.check_within(v.nrows())?;
    q_operator_inner(v, k).map_err(|_| Error::SingularSubmatrix { cell: 0, subset: k.clone() })
}

/// Per-cell criterion `ξ_{K|m}`. The cell must be non-empty.
pub fn criterion_cell<T: Real>(model: &impl CellModel<T>, m: CellIndex, k: &VariableSet) -> Result<T> {
    k.check_within(model.dim())?;
    let v = model
        .cell_cov(m)
        .ok_or_else(|| Error::Numerical(format!("criterion evaluated on empty cell {m}")))?;
    let mu = model.cell_mean(m).expect("non-empty cell has a mean");
    let q = q_operator_inner(v, k).map_err(|_| Error::SingularSubmatrix { cell: m.0, subset: k.clone() })?;
    let vq = v.matmul(&q);
    let mut acc = T::zero();
    for l in 1..=model.groups() {
        let w = model.group_given_cell(l, m);
        if w <= T::zero() {
            continue;
        }
        let mu_l = model.group_cell_mean(l, m).expect("positive-probability stratum has a mean");
        let dev = sub_vec(mu_l, mu);
        let residual = sub_vec(&dev, &vq.matvec(&dev));
        acc += w * w * norm2(&residual);
    }
    Ok(acc)
}

/// Aggregate criterion `ξ_K = Σ_m p_m² ξ_{K|m}`, skipping empty cells
/// (their probability weight is exactly zero).
pub fn criterion<T: Real>(model: &impl CellModel<T>, k: &VariableSet) -> Result<T> {
    k.check_within(model.dim())?;
    let mut acc = T::zero();
    for m in 1..=model.cell_count() {
        let m = CellIndex(m);
        if model.cell_is_empty(m) {
            continue;
        }
        let pm = model.cell_prob(m);
        if pm <= T::zero() {
            continue;
        }
        acc += pm * pm * criterion_cell(model, m, k)?;
    }
    Ok(acc)
}

/// The adequate set `I_1 = ∪_m I_{1,m}` from exact population parameters.
///
/// Per cell, `I_{1,m}` collects the coordinates on which some eigenvector of
/// `T_m = V_m^{-1} B_m` with eigenvalue above `rank_tolerance` (relative to
/// the largest) has a coordinate above `rank_tolerance` in absolute value,
/// with `B_m = Σ_ℓ p_{ℓ|m} (μ_{ℓ,m} − μ_m) ⊗ (μ_{ℓ,m} − μ_m)`.
///
/// The eigenproblem is solved through the symmetric reduction
/// `S = L^{-1} B_m L^{-T}` with `V_m = L Lᵀ`; eigenvectors map back as
/// `v = L^{-T} w` and are unit-normalized before the coordinate test.
pub fn population_irrelevant_set<T: Real>(spec: &PopulationSpec<T>, rank_tolerance: T) -> Result<VariableSet> {
    let p = spec.dim();
    let mut adequate = vec![false; p];
    for mi in 1..=spec.cell_count() {
        let m = CellIndex(mi);
        let v = spec.cell_cov(m).expect("population cells are fully specified");
        let mu = spec.cell_mean(m).expect("population cells are fully specified");
        let chol = Cholesky::new(v).map_err(|_| Error::SingularSubmatrix {
            cell: mi,
            subset: VariableSet::full(p),
        })?;
        let mut b = Matrix::zeros(p, p);
        for l in 1..=spec.groups() {
            let w = spec.group_given_cell(l, m);
            if w <= T::zero() {
                continue;
            }
            let dev = sub_vec(spec.group_cell_mean(l, m).expect("specified"), mu);
            b.add_outer(w, &dev);
        }
        // S = L^{-1} B L^{-T}: first L^{-1} B column-wise, then once more on
        // the transpose.
        let half = solve_lower_columns(&chol, &b);
        let s = solve_lower_columns(&chol, &half.transpose());
        let eig = sym_eigen(&s);
        let lam_max = eig.values[0];
        if lam_max <= T::zero() {
            continue; // no between-group spread in this cell
        }
        for j in 0..p {
            if eig.values[j] <= rank_tolerance * lam_max {
                continue;
            }
            let w: Vec<T> = (0..p).map(|i| eig.vectors[(i, j)]).collect();
            let mut v_back = chol.solve_lt(&w);
            let norm = norm2(&v_back).sqrt();
            if norm <= T::zero() {
                continue;
            }
            for c in v_back.iter_mut() {
                *c /= norm;
            }
            for (kcoord, &c) in v_back.iter().enumerate() {
                if c.abs() > rank_tolerance {
                    adequate[kcoord] = true;
                }
            }
        }
    }
    Ok(VariableSet::new((1..=p).filter(|&i| adequate[i - 1])))
}

/// Applies `L^{-1}` to every column of `b`.
fn solve_lower_columns<T: Real>(chol: &Cholesky<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = b.nrows();
    let mut out = Matrix::zeros(n, b.ncols());
    for j in 0..b.ncols() {
        let col: Vec<T> = (0..n).map(|i| b[(i, j)]).collect();
        let sol = chol.solve_l(&col);
        for i in 0..n {
            out[(i, j)] = sol[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_set_basics() {
        let k = VariableSet::new([3, 1, 3]);
        assert_eq!(k.indices(), &[1, 3]);
        assert_eq!(k.to_string(), "{1,3}");
        assert!(k.is_subset_of(&VariableSet::full(4)));
        assert_eq!(VariableSet::drop_one(4, 2).indices(), &[1, 3, 4]);
        assert!(k.check_within(2).is_err());
    }

    #[test]
    fn q_full_set_is_inverse() {
        let v = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let q = q_operator(&v, &VariableSet::full(2)).unwrap();
        let prod = v.matmul(&q);
        assert!(prod.sub(&Matrix::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn q_identity_covariance_picks_coordinates() {
        let v = Matrix::<f64>::identity(4);
        let q = q_operator(&v, &VariableSet::new([1, 3])).unwrap();
        let expected = Matrix::from_fn(4, 4, |i, j| if i == j && (i == 0 || i == 2) { 1.0 } else { 0.0 });
        assert!(q.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn q_single_variable_hand_value() {
        let v: Matrix<f64> = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let q = q_operator(&v, &VariableSet::new([1])).unwrap();
        assert!((q[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(q[(0, 1)], 0.0);
        assert_eq!(q[(1, 1)], 0.0);
    }

    #[test]
    fn q_rejects_singular_submatrix() {
        let v = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let err = q_operator(&v, &VariableSet::full(2)).unwrap_err();
        assert!(matches!(err, Error::SingularSubmatrix { .. }));
    }

    fn one_cell_spec(p_lm: Vec<f64>, mu: Vec<Vec<f64>>, v: Matrix<f64>) -> PopulationSpec<f64> {
        PopulationSpec::new(vec![1.0], vec![p_lm], vec![mu], vec![v]).unwrap()
    }

    #[test]
    fn single_group_criterion_is_zero() {
        let spec = one_cell_spec(vec![1.0], vec![vec![1.0, -2.0]], Matrix::identity(2));
        for k in [VariableSet::new([1]), VariableSet::new([2]), VariableSet::full(2)] {
            assert_eq!(criterion(&spec, &k).unwrap(), 0.0);
        }
    }

    #[test]
    fn full_set_criterion_is_zero() {
        let spec = one_cell_spec(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.5], vec![-1.0, -0.5]],
            Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]),
        );
        let xi = criterion(&spec, &VariableSet::full(2)).unwrap();
        assert!(xi.abs() < 1e-24, "xi = {xi}");
    }

    #[test]
    fn two_group_residual_hand_value() {
        // groups at ±(1,0), V = I, equal weights: dropping variable 1 leaves
        // ξ_{{2}|m} = 2 · (1/2)² · ‖(1,0)‖² = 0.5
        let spec = one_cell_spec(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            Matrix::identity(2),
        );
        let xi_cell = criterion_cell(&spec, CellIndex(1), &VariableSet::new([2])).unwrap();
        assert!((xi_cell - 0.5).abs() < 1e-14);
        // and the aggregate carries the p_m² = 1 weight
        let xi = criterion(&spec, &VariableSet::new([2])).unwrap();
        assert!((xi - 0.5).abs() < 1e-14);
    }

    #[test]
    fn irrelevant_set_empty_when_means_equal() {
        let spec = one_cell_spec(
            vec![0.5, 0.5],
            vec![vec![0.7, -0.3], vec![0.7, -0.3]],
            Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]),
        );
        let i1 = population_irrelevant_set(&spec, RANK_TOLERANCE).unwrap();
        assert!(i1.is_empty());
    }

    #[test]
    fn irrelevant_set_single_direction() {
        // δ = (1, 0), V = I: only the first coordinate discriminates
        let spec = one_cell_spec(
            vec![0.5, 0.5],
            vec![vec![0.5, 0.0], vec![-0.5, 0.0]],
            Matrix::identity(2),
        );
        let i1 = population_irrelevant_set(&spec, RANK_TOLERANCE).unwrap();
        assert_eq!(i1.indices(), &[1]);
        // cross-check through the criterion: ξ_{K_1} > 0, ξ_{K_2} = 0
        assert!(criterion(&spec, &VariableSet::drop_one(2, 1)).unwrap() > 1e-6);
        assert!(criterion(&spec, &VariableSet::drop_one(2, 2)).unwrap() < 1e-12);
    }

    #[test]
    fn criterion_nonnegative_and_subset_free() {
        let spec = one_cell_spec(
            vec![0.3, 0.7],
            vec![vec![0.9, 0.1, -0.4], vec![-0.2, 0.8, 0.3]],
            Matrix::from_rows(&[
                vec![1.5, 0.2, -0.1],
                vec![0.2, 2.0, 0.4],
                vec![-0.1, 0.4, 1.2],
            ]),
        );
        for mask in 1..8usize {
            let k = VariableSet::new((1..=3).filter(|&i| mask & (1 << (i - 1)) != 0));
            assert!(criterion(&spec, &k).unwrap() >= 0.0);
        }
    }
}
