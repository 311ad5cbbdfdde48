//! Classical states and dynamics: probability vectors, column-stochastic
//! matrices and Gibbs states.
//!
//! Matrices act on column vectors, `p'_i = sum_j T[i][j] p_j`, so every
//! *column* of a [`StochasticMatrix`] sums to one. Much numerical software
//! uses the row convention instead; transpose before importing such data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of `sum p_i` from one.
pub const TOL_NORM: f64 = 1e-12;
/// Negative entries down to `-TOL_NEG` are clamped to zero.
pub const TOL_NEG: f64 = 1e-12;
/// Allowed deviation of a column (or row) sum from one.
pub const TOL_STOCHASTIC: f64 = 1e-10;

/// A finite probability distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbVecRepr", into = "ProbVecRepr")]
pub struct ProbVec {
    entries: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct ProbVecRepr {
    p: Vec<f64>,
}

impl TryFrom<ProbVecRepr> for ProbVec {
    type Error = Error;
    fn try_from(r: ProbVecRepr) -> Result<Self> {
        ProbVec::new(r.p)
    }
}

impl From<ProbVec> for ProbVecRepr {
    fn from(p: ProbVec) -> Self {
        ProbVecRepr { p: p.entries }
    }
}

fn check_entries(entries: &mut [f64]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Empty);
    }
    let mut sum = 0.0;
    for (index, x) in entries.iter_mut().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if *x < 0.0 {
            if *x < -TOL_NEG {
                return Err(Error::NegativeEntry { index, value: *x });
            }
            *x = 0.0;
        }
        sum += *x;
    }
    Ok(sum)
}

impl ProbVec {
    /// Validates `entries` without renormalizing: the sum must already be
    /// within [`TOL_NORM`] of one.
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&mut entries)?;
        if (sum - 1.0).abs() > TOL_NORM {
            return Err(Error::NotNormalized { sum });
        }
        Ok(ProbVec { entries })
    }

    /// Accepts any non-negative vector with positive sum and divides by the sum.
    pub fn normalize(mut entries: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&mut entries)?;
        if sum <= 0.0 {
            return Err(Error::NotNormalized { sum });
        }
        entries.iter_mut().for_each(|x| *x /= sum);
        Ok(ProbVec { entries })
    }

    /// Wraps the output of an internal computation that is normalized up to
    /// rounding. Tiny negative entries are clamped and the sum is restored.
    pub(crate) fn from_computed(mut entries: Vec<f64>) -> Self {
        let mut sum = 0.0;
        for x in entries.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
            sum += *x;
        }
        debug_assert!((sum - 1.0).abs() < 1e-6, "computed vector sums to {sum}");
        if sum > 0.0 && (sum - 1.0).abs() > f64::EPSILON {
            entries.iter_mut().for_each(|x| *x /= sum);
        }
        ProbVec { entries }
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        ProbVec {
            entries: vec![1.0 / dim as f64; dim],
        }
    }

    /// Point mass on `index`.
    pub fn delta(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut entries = vec![0.0; dim];
        entries[index] = 1.0;
        ProbVec { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    /// Number of strictly positive entries.
    pub fn rank(&self) -> usize {
        self.entries.iter().filter(|&&x| x > 0.0).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim()
    }

    pub fn require_full_support(&self) -> Result<()> {
        match self.entries.iter().position(|&x| x <= 0.0) {
            Some(index) => Err(Error::ZeroEntry { index }),
            None => Ok(()),
        }
    }

    /// Entries in non-increasing order.
    pub fn sorted_decreasing(&self) -> Vec<f64> {
        rearrange_decreasing(self).0.entries
    }

    /// Pads with zeros up to `dim`.
    pub fn padded(&self, dim: usize) -> ProbVec {
        let mut entries = self.entries.clone();
        if dim > entries.len() {
            entries.resize(dim, 0.0);
        }
        ProbVec { entries }
    }
}

impl AsRef<[f64]> for ProbVec {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

/// A permutation of `0..n`, stored as the output position of each input index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    position: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            position: (0..n).collect(),
        }
    }

    /// Builds the permutation from the list of input indices in output order.
    pub fn from_order(order: &[usize]) -> Self {
        let mut position = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            position[i] = k;
        }
        Permutation { position }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Output position of input index `i`.
    pub fn image(&self, i: usize) -> usize {
        self.position[i]
    }

    /// Input indices in output order.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.position.len()];
        for (i, &k) in self.position.iter().enumerate() {
            order[k] = i;
        }
        order
    }

    pub fn is_identity(&self) -> bool {
        self.position.iter().enumerate().all(|(i, &k)| i == k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.position
    }
}

/// Stable decreasing order of indices of `values` (ties keep input order).
pub(crate) fn decreasing_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Sorts `p` into non-increasing order. The permutation sends each input index
/// to its output position; ties keep their original relative order.
pub fn rearrange_decreasing(p: &ProbVec) -> (ProbVec, Permutation) {
    let order = decreasing_order(&p.entries);
    let sorted = order.iter().map(|&i| p.entries[i]).collect();
    (ProbVec { entries: sorted }, Permutation::from_order(&order))
}

/// Trace distance `(1/2) sum_i |p_i - q_i|`.
pub fn trace_distance(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    Ok(0.5 * p.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Product distribution, row-major: index `i * dim(r) + j` holds `p_i r_j`.
pub fn tensor(p: &ProbVec, r: &ProbVec) -> ProbVec {
    let mut entries = Vec::with_capacity(p.dim() * r.dim());
    for &a in p.iter() {
        for &b in r.iter() {
            entries.push(a * b);
        }
    }
    ProbVec::from_computed(entries)
}

pub(crate) fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// A column-stochastic matrix, `dim_out x dim_in`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        StochasticMatrix::from_rows(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(t: StochasticMatrix) -> Self {
        t.to_rows()
    }
}

impl StochasticMatrix {
    /// Validates non-negativity and unit column sums (within [`TOL_STOCHASTIC`]).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::Empty);
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            same_dim(n_cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(n_rows, n_cols, data)
    }

    pub fn from_row_major(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        same_dim(rows * cols, data.len())?;
        for (index, x) in data.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if *x < 0.0 {
                if *x < -TOL_NEG {
                    return Err(Error::NotStochastic(format!(
                        "negative entry {x:e} at ({}, {})",
                        index / cols,
                        index % cols
                    )));
                }
                *x = 0.0;
            }
        }
        let t = StochasticMatrix { rows, cols, data };
        for j in 0..cols {
            let s = t.column_sum(j);
            if (s - 1.0).abs() > TOL_STOCHASTIC {
                return Err(Error::NotStochastic(format!("column {j} sums to {s}")));
            }
        }
        Ok(t)
    }

    /// Internal constructor for matrices that are stochastic by construction.
    pub(crate) fn from_row_major_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        StochasticMatrix { rows, cols, data }
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        StochasticMatrix {
            rows: d,
            cols: d,
            data,
        }
    }

    /// Permutation matrix sending basis vector `i` to `perm.image(i)`.
    pub fn permutation(perm: &Permutation) -> Self {
        let d = perm.len();
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[perm.image(i) * d + i] = 1.0;
        }
        StochasticMatrix {
            rows: d,
            cols: d,
            data,
        }
    }

    /// Rank-one map sending every input to `q`.
    pub fn constant(q: &ProbVec, dim_in: usize) -> Self {
        let d = q.dim();
        let mut data = vec![0.0; d * dim_in];
        for i in 0..d {
            for j in 0..dim_in {
                data[i * dim_in + j] = q.get(i);
            }
        }
        StochasticMatrix {
            rows: d,
            cols: dim_in,
            data,
        }
    }

    pub fn dim_out(&self) -> usize {
        self.rows
    }

    pub fn dim_in(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    fn column_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }

    /// `T v` for an arbitrary real vector.
    pub fn apply_slice(&self, v: &[f64]) -> Result<Vec<f64>> {
        same_dim(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        same_dim(self.cols, other.rows)?;
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(StochasticMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    /// Largest deviation of a row sum from one (square matrices only).
    pub fn row_sum_deviation(&self) -> f64 {
        (0..self.rows)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Square with every row and column summing to one within [`TOL_STOCHASTIC`].
    pub fn is_doubly_stochastic(&self) -> bool {
        self.rows == self.cols
            && self.row_sum_deviation() <= TOL_STOCHASTIC
            && (0..self.cols).all(|j| (self.column_sum(j) - 1.0).abs() <= TOL_STOCHASTIC)
    }

    /// l1 distance between `T q` and `q`.
    pub fn fixed_point_residual(&self, q: &ProbVec) -> Result<f64> {
        same_dim(self.rows, self.cols)?;
        let tq = self.apply_slice(q.as_slice())?;
        Ok(tq.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum())
    }

    pub fn preserves(&self, q: &ProbVec, tol: f64) -> bool {
        matches!(self.fixed_point_residual(q), Ok(r) if r <= tol)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `p'_i = sum_j T_ij p_j`.
pub fn apply_stochastic(t: &StochasticMatrix, p: &ProbVec) -> Result<ProbVec> {
    Ok(ProbVec::from_computed(t.apply_slice(p.as_slice())?))
}

/// Energy levels and inverse temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GibbsSpecRepr", into = "GibbsSpecRepr")]
pub struct GibbsSpec {
    energies: Vec<f64>,
    beta: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct GibbsSpecRepr {
    energies: Vec<f64>,
    beta: f64,
}

impl TryFrom<GibbsSpecRepr> for GibbsSpec {
    type Error = Error;
    fn try_from(r: GibbsSpecRepr) -> Result<Self> {
        GibbsSpec::new(r.energies, r.beta)
    }
}

impl From<GibbsSpec> for GibbsSpecRepr {
    fn from(g: GibbsSpec) -> Self {
        GibbsSpecRepr {
            energies: g.energies,
            beta: g.beta,
        }
    }
}

/// The Gibbs distribution with its partition function and free energy.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsState {
    pub state: ProbVec,
    pub partition: f64,
    /// `-ln(Z)/beta`; `None` at infinite temperature.
    pub free_energy: Option<f64>,
}

impl GibbsSpec {
    pub fn new(energies: Vec<f64>, beta: f64) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be finite and non-negative",
            });
        }
        Ok(GibbsSpec { energies, beta })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn with_energies(&self, energies: Vec<f64>) -> Result<GibbsSpec> {
        GibbsSpec::new(energies, self.beta)
    }

    fn min_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `ln Z`, evaluated with the ground energy factored out.
    pub fn log_partition(&self) -> f64 {
        let e0 = self.min_energy();
        let s: f64 = self
            .energies
            .iter()
            .map(|e| (-self.beta * (e - e0)).exp())
            .sum();
        -self.beta * e0 + s.ln()
    }

    pub fn partition(&self) -> f64 {
        self.log_partition().exp()
    }

    pub fn free_energy(&self) -> Result<f64> {
        if self.beta == 0.0 {
            return Err(Error::UndefinedFreeEnergy);
        }
        Ok(-self.log_partition() / self.beta)
    }

    /// Requires a strictly positive temperature-inverse.
    pub fn require_positive_beta(&self) -> Result<()> {
        if self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::UndefinedFreeEnergy)
        }
    }

    pub fn state(&self) -> ProbVec {
        let e0 = self.min_energy();
        let w: Vec<f64> = self
            .energies
            .iter()
            .map(|e| (-self.beta * (e - e0)).exp())
            .collect();
        let s: f64 = w.iter().sum();
        ProbVec::from_computed(w.into_iter().map(|x| x / s).collect())
    }

    /// Average energy of `p`.
    pub fn mean_energy(&self, p: &ProbVec) -> Result<f64> {
        same_dim(self.dim(), p.dim())?;
        Ok(self.energies.iter().zip(p.iter()).map(|(e, x)| e * x).sum())
    }
}

/// Gibbs distribution `exp(-beta E_i)/Z`, with `Z` and `F = -ln(Z)/beta`.
pub fn gibbs_state(spec: &GibbsSpec) -> GibbsState {
    GibbsState {
        state: spec.state(),
        partition: spec.partition(),
        free_energy: spec.free_energy().ok(),
    }
}

/// A random column-stochastic matrix with `T q = q`, built from symmetric
/// Metropolis rates `A_ij min(1, q_j / q_i)` (detailed balance) with the
/// diagonal filled in to make each column sum to one. Deterministic in `seed`.
pub fn random_stochastic_fixed_point(q: &ProbVec, seed: u64) -> Result<StochasticMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_fixed_point_with(q, &mut rng)
}

pub(crate) fn random_fixed_point_with<R: Rng + ?Sized>(
    q: &ProbVec,
    rng: &mut R,
) -> Result<StochasticMatrix> {
    q.require_full_support()?;
    let d = q.dim();
    let mut rates = vec![0.0; d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            let a: f64 = rng.random();
            // column i holds the rate of i -> j
            rates[j * d + i] = a * (q.get(j) / q.get(i)).min(1.0);
            rates[i * d + j] = a * (q.get(i) / q.get(j)).min(1.0);
        }
    }
    let max_out = (0..d)
        .map(|i| (0..d).map(|j| rates[j * d + i]).sum::<f64>())
        .fold(0.0, f64::max);
    if max_out > 0.0 {
        let scale = rng.random_range(0.5..=1.0) / max_out;
        rates.iter_mut().for_each(|r| *r *= scale);
    }
    for i in 0..d {
        let out: f64 = (0..d).filter(|&j| j != i).map(|j| rates[j * d + i]).sum();
        rates[i * d + i] = (1.0 - out).max(0.0);
    }
    Ok(StochasticMatrix::from_row_major_unchecked(d, d, rates))
}
