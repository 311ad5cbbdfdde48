//! Finite-dimensional quantum states and channels: density matrices with a
//! cached spectral decomposition, Kraus channels and their predicates, Gibbs
//! states of Hermitian Hamiltonians, partial traces, distances, thermal
//! operations and seeded random generators.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{Complex, ComplexField, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::prob::{decreasing_order, same_dim, ProbVec, StochasticMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Hermiticity and positivity tolerance for state validation.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance of the channel predicates.
pub const CHANNEL_TOL: f64 = 1e-8;
/// Eigenvalues at or below this multiple of the top eigenvalue count as zero.
pub const RANK_TOL: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Eigenvalues in non-increasing order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// `sum_k f(lambda_k) |v_k><v_k|`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.vectors.nrows();
        let mut out = CMatrix::zeros(d, d);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out += (&v * v.adjoint()) * c(w);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// `(m + m^dag) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Largest entry of `|m - m^dag|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral decomposition of the Hermitian part of `m`, sorted decreasingly.
pub fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = decreasing_order(&vals);
    let d = vals.len();
    let mut vectors = CMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Spectrum {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors,
    }
}

/// `f(m)` for Hermitian `m` by functional calculus.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    hermitian_eigen(m).apply(f)
}

/// Positive part `(m)_+` of a Hermitian matrix.
pub fn positive_part(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |x| x.max(0.0))
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    let s = hermitian_eigen(m);
    s.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigen(m).values.iter().map(|x| x.abs()).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

/// `tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut s = c(0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    if let Some(index) = m.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(m.nrows())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Unit trace.
    Normalized,
    /// Trace at most one.
    Subnormalized,
    /// Any positive semidefinite operator.
    Unnormalized,
}

/// A positive semidefinite operator, by default of unit trace.
pub struct DensityMatrix {
    mat: CMatrix,
    normalization: Normalization,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for DensityMatrix {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        DensityMatrix {
            mat: self.mat.clone(),
            normalization: self.normalization,
            spectrum,
        }
    }
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMatrix")
            .field("mat", &self.mat)
            .field("normalization", &self.normalization)
            .finish()
    }
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat && self.normalization == other.normalization
    }
}

impl DensityMatrix {
    /// Validates a unit-trace state. Eigenvalues down to `-1e-10` are clamped
    /// to zero and the trace is restored.
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::validated(mat, Normalization::Normalized)
    }

    /// A state of trace at most one.
    pub fn subnormalized(mat: CMatrix) -> Result<Self> {
        Self::validated(mat, Normalization::Subnormalized)
    }

    /// Any positive semidefinite operator, such as `exp(-beta H)`.
    pub fn positive(mat: CMatrix) -> Result<Self> {
        Self::validated(mat, Normalization::Unnormalized)
    }

    /// Rescales a nonzero positive semidefinite matrix to unit trace.
    pub fn normalize(mat: CMatrix) -> Result<Self> {
        let tr = trace_re(&mat);
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::BadTrace { trace: tr });
        }
        Self::new(mat / c(tr))
    }

    fn validated(mat: CMatrix, normalization: Normalization) -> Result<Self> {
        check_square(&mat)?;
        let scale = mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let deviation = hermiticity_deviation(&mat);
        if deviation > STATE_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        let spectrum = hermitian_eigen(&mat);
        let min = spectrum.values.last().copied().unwrap_or(0.0);
        let top = spectrum.values[0].abs().max(1.0);
        if min < -STATE_TOL * top {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let trace: f64 = spectrum.values.iter().sum();
        match normalization {
            Normalization::Normalized if (trace - 1.0).abs() > STATE_TOL * top.max(1.0) => {
                return Err(Error::BadTrace { trace });
            }
            Normalization::Subnormalized if trace > 1.0 + STATE_TOL => {
                return Err(Error::BadTrace { trace });
            }
            _ => {}
        }
        let clamped = min < 0.0;
        let mut values: Vec<f64> = spectrum.values.iter().map(|x| x.max(0.0)).collect();
        if clamped && normalization == Normalization::Normalized {
            let s: f64 = values.iter().sum();
            values.iter_mut().for_each(|x| *x /= s);
        }
        let spectrum = Spectrum {
            values,
            vectors: spectrum.vectors,
        };
        let mat = if clamped {
            spectrum.apply(|x| x)
        } else {
            hermitian_part(&mat)
        };
        let cache = OnceLock::new();
        let _ = cache.set(spectrum);
        Ok(DensityMatrix {
            mat,
            normalization,
            spectrum: cache,
        })
    }

    /// Wraps a matrix produced by trusted arithmetic: hermitizes and clamps
    /// tiny negative eigenvalues, classifying normalization by the trace.
    pub(crate) fn from_computed(mat: CMatrix) -> Self {
        let spectrum = hermitian_eigen(&mat);
        let values: Vec<f64> = spectrum.values.iter().map(|x| x.max(0.0)).collect();
        let trace: f64 = values.iter().sum();
        let normalization = if (trace - 1.0).abs() <= 1e-9 {
            Normalization::Normalized
        } else if trace < 1.0 {
            Normalization::Subnormalized
        } else {
            Normalization::Unnormalized
        };
        let spectrum = Spectrum {
            values,
            vectors: spectrum.vectors,
        };
        let mat = spectrum.apply(|x| x);
        let cache = OnceLock::new();
        let _ = cache.set(spectrum);
        DensityMatrix {
            mat,
            normalization,
            spectrum: cache,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = c(x);
        }
        Self::new(m)
    }

    pub fn from_probvec(p: &ProbVec) -> Self {
        Self::from_diagonal(p.as_slice()).expect("a probability vector is a valid state")
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let n = v.norm_squared();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::BadTrace { trace: n });
        }
        Self::new(&v * v.adjoint() / c(n))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::from_probvec(&ProbVec::uniform(d))
    }

    /// `sum_k p_k |v_k><v_k|` for orthonormal columns `v_k`.
    pub fn from_spectrum(p: &ProbVec, basis: &CMatrix) -> Result<Self> {
        same_dim(p.dim(), basis.ncols())?;
        let s = Spectrum {
            values: p.as_slice().to_vec(),
            vectors: basis.clone(),
        };
        Self::new(s.apply(|x| x))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.mat)
    }

    /// Spectral decomposition, computed once.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            let mut s = hermitian_eigen(&self.mat);
            s.values.iter_mut().for_each(|x| *x = x.max(0.0));
            s
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum().values
    }

    /// Eigenvalues as a probability vector (trace-normalized).
    pub fn spectrum_probvec(&self) -> Result<ProbVec> {
        ProbVec::normalize(self.eigenvalues().to_vec())
    }

    pub fn rank_threshold(&self) -> f64 {
        RANK_TOL * self.eigenvalues()[0]
    }

    pub fn rank(&self) -> usize {
        let t = self.rank_threshold();
        self.eigenvalues().iter().filter(|&&x| x > t).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim()
    }

    pub fn is_pure(&self) -> bool {
        self.rank() == 1
    }

    pub fn support_projector(&self) -> CMatrix {
        let t = self.rank_threshold();
        self.spectrum().apply(|x| if x > t { 1.0 } else { 0.0 })
    }

    /// `f` applied to eigenvalues above the rank threshold; zero elsewhere.
    pub fn on_support(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let t = self.rank_threshold();
        self.spectrum().apply(|x| if x > t { f(x) } else { 0.0 })
    }

    /// `rho^a` on the support.
    pub fn power(&self, a: f64) -> CMatrix {
        self.on_support(|x| x.powf(a))
    }

    /// Eigenvalues below the rank threshold are treated as zero.
    pub fn sqrt(&self) -> CMatrix {
        let cut = self.rank_threshold();
        self.spectrum().apply(|x| if x > cut { x.sqrt() } else { 0.0 })
    }

    /// Real diagonal in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mat = kron(&self.mat, &other.mat);
        let normalization = match (self.normalization, other.normalization) {
            (Normalization::Normalized, Normalization::Normalized) => Normalization::Normalized,
            (Normalization::Unnormalized, _) | (_, Normalization::Unnormalized) => {
                Normalization::Unnormalized
            }
            _ => Normalization::Subnormalized,
        };
        DensityMatrix {
            mat,
            normalization,
            spectrum: OnceLock::new(),
        }
    }

    /// `U rho U^dag`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim(), u.ncols())?;
        Ok(DensityMatrix::from_computed(u * &self.mat * u.adjoint()))
    }

    /// Whether `[rho, sigma] = 0` within `tol`.
    pub fn commutes_with(&self, other: &DensityMatrix, tol: f64) -> bool {
        self.dim() == other.dim()
            && (&self.mat * &other.mat - &other.mat * &self.mat)
                .iter()
                .all(|z| z.norm() <= tol)
    }
}

/// Nested rows of `[re, im]` pairs.
type ComplexRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMatrix) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &ComplexRows) -> Result<CMatrix> {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    if r == 0 || cols == 0 {
        return Err(Error::Empty);
    }
    if let Some(bad) = rows.iter().find(|row| row.len() != cols) {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(r, cols, |i, j| {
        Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(&self.mat).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = ComplexRows::deserialize(d)?;
        let m = matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Eigenvalues of `rho` in non-increasing order with eigenvectors as columns.
pub fn spectral_decompose(rho: &DensityMatrix) -> Spectrum {
    rho.spectrum().clone()
}

/// Which factor [`partial_trace`] keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of an operator on `C^{d_a} (x) C^{d_b}`.
pub fn partial_trace_matrix(m: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    if m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: m.nrows(),
        });
    }
    Ok(match keep {
        Keep::A => CMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Keep::B => CMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    })
}

pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_computed(partial_trace_matrix(
        rho.matrix(),
        dims,
        keep,
    )?))
}

/// A completely positive map in Kraus form, `d_in -> d_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<CMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelPredicates {
    pub cptp: bool,
    pub trace_nonincreasing: bool,
    pub unital: bool,
    pub gibbs_preserving: Option<bool>,
    pub gibbs_sub_preserving: Option<bool>,
}

impl QuantumChannel {
    /// Accepts Kraus operators of a trace non-increasing map.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_cp(kraus)?;
        let excess = ch.trace_excess();
        if excess > CHANNEL_TOL {
            return Err(Error::NotTraceNonincreasing { excess });
        }
        Ok(ch)
    }

    /// Accepts any completely positive map with consistent dimensions.
    pub fn new_cp(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::Empty)?;
        let (r, cdim) = first.shape();
        for k in &kraus {
            if k.shape() != (r, cdim) {
                return Err(Error::DimensionMismatch {
                    expected: r * cdim,
                    found: k.nrows() * k.ncols(),
                });
            }
        }
        Ok(QuantumChannel { kraus })
    }

    pub(crate) fn from_kraus_unchecked(kraus: Vec<CMatrix>) -> Self {
        QuantumChannel { kraus }
    }

    pub fn identity(d: usize) -> Self {
        QuantumChannel {
            kraus: vec![CMatrix::identity(d, d)],
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        let d = check_square(&u)?;
        let dev = (u.adjoint() * &u - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > CHANNEL_TOL {
            return Err(Error::Invalid(format!(
                "matrix is not unitary (deviation {dev:e})"
            )));
        }
        Ok(QuantumChannel { kraus: vec![u] })
    }

    /// Complete dephasing in the orthonormal basis given by the columns.
    pub fn dephasing(basis: &CMatrix) -> Self {
        QuantumChannel {
            kraus: (0..basis.ncols())
                .map(|k| {
                    let v = basis.column(k);
                    &v * v.adjoint()
                })
                .collect(),
        }
    }

    /// Classical map `T` acting between the given orthonormal bases:
    /// Kraus operators `sqrt(T_ji) |out_j><in_i|`.
    pub fn classical(t: &StochasticMatrix, basis_in: &CMatrix, basis_out: &CMatrix) -> Result<Self> {
        same_dim(t.dim_in(), basis_in.ncols())?;
        same_dim(t.dim_out(), basis_out.ncols())?;
        let mut kraus = Vec::new();
        for j in 0..t.dim_out() {
            for i in 0..t.dim_in() {
                let w = t.get(j, i);
                if w > 0.0 {
                    kraus.push(basis_out.column(j) * basis_in.column(i).adjoint() * c(w.sqrt()));
                }
            }
        }
        if kraus.is_empty() {
            return Err(Error::Empty);
        }
        Ok(QuantumChannel { kraus })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn dim_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// `sum_k M_k X M_k^dag` for any operator `X`.
    pub fn apply_matrix(&self, x: &CMatrix) -> Result<CMatrix> {
        same_dim(self.dim_in(), x.nrows())?;
        let mut out = CMatrix::zeros(self.dim_out(), self.dim_out());
        for m in &self.kraus {
            out += m * x * m.adjoint();
        }
        Ok(out)
    }

    /// Heisenberg picture `sum_k M_k^dag Y M_k`.
    pub fn apply_adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        same_dim(self.dim_out(), y.nrows())?;
        let mut out = CMatrix::zeros(self.dim_in(), self.dim_in());
        for m in &self.kraus {
            out += m.adjoint() * y * m;
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_computed(self.apply_matrix(rho.matrix())?))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &QuantumChannel) -> Result<QuantumChannel> {
        same_dim(first.dim_out(), self.dim_in())?;
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| first.kraus.iter().map(move |b| a * b))
            .collect();
        Ok(QuantumChannel { kraus })
    }

    pub fn tensor(&self, other: &QuantumChannel) -> QuantumChannel {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| other.kraus.iter().map(move |b| kron(a, b)))
            .collect();
        QuantumChannel { kraus }
    }

    /// `sum_k M_k^dag M_k`.
    pub fn kraus_sum(&self) -> CMatrix {
        self.apply_adjoint(&CMatrix::identity(self.dim_out(), self.dim_out()))
            .expect("dimensions agree")
    }

    fn trace_excess(&self) -> f64 {
        let d = self.dim_in();
        hermitian_eigen(&(self.kraus_sum() - CMatrix::identity(d, d))).values[0]
    }

    pub fn is_trace_nonincreasing(&self, tol: f64) -> bool {
        self.trace_excess() <= tol
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        let d = self.dim_in();
        (self.kraus_sum() - CMatrix::identity(d, d))
            .iter()
            .all(|z| z.norm() <= tol)
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        let (di, dout) = (self.dim_in(), self.dim_out());
        di == dout
            && (self.apply_matrix(&CMatrix::identity(di, di)).expect("dims")
                - CMatrix::identity(dout, dout))
            .iter()
            .all(|z| z.norm() <= tol)
    }

    /// `E(rho^G) = rho^G` for the Gibbs state of `spec`.
    pub fn is_gibbs_preserving(&self, spec: &QGibbsSpec, tol: f64) -> bool {
        if spec.dim() != self.dim_in() || spec.dim() != self.dim_out() {
            return false;
        }
        let g = spec.state();
        let img = self.apply_matrix(g.matrix()).expect("dims");
        (img - g.matrix()).iter().all(|z| z.norm() <= tol)
    }

    /// `exp(-beta H_out) - E(exp(-beta H_in))` is positive semidefinite.
    pub fn is_gibbs_sub_preserving(&self, spec_in: &QGibbsSpec, spec_out: &QGibbsSpec, tol: f64) -> bool {
        if spec_in.dim() != self.dim_in() || spec_out.dim() != self.dim_out() {
            return false;
        }
        let img = self.apply_matrix(&spec_in.boltzmann()).expect("dims");
        let diff = spec_out.boltzmann() - img;
        hermitian_eigen(&diff).values.last().copied().unwrap_or(0.0) >= -tol
    }

    pub fn predicates(
        &self,
        gibbs: Option<&QGibbsSpec>,
        gibbs_out: Option<&QGibbsSpec>,
    ) -> ChannelPredicates {
        ChannelPredicates {
            cptp: self.is_cptp(CHANNEL_TOL),
            trace_nonincreasing: self.is_trace_nonincreasing(CHANNEL_TOL),
            unital: self.is_unital(CHANNEL_TOL),
            gibbs_preserving: gibbs.map(|g| self.is_gibbs_preserving(g, CHANNEL_TOL)),
            gibbs_sub_preserving: gibbs
                .map(|g| self.is_gibbs_sub_preserving(g, gibbs_out.unwrap_or(g), CHANNEL_TOL)),
        }
    }
}

impl Serialize for QuantumChannel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ks: Vec<ComplexRows> = self.kraus.iter().map(matrix_to_rows).collect();
        ks.serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuantumChannel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ks = Vec::<ComplexRows>::deserialize(d)?;
        let kraus = ks
            .iter()
            .map(matrix_from_rows)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        QuantumChannel::new_cp(kraus).map_err(serde::de::Error::custom)
    }
}

/// A Hermitian Hamiltonian with an inverse temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct QGibbsSpec {
    hamiltonian: CMatrix,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct QGibbsRepr {
    hamiltonian: ComplexRows,
    beta: f64,
}

impl Serialize for QGibbsSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        QGibbsRepr {
            hamiltonian: matrix_to_rows(&self.hamiltonian),
            beta: self.beta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QGibbsSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = QGibbsRepr::deserialize(d)?;
        let h = matrix_from_rows(&r.hamiltonian).map_err(serde::de::Error::custom)?;
        QGibbsSpec::new(h, r.beta).map_err(serde::de::Error::custom)
    }
}

impl QGibbsSpec {
    pub fn new(hamiltonian: CMatrix, beta: f64) -> Result<Self> {
        check_square(&hamiltonian)?;
        let scale = hamiltonian.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let deviation = hermiticity_deviation(&hamiltonian);
        if deviation > STATE_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be finite and non-negative",
            });
        }
        Ok(QGibbsSpec {
            hamiltonian: hermitian_part(&hamiltonian),
            beta,
        })
    }

    /// Diagonal Hamiltonian with the given levels.
    pub fn from_energies(energies: &[f64], beta: f64) -> Result<Self> {
        let d = energies.len();
        let mut h = CMatrix::zeros(d, d);
        for (i, &e) in energies.iter().enumerate() {
            h[(i, i)] = c(e);
        }
        Self::new(h, beta)
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn energy_spectrum(&self) -> Spectrum {
        hermitian_eigen(&self.hamiltonian)
    }

    pub fn log_partition(&self) -> f64 {
        let e = self.energy_spectrum().values;
        let e0 = e.iter().copied().fold(f64::INFINITY, f64::min);
        let s: f64 = e.iter().map(|x| (-self.beta * (x - e0)).exp()).sum();
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

    /// `exp(-beta H)` without normalization.
    pub fn boltzmann(&self) -> CMatrix {
        hermitian_fn(&self.hamiltonian, |e| (-self.beta * e).exp())
    }

    pub fn state(&self) -> DensityMatrix {
        let s = self.energy_spectrum();
        let e0 = s.values.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = s.values.iter().map(|e| (-self.beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        let p = ProbVec::from_computed(w.into_iter().map(|x| x / z).collect());
        DensityMatrix::from_spectrum(&p, &s.vectors).expect("Gibbs state is valid")
    }

    /// `H (x) I + I (x) H'` at the common temperature.
    pub fn tensor(&self, other: &QGibbsSpec) -> Result<QGibbsSpec> {
        let (d1, d2) = (self.dim(), other.dim());
        let h = kron(&self.hamiltonian, &CMatrix::identity(d2, d2))
            + kron(&CMatrix::identity(d1, d1), &other.hamiltonian);
        QGibbsSpec::new(h, self.beta)
    }
}

/// Trace distance, fidelity and purified distance of two states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distances {
    pub trace: f64,
    pub fidelity: f64,
    pub purified: f64,
}

/// `(1/2) || rho - sigma ||_1`.
pub fn trace_distance_q(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    Ok(0.5 * trace_norm(&(rho.matrix() - sigma.matrix())))
}

/// `tr sqrt(sqrt(rho) sigma sqrt(rho))`, computed as the trace norm of
/// `sqrt(rho) sqrt(sigma)` so that rounding noise is not square-rooted.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let prod = rho.sqrt() * sigma.sqrt();
    let f: f64 = prod.singular_values().iter().sum();
    Ok(f.min(1.0))
}

pub fn distances(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Distances> {
    let trace = trace_distance_q(rho, sigma)?;
    let fidelity = fidelity(rho, sigma)?;
    Ok(Distances {
        trace,
        fidelity,
        purified: (1.0 - fidelity * fidelity).max(0.0).sqrt(),
    })
}

/// `rho_S -> tr_B[U (rho_S (x) rho_B^G) U^dag]` for an energy-conserving `U`.
pub fn thermal_operation_channel(
    spec_s: &QGibbsSpec,
    bath: &QGibbsSpec,
    u: &CMatrix,
) -> Result<QuantumChannel> {
    let (ds, db) = (spec_s.dim(), bath.dim());
    same_dim(ds * db, u.nrows())?;
    same_dim(ds * db, u.ncols())?;
    let total = kron(spec_s.hamiltonian(), &CMatrix::identity(db, db))
        + kron(&CMatrix::identity(ds, ds), bath.hamiltonian());
    let comm = u * &total - &total * u;
    let norm = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = total.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if norm > 1e-8 * scale {
        return Err(Error::EnergyConservation { norm });
    }
    let bs = bath.energy_spectrum();
    let g = bath.state();
    let weights: Vec<f64> = (0..db)
        .map(|b| {
            let v = bs.vectors.column(b);
            (v.adjoint() * g.matrix() * v)[(0, 0)].re
        })
        .collect();
    let mut kraus = Vec::new();
    let id = CMatrix::identity(ds, ds);
    for b in 0..db {
        if weights[b] <= 0.0 {
            continue;
        }
        let ket_b = kron(&id, &CMatrix::from_column_slice(db, 1, bs.vectors.column(b).as_slice()));
        for b2 in 0..db {
            let bra = kron(&id, &CMatrix::from_column_slice(db, 1, bs.vectors.column(b2).as_slice()));
            let m = bra.adjoint() * u * &ket_b * c(weights[b].sqrt());
            kraus.push(m);
        }
    }
    QuantumChannel::new(kraus)
}

fn gaussian_c<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c(rng))
}

/// `rows x cols` matrix with orthonormal columns, Haar distributed.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / c(d.norm()) } else { c(1.0) };
        let col = q.column(k) * phase;
        q.set_column(k, &col);
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    haar_isometry(d, d, rng)
}

/// Random state of the given rank from the induced (Ginibre) measure.
pub fn random_density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = trace_re(&m);
    DensityMatrix::from_computed(m / c(tr))
}

pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    random_density(d, 1, rng)
}

/// Random CPTP map from a Haar isometry into `C^{d_out} (x) C^{k}`.
///
/// `k` is raised to `ceil(d_in / d_out)` when smaller, since no isometry
/// exists below that.
pub fn random_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, k: usize, rng: &mut R) -> QuantumChannel {
    let k = k.max(d_in.div_ceil(d_out.max(1))).max(1);
    let v = haar_isometry(d_out * k, d_in, rng);
    let kraus = (0..k)
        .map(|j| CMatrix::from_fn(d_out, d_in, |a, i| v[(a * k + j, i)]))
        .collect();
    QuantumChannel::from_kraus_unchecked(kraus)
}

/// Random unital channel: a mixture of `k` Haar unitaries.
pub fn random_unital_channel<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> QuantumChannel {
    let w: Vec<f64> = (0..k.max(1)).map(|_| rng.random::<f64>() + 0.05).collect();
    let z: f64 = w.iter().sum();
    let kraus = w
        .iter()
        .map(|x| haar_unitary(d, rng) * c((x / z).sqrt()))
        .collect();
    QuantumChannel::from_kraus_unchecked(kraus)
}

/// Unitary on system (x) bath-copy that is Haar random inside each total
/// energy eigenspace, written in the product energy eigenbasis.
fn energy_block_unitary<R: Rng + ?Sized>(levels: &[f64], rng: &mut R) -> CMatrix {
    let d = levels.len();
    let n = d * d;
    let totals: Vec<f64> = (0..n).map(|k| levels[k / d] + levels[k % d]).collect();
    let mut u = CMatrix::zeros(n, n);
    let mut assigned = vec![false; n];
    for k in 0..n {
        if assigned[k] {
            continue;
        }
        let block: Vec<usize> = (k..n)
            .filter(|&j| !assigned[j] && (totals[j] - totals[k]).abs() <= 1e-9)
            .collect();
        let v = haar_unitary(block.len(), rng);
        for (a, &i) in block.iter().enumerate() {
            assigned[i] = true;
            for (b, &j) in block.iter().enumerate() {
                u[(i, j)] = v[(a, b)];
            }
        }
    }
    u
}

/// Random thermal operation with a bath that copies the system Hamiltonian.
pub fn random_thermal_operation<R: Rng + ?Sized>(spec: &QGibbsSpec, rng: &mut R) -> Result<QuantumChannel> {
    let s = spec.energy_spectrum();
    let block = energy_block_unitary(&s.values, rng);
    let basis = kron(&s.vectors, &s.vectors);
    let u = &basis * block * basis.adjoint();
    thermal_operation_channel(spec, spec, &u)
}

/// Random Gibbs-preserving channel: a classical Gibbs-preserving map in the
/// energy eigenbasis after a random thermal operation.
pub fn random_gibbs_preserving<R: Rng + ?Sized>(spec: &QGibbsSpec, rng: &mut R) -> Result<QuantumChannel> {
    let s = spec.energy_spectrum();
    let thermal = random_thermal_operation(spec, rng)?;
    let g = spec.state();
    let pg: Vec<f64> = (0..spec.dim())
        .map(|k| {
            let v = s.vectors.column(k);
            (v.adjoint() * g.matrix() * v)[(0, 0)].re
        })
        .collect();
    let t = crate::prob::random_fixed_point_with(&ProbVec::normalize(pg)?, rng)?;
    let classical = QuantumChannel::classical(&t, &s.vectors, &s.vectors)?;
    classical.compose(&thermal)
}

/// Pauli matrices `(X, Y, Z)`.
pub fn pauli() -> [CMatrix; 3] {
    let z = c(0.0);
    let one = c(1.0);
    let i = Complex::new(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// Qubit state with Bloch vector `r`, `|r| <= 1`.
pub fn qubit_state(r: [f64; 3]) -> Result<DensityMatrix> {
    let [x, y, z] = pauli();
    let m = (CMatrix::identity(2, 2) + x * c(r[0]) + y * c(r[1]) + z * c(r[2])) * c(0.5);
    DensityMatrix::new(m)
}

/// `<v| m |v>` for a column `v`, real part.
pub fn expectation(m: &CMatrix, v: &nalgebra::DVectorView<'_, C64>) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

/// Modulus helper kept for callers that work with raw complex scalars.
pub fn modulus(z: C64) -> f64 {
    ComplexField::modulus(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).iter().all(|z| z.norm() <= tol)
    }

    fn plus() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        DensityMatrix::pure(&[c(s), c(s)]).unwrap()
    }

    #[test]
    fn spectral_examples() {
        let r = DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let s = spectral_decompose(&r);
        assert!((s.values[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.values[1] - 1.0 / 3.0).abs() < 1e-15);
        let s = spectral_decompose(&plus());
        assert!((s.values[0] - 1.0).abs() < 1e-14 && s.values[1].abs() < 1e-14);
        let v = s.vectors.column(0);
        assert!((v[0].norm() - 0.5f64.sqrt()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_density(4, 4, &mut rng);
        assert!(close(&r.spectrum().apply(|x| x), r.matrix(), 1e-12));
    }

    #[test]
    fn validation() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), c(0.2), c(0.5)]);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian { .. })));
        let m = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotPositive { .. })));
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.3)]);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(Error::BadTrace { .. })));
        assert!(DensityMatrix::subnormalized(m).is_ok());
        // tiny negative eigenvalue is clamped
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0 + 1e-12), c(0.0), c(0.0), c(-1e-12)]);
        let r = DensityMatrix::new(m).unwrap();
        assert!(r.eigenvalues().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_density(3, 2, &mut rng);
        let s = serde_json::to_string(&r).unwrap();
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert!(close(back.matrix(), r.matrix(), 1e-15));
        let ch = random_channel(2, 3, 2, &mut rng);
        let s = serde_json::to_string(&ch).unwrap();
        let back: QuantumChannel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ch);
    }

    #[test]
    fn channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_density(3, 3, &mut rng);
        let id = QuantumChannel::identity(3);
        assert!(close(id.apply(&r).unwrap().matrix(), r.matrix(), 1e-14));
        let spec = QGibbsSpec::from_energies(&[0.0, 0.4, 1.3], 1.0).unwrap();
        let basis = spec.energy_spectrum().vectors;
        let deph = QuantumChannel::dephasing(&basis);
        let out = deph.apply(&r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { r.matrix()[(i, i)] } else { c(0.0) };
                assert!((out.matrix()[(i, j)] - want).norm() < 1e-14);
            }
        }
        assert!(deph.is_gibbs_preserving(&spec, 1e-12));
        let ch = random_channel(3, 2, 3, &mut rng);
        assert!(ch.is_cptp(1e-10));
        let out = ch.apply(&r).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-10);
        let u = QuantumChannel::unitary(haar_unitary(3, &mut rng)).unwrap();
        let p = u.predicates(None, None);
        assert!(p.cptp && p.unital && p.trace_nonincreasing);
    }

    #[test]
    fn partial_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_density(2, 2, &mut rng);
        let b = random_density(3, 2, &mut rng);
        let ab = a.tensor(&b);
        assert!(close(partial_trace(&ab, (2, 3), Keep::A).unwrap().matrix(), a.matrix(), 1e-14));
        assert!(close(partial_trace(&ab, (2, 3), Keep::B).unwrap().matrix(), b.matrix(), 1e-14));
        let s = 0.5f64.sqrt();
        let bell = DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let half = partial_trace(&bell, (2, 2), Keep::A).unwrap();
        assert!(close(half.matrix(), DensityMatrix::maximally_mixed(2).matrix(), 1e-15));
        assert!(partial_trace(&bell, (3, 2), Keep::A).is_err());
    }

    #[test]
    fn distance_examples() {
        let r = plus();
        let d = distances(&r, &r).unwrap();
        assert!(d.trace.abs() < 1e-14 && (d.fidelity - 1.0).abs() < 1e-7 && d.purified < 1e-3);
        let zero = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let one = DensityMatrix::from_diagonal(&[0.0, 1.0]).unwrap();
        let d = distances(&zero, &one).unwrap();
        assert!((d.trace - 1.0).abs() < 1e-14 && d.fidelity.abs() < 1e-14);
        assert!((d.purified - 1.0).abs() < 1e-14);
        let a = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::from_diagonal(&[0.4, 0.6]).unwrap();
        let d = distances(&a, &b).unwrap();
        assert!((d.trace - 0.3).abs() < 1e-14);
        let bc = (0.7f64 * 0.4).sqrt() + (0.3f64 * 0.6).sqrt();
        assert!((d.fidelity - bc).abs() < 1e-12);
    }

    #[test]
    fn thermal_operations() {
        let spec = QGibbsSpec::from_energies(&[0.0, 1.0], 0.7).unwrap();
        let id = thermal_operation_channel(&spec, &spec, &CMatrix::identity(4, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_density(2, 2, &mut rng);
        assert!(close(id.apply(&r).unwrap().matrix(), r.matrix(), 1e-14));
        // resonant swap |01> <-> |10>
        let mut swap = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(i, j)] = c(1.0);
        }
        let ch = thermal_operation_channel(&spec, &spec, &swap).unwrap();
        assert!(ch.is_cptp(1e-12) && ch.is_gibbs_preserving(&spec, 1e-12));
        let bad = haar_unitary(4, &mut rng);
        assert!(matches!(
            thermal_operation_channel(&spec, &spec, &bad),
            Err(Error::EnergyConservation { .. })
        ));
        let spec3 = QGibbsSpec::from_energies(&[0.0, 0.5, 1.0], 1.2).unwrap();
        for _ in 0..5 {
            let ch = random_gibbs_preserving(&spec3, &mut rng).unwrap();
            assert!(ch.is_cptp(1e-9) && ch.is_gibbs_preserving(&spec3, 1e-9));
        }
    }
}
