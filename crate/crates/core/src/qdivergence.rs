//! Quantum entropies and divergences: von Neumann entropy, quantum relative
//! entropy, the min/max divergences, Petz and sandwiched Rényi divergences,
//! Petz quasi-entropies and the SLD/RLD quantum Fisher information.
//!
//! The second argument may be any positive semidefinite operator, so the
//! scaling rule `S(rho || sigma / Z) = S(rho || sigma) + ln Z` holds for the
//! whole family. Support projectors drop eigenvalues at or below
//! [`RANK_TOL`](crate::quantum::RANK_TOL) times the largest one.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::divergence::ConvexFnSpec;
use crate::error::{Error, Result};
use crate::prob::same_dim;
use crate::quantum::{
    c, hermitian_eigen, trace_product, trace_re, CMatrix, DensityMatrix, QuantumChannel,
};

/// Mass of `rho` outside the support of `sigma` above which divergences
/// that need `supp(rho) <= supp(sigma)` become infinite.
pub const SUPPORT_TOL: f64 = 1e-10;

pub fn von_neumann(rho: &DensityMatrix) -> f64 {
    -rho.eigenvalues()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `tr[rho (I - P_sigma)]`.
fn support_leak(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    trace_re(rho.matrix()) - trace_product(rho.matrix(), &sigma.support_projector()).re
}

fn supported(rho: &DensityMatrix, sigma: &DensityMatrix) -> bool {
    support_leak(rho, sigma) <= SUPPORT_TOL
}

/// `tr[rho ln rho - rho ln sigma]`, `+inf` when `rho` leaks outside `supp(sigma)`.
pub fn quantum_kl(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    if !supported(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let log_sigma = sigma.on_support(f64::ln);
    let cross = trace_product(rho.matrix(), &log_sigma).re;
    Ok(-von_neumann(rho) - cross)
}

/// `-ln tr[P_rho sigma]`.
pub fn q_renyi_0(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let t = trace_product(&rho.support_projector(), sigma.matrix()).re;
    Ok(if t > 0.0 { -t.ln() } else { f64::INFINITY })
}

/// `ln || sigma^{-1/2} rho sigma^{-1/2} ||`, the smallest `ln lambda` with
/// `rho <= lambda sigma`.
pub fn q_renyi_inf(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    if !supported(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let s = sigma.on_support(|x| x.powf(-0.5));
    let m = &s * rho.matrix() * &s;
    Ok(hermitian_eigen(&m).values[0].ln())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must not be NaN",
        });
    }
    Ok(())
}

/// Petz (simple) Rényi divergence `ln tr[rho^a sigma^(1-a)] / (a - 1)`.
///
/// Data processing is guaranteed for `0 <= a <= 2`; other finite orders are
/// evaluated by the same formula without that guarantee.
pub fn petz_renyi(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: f64) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return q_renyi_0(rho, sigma);
    }
    if alpha == 1.0 {
        return quantum_kl(rho, sigma);
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "Petz divergence is defined here for finite alpha >= 0",
        });
    }
    if alpha > 1.0 && !supported(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let a = rho.power(alpha);
    let b = sigma.power(1.0 - alpha);
    let t = trace_product(&a, &b).re;
    if t <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t.ln() / (alpha - 1.0))
}

/// Sandwiched Rényi divergence
/// `ln tr[(sigma^g rho sigma^g)^a] / (a - 1)`, `g = (1 - a) / (2a)`, for `a >= 1/2`.
pub fn sandwiched_renyi(rho: &DensityMatrix, sigma: &DensityMatrix, alpha: f64) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    check_alpha(alpha)?;
    if alpha < 0.5 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "sandwiched divergence requires alpha >= 1/2",
        });
    }
    if alpha == 1.0 {
        return quantum_kl(rho, sigma);
    }
    if alpha == f64::INFINITY {
        return q_renyi_inf(rho, sigma);
    }
    if alpha > 1.0 && !supported(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let g = (1.0 - alpha) / (2.0 * alpha);
    // With rho = A A^dag on its support, sigma^g rho sigma^g and
    // A^dag sigma^{2g} A share their nonzero spectrum; the small Gram matrix
    // has no numerically zero modes that x^alpha would inflate for alpha < 1.
    let spec = rho.spectrum();
    let r = rho.rank();
    let mut a = spec.vectors.columns(0, r).into_owned();
    for (k, mut col) in a.column_iter_mut().enumerate() {
        col *= c(spec.values[k].sqrt());
    }
    let inner = a.adjoint() * sigma.power(2.0 * g) * &a;
    let values = hermitian_eigen(&inner).values;
    let top = values[0];
    if top <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let scaled: f64 = values
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| (x / top).powf(alpha))
        .sum();
    Ok((alpha * top.ln() + scaled.ln()) / (alpha - 1.0))
}

/// Petz quasi-entropy `sum_ij q_j f(p_i / q_j) |<phi_i|psi_j>|^2` from the
/// spectral decompositions `rho = sum p_i |phi_i><phi_i|`,
/// `sigma = sum q_j |psi_j><psi_j|`.
///
/// `sigma` must be positive definite; zero eigenvalues of `rho` use `f(0)`.
pub fn petz_quasi_entropy(rho: &DensityMatrix, sigma: &DensityMatrix, f: &ConvexFnSpec) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    if !sigma.is_full_rank() {
        return Err(Error::RankDeficient);
    }
    let (sr, ss) = (rho.spectrum(), sigma.spectrum());
    let overlap = sr.vectors.adjoint() * &ss.vectors;
    let t = rho.rank_threshold();
    let mut total = 0.0;
    for (i, &p) in sr.values.iter().enumerate() {
        let p = if p > t { p } else { 0.0 };
        if p == 0.0 && !f.f_at_0.is_finite() {
            return Err(Error::Invalid(format!(
                "f({}) at 0 is infinite but the first state is rank deficient",
                f.label
            )));
        }
        for (j, &q) in ss.values.iter().enumerate() {
            let w = overlap[(i, j)].norm_sqr();
            if w == 0.0 {
                continue;
            }
            total += q * f.eval(p / q) * w;
        }
    }
    Ok(total)
}

type QStateMap = dyn Fn(&[f64]) -> Result<DensityMatrix> + Send + Sync;

/// A parametric family of density matrices treated as a black box.
#[derive(Clone)]
pub struct QParamFamily {
    state_at: Arc<QStateMap>,
    pub m: usize,
    pub fd_step: f64,
}

impl QParamFamily {
    pub fn new(m: usize, state_at: impl Fn(&[f64]) -> Result<DensityMatrix> + Send + Sync + 'static) -> Self {
        QParamFamily {
            state_at: Arc::new(state_at),
            m,
            fd_step: 1e-5,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn state_at(&self, theta: &[f64]) -> Result<DensityMatrix> {
        same_dim(self.m, theta.len())?;
        (self.state_at)(theta)
    }

    /// The family pushed through a parameter-independent channel.
    pub fn through(&self, channel: QuantumChannel) -> QParamFamily {
        let inner = self.state_at.clone();
        QParamFamily {
            state_at: Arc::new(move |th| channel.apply(&inner(th)?)),
            m: self.m,
            fd_step: self.fd_step,
        }
    }

    /// Central difference with one Richardson level.
    pub fn derivative(&self, theta: &[f64], k: usize) -> Result<CMatrix> {
        let central = |h: f64| -> Result<CMatrix> {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[k] += h;
            minus[k] -= h;
            let a = self.state_at(&plus)?;
            let b = self.state_at(&minus)?;
            Ok((a.matrix() - b.matrix()) / c(2.0 * h))
        };
        let coarse = central(self.fd_step)?;
        let fine = central(0.5 * self.fd_step)?;
        Ok((fine * c(4.0) - coarse) / c(3.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FisherKind {
    /// Symmetric logarithmic derivative.
    Sld,
    /// Right logarithmic derivative; the real symmetric part is returned.
    Rld,
}

/// Quantum Fisher information matrix at `theta`.
///
/// SLD: `J_kl = sum_ab 2 Re[(d_k rho)_ab (d_l rho)_ba] / (l_a + l_b)` in the
/// eigenbasis of `rho`. RLD: `Re tr[d_k rho d_l rho rho^{-1}]`.
pub fn quantum_fisher(fam: &QParamFamily, theta: &[f64], kind: FisherKind) -> Result<DMatrix<f64>> {
    let rho = fam.state_at(theta)?;
    if !rho.is_full_rank() {
        return Err(Error::RankDeficient);
    }
    let s = rho.spectrum();
    let derivs = (0..fam.m)
        .map(|k| fam.derivative(theta, k).map(|d| s.vectors.adjoint() * d * &s.vectors))
        .collect::<Result<Vec<_>>>()?;
    let lam = &s.values;
    let d = lam.len();
    let mut j = DMatrix::zeros(fam.m, fam.m);
    for k in 0..fam.m {
        for l in k..fam.m {
            let (a, b) = (&derivs[k], &derivs[l]);
            let mut v = 0.0;
            for x in 0..d {
                for y in 0..d {
                    let prod = a[(x, y)] * b[(y, x)];
                    v += match kind {
                        FisherKind::Sld => 2.0 * prod.re / (lam[x] + lam[y]),
                        FisherKind::Rld => prod.re / lam[x],
                    };
                }
            }
            j[(k, l)] = v;
            j[(l, k)] = v;
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{kl_slices, renyi_slices};
    use crate::quantum::{fidelity, qubit_state, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DensityMatrix {
        DensityMatrix::from_diagonal(v).unwrap()
    }

    fn plus() -> DensityMatrix {
        qubit_state([1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann(&plus()).abs() < 1e-12);
        assert!((von_neumann(&DensityMatrix::maximally_mixed(3)) - 3f64.ln()).abs() < 1e-14);
        assert!((von_neumann(&diag(&[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])) - 0.8676).abs() < 1e-4);
    }

    #[test]
    fn kl_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = random_density(3, 3, &mut rng);
        assert!(quantum_kl(&r, &r).unwrap().abs() < 1e-12);
        let (p, q) = ([0.5, 0.3, 0.2], [0.2, 0.2, 0.6]);
        assert!((quantum_kl(&diag(&p), &diag(&q)).unwrap() - kl_slices(&p, &q)).abs() < 1e-14);
        let v = quantum_kl(&plus(), &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert_eq!(quantum_kl(&plus(), &diag(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn min_max_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = random_density(3, 3, &mut rng);
        assert!(q_renyi_0(&r, &r).unwrap().abs() < 1e-12);
        assert!(q_renyi_inf(&r, &r).unwrap().abs() < 1e-10);
        let zero = diag(&[1.0, 0.0]);
        let half = DensityMatrix::maximally_mixed(2);
        assert!((q_renyi_0(&zero, &half).unwrap() - 2f64.ln()).abs() < 1e-14);
        let g = diag(&[2.0 / 3.0, 1.0 / 3.0]);
        assert!((q_renyi_0(&plus(), &g).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((q_renyi_inf(&zero, &g).unwrap() - 1.5f64.ln()).abs() < 1e-12);
        assert!((q_renyi_inf(&diag(&[0.0, 1.0]), &g).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn petz_examples() {
        let (p, q) = ([0.5, 0.3, 0.2], [0.2, 0.2, 0.6]);
        let v = petz_renyi(&diag(&p), &diag(&q), 2.0).unwrap();
        let want: f64 = p.iter().zip(&q).map(|(a, b)| a * a / b).sum::<f64>().ln();
        assert!((v - want).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = random_density(3, 3, &mut rng);
        let s = random_density(3, 3, &mut rng);
        let half = petz_renyi(&r, &s, 0.5).unwrap();
        let t = trace_product(&r.sqrt(), &s.sqrt()).re;
        assert!((half + 2.0 * t.ln()).abs() < 1e-12);
        assert!(petz_renyi(&r, &r, 1.7).unwrap().abs() < 1e-12);
        let kl = quantum_kl(&r, &s).unwrap();
        for a in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert!((petz_renyi(&r, &s, a).unwrap() - kl).abs() < 1e-3);
        }
        let near0 = petz_renyi(&plus(), &diag(&[0.6, 0.4]), 1e-6).unwrap();
        assert!((near0 - q_renyi_0(&plus(), &diag(&[0.6, 0.4])).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn sandwiched_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = random_density(3, 3, &mut rng);
        let s = random_density(3, 3, &mut rng);
        let f = fidelity(&r, &s).unwrap();
        assert!((sandwiched_renyi(&r, &s, 0.5).unwrap() + 2.0 * f.ln()).abs() < 1e-10);
        let big = sandwiched_renyi(&r, &s, 1e5).unwrap();
        assert!((big - q_renyi_inf(&r, &s).unwrap()).abs() < 1e-3);
        let (p, q) = ([0.5, 0.3, 0.2], [0.2, 0.2, 0.6]);
        let v = sandwiched_renyi(&diag(&p), &diag(&q), 1.5).unwrap();
        assert!((v - renyi_slices(&p, &q, 1.5)).abs() < 1e-13);
        assert!(sandwiched_renyi(&r, &s, 0.3).is_err());
    }

    #[test]
    fn quasi_entropy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_density(3, 3, &mut rng);
        let s = random_density(3, 3, &mut rng);
        let kl = petz_quasi_entropy(&r, &s, &ConvexFnSpec::x_log_x()).unwrap();
        assert!((kl - quantum_kl(&r, &s).unwrap()).abs() < 1e-10);
        let sq = petz_quasi_entropy(&r, &s, &ConvexFnSpec::square()).unwrap();
        let direct = trace_product(&(r.matrix() * r.matrix()), &s.power(-1.0)).re;
        assert!((sq - direct).abs() < 1e-9);
        let pw = petz_quasi_entropy(&r, &s, &ConvexFnSpec::power(1.5).unwrap()).unwrap();
        let direct = trace_product(&r.power(1.5), &s.power(-0.5)).re;
        assert!((pw - direct).abs() < 1e-9);
        assert!(petz_quasi_entropy(&r, &plus_like(3), &ConvexFnSpec::x_log_x()).is_err());
    }

    fn plus_like(d: usize) -> DensityMatrix {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        diag(&v)
    }

    #[test]
    fn fisher_examples() {
        let fam = QParamFamily::new(1, |th| qubit_state([0.0, 0.0, th[0]]));
        let j = quantum_fisher(&fam, &[0.5], FisherKind::Sld).unwrap();
        assert!((j[(0, 0)] - 4.0 / 3.0).abs() < 1e-6);
        let j = quantum_fisher(&fam, &[0.5], FisherKind::Rld).unwrap();
        assert!((j[(0, 0)] - 4.0 / 3.0).abs() < 1e-6);
        let flat = QParamFamily::new(2, |_| Ok(DensityMatrix::maximally_mixed(2)));
        let j = quantum_fisher(&flat, &[0.1, 0.2], FisherKind::Sld).unwrap();
        assert!(j.iter().all(|x| x.abs() < 1e-12));
    }
}
