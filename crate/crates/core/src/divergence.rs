//! Classical entropies, Rényi and f-divergences, and Fisher information.
//!
//! Limit conventions: `0 ln 0 = 0`; terms with `p_i = q_i = 0` contribute
//! nothing; a divergence is `+inf` whenever its defining sum needs mass of
//! `p` outside the support of `q`. Orders `alpha = 0, 1, +-inf` use their
//! closed-form limits. Negative orders follow the sign-corrected family
//! `sgn(alpha)/(alpha-1) ln sum p^alpha q^(1-alpha)`, which stays
//! non-negative.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::prob::{same_dim, ProbVec};

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &ProbVec) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Kullback-Leibler divergence `sum p_i ln(p_i / q_i)`.
pub fn kl_divergence(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    Ok(kl_slices(p.as_slice(), q.as_slice()))
}

/// KL on raw weights; `q` may be unnormalized.
pub fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).ln();
        }
    }
    s
}

/// Rényi divergence of order `alpha`; `alpha` may be negative or infinite.
pub fn renyi_divergence(p: &ProbVec, q: &ProbVec, alpha: f64) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    if alpha.is_nan() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must not be NaN",
        });
    }
    Ok(renyi_slices(p.as_slice(), q.as_slice(), alpha))
}

/// Rényi divergence on raw weights. `q` may be unnormalized, which gives the
/// scaling rule `S_alpha(p || q / Z) = S_alpha(p || q) + ln Z` for free.
pub fn renyi_slices(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let pairs = || p.iter().copied().zip(q.iter().copied());
    if alpha == f64::INFINITY {
        let mut best = 0.0f64;
        for (a, b) in pairs() {
            if a > 0.0 {
                if b <= 0.0 {
                    return f64::INFINITY;
                }
                best = best.max(a / b);
            }
        }
        return best.ln();
    }
    if alpha == f64::NEG_INFINITY {
        let mut best = 0.0f64;
        for (a, b) in pairs() {
            if b > 0.0 {
                if a <= 0.0 {
                    return f64::INFINITY;
                }
                best = best.max(b / a);
            }
        }
        return best.ln();
    }
    if alpha == 0.0 {
        let s: f64 = pairs().filter(|&(a, _)| a > 0.0).map(|(_, b)| b).sum();
        return if s > 0.0 { -s.ln() } else { f64::INFINITY };
    }
    if alpha == 1.0 {
        return kl_slices(p, q);
    }
    let mut s = 0.0;
    if alpha > 1.0 {
        for (a, b) in pairs() {
            if a > 0.0 {
                if b <= 0.0 {
                    return f64::INFINITY;
                }
                s += a.powf(alpha) * b.powf(1.0 - alpha);
            }
        }
    } else if alpha > 0.0 {
        s = pairs()
            .filter(|&(a, b)| a > 0.0 && b > 0.0)
            .map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha))
            .sum();
    } else {
        for (a, b) in pairs() {
            if b > 0.0 {
                if a <= 0.0 {
                    return f64::INFINITY;
                }
                s += a.powf(alpha) * b.powf(1.0 - alpha);
            }
        }
    }
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let sign = if alpha > 0.0 { 1.0 } else { -1.0 };
    sign * s.ln() / (alpha - 1.0)
}

/// Rényi entropy `sgn(alpha)/(1-alpha) ln sum p_i^alpha`. Rank-deficient
/// inputs give `-inf` for negative orders.
pub fn renyi_entropy(p: &ProbVec, alpha: f64) -> f64 {
    let support = || p.iter().copied().filter(|&x| x > 0.0);
    if alpha == 0.0 {
        return (p.rank() as f64).ln();
    }
    if alpha == 1.0 {
        return shannon_entropy(p);
    }
    if alpha == f64::INFINITY {
        return -support().fold(0.0, f64::max).ln();
    }
    if alpha == f64::NEG_INFINITY {
        return if p.is_full_rank() {
            p.iter().copied().fold(f64::INFINITY, f64::min).ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    if alpha < 0.0 && !p.is_full_rank() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = support().map(|x| x.powf(alpha)).sum();
    let sign = if alpha > 0.0 { 1.0 } else { -1.0 };
    sign * s.ln() / (1.0 - alpha)
}

/// A convex function on `(0, inf)` with its boundary behaviour.
#[derive(Clone)]
pub struct ConvexFnSpec {
    evaluator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `lim_{x -> 0+} f(x)`; may be `+inf`.
    pub f_at_0: f64,
    /// `lim_{x -> inf} f(x) / x`; may be `+inf`.
    pub f_prime_at_inf: f64,
    pub label: String,
}

impl fmt::Debug for ConvexFnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexFnSpec")
            .field("label", &self.label)
            .field("f_at_0", &self.f_at_0)
            .field("f_prime_at_inf", &self.f_prime_at_inf)
            .finish()
    }
}

impl ConvexFnSpec {
    pub fn new(
        label: impl Into<String>,
        f_at_0: f64,
        f_prime_at_inf: f64,
        evaluator: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ConvexFnSpec {
            evaluator: Arc::new(evaluator),
            f_at_0,
            f_prime_at_inf,
            label: label.into(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.f_at_0
        } else {
            (self.evaluator)(x)
        }
    }

    /// `x ln x`: the KL divergence.
    pub fn x_log_x() -> Self {
        Self::new("klf", 0.0, f64::INFINITY, |x| x * x.ln())
    }

    /// `|x - 1| / 2`: the trace distance.
    pub fn total_variation() -> Self {
        Self::new("tv", 0.5, 0.5, |x| 0.5 * (x - 1.0).abs())
    }

    /// `1 - sqrt(x)`: one minus the classical fidelity.
    pub fn hellinger() -> Self {
        Self::new("hellinger", 1.0, 0.0, |x| 1.0 - x.sqrt())
    }

    /// `(x - 1)^2`: Pearson chi-squared.
    pub fn chi_squared() -> Self {
        Self::new("chi2", 1.0, f64::INFINITY, |x| (x - 1.0) * (x - 1.0))
    }

    /// `x^2`.
    pub fn square() -> Self {
        Self::new("x2", 0.0, f64::INFINITY, |x| x * x)
    }

    /// `-ln x`.
    pub fn neg_log() -> Self {
        Self::new("neglog", f64::INFINITY, 0.0, |x| -x.ln())
    }

    /// `x^a` for `a > 1` (operator convex up to `a = 2`).
    pub fn power(a: f64) -> Result<Self> {
        if a <= 1.0 || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: a,
                reason: "x^alpha is convex here only for alpha > 1",
            });
        }
        Ok(Self::new(format!("pow:{a}"), 0.0, f64::INFINITY, move |x| {
            x.powf(a)
        }))
    }

    /// `(x^a - 1) / (a (a - 1))`, convex for every `a` outside `{0, 1}`.
    pub fn alpha_family(a: f64) -> Result<Self> {
        if a == 0.0 || a == 1.0 || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: a,
                reason: "alpha family is defined for finite alpha not in {0, 1}",
            });
        }
        let c = 1.0 / (a * (a - 1.0));
        let f0 = if a > 0.0 { -c } else { f64::INFINITY };
        let fp = if a > 1.0 { f64::INFINITY } else { 0.0 };
        Ok(Self::new(format!("alpha:{a}"), f0, fp, move |x| {
            c * (x.powf(a) - 1.0)
        }))
    }

    /// Parses `klf | tv | hellinger | chi2 | alpha:A`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "klf" => Ok(Self::x_log_x()),
            "tv" => Ok(Self::total_variation()),
            "hellinger" => Ok(Self::hellinger()),
            "chi2" => Ok(Self::chi_squared()),
            _ => match name.strip_prefix("alpha:") {
                Some(a) => {
                    let a: f64 = a
                        .parse()
                        .map_err(|_| Error::Invalid(format!("bad alpha in '{name}'")))?;
                    Self::alpha_family(a)
                }
                None => Err(Error::Invalid(format!("unknown f-divergence '{name}'"))),
            },
        }
    }

    /// Samples midpoint convexity on a log grid over `[1e-4, 1e4]`.
    pub fn looks_convex(&self) -> bool {
        let xs: Vec<f64> = (0..=80).map(|k| 10f64.powf(-4.0 + 0.1 * k as f64)).collect();
        xs.iter().all(|&a| {
            xs.iter().all(|&b| {
                let m = self.eval(0.5 * (a + b));
                let avg = 0.5 * (self.eval(a) + self.eval(b));
                m <= avg + 1e-9 * (1.0 + avg.abs())
            })
        })
    }
}

/// `D_f(p || q) = sum_i q_i f(p_i / q_i)`, using `f(0)` for `p_i = 0` and
/// `p_i f'(inf)` for `q_i = 0 < p_i`.
pub fn f_divergence(p: &ProbVec, q: &ProbVec, f: &ConvexFnSpec) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    Ok(f_divergence_slices(p.as_slice(), q.as_slice(), f))
}

pub fn f_divergence_slices(p: &[f64], q: &[f64], f: &ConvexFnSpec) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b > 0.0 {
            s += b * f.eval(a / b);
        } else if a > 0.0 {
            s += a * f.f_prime_at_inf;
        }
    }
    s
}

/// `G_p(a, b) = sum_i a_i b_i / p_i` on a full-support `p`.
pub fn fisher_metric(p: &ProbVec, a: &[f64], b: &[f64]) -> Result<f64> {
    p.require_full_support()?;
    same_dim(p.dim(), a.len())?;
    same_dim(p.dim(), b.len())?;
    Ok(p.iter()
        .zip(a.iter().zip(b))
        .map(|(pi, (x, y))| x * y / pi)
        .sum())
}

type StateMap = dyn Fn(&[f64]) -> Result<ProbVec> + Send + Sync;

/// A parametric family `theta -> p(theta)` treated as a black box.
#[derive(Clone)]
pub struct ParamFamily {
    state_at: Arc<StateMap>,
    pub m: usize,
    /// Central-difference step.
    pub fd_step: f64,
}

impl ParamFamily {
    pub fn new(
        m: usize,
        state_at: impl Fn(&[f64]) -> Result<ProbVec> + Send + Sync + 'static,
    ) -> Self {
        ParamFamily {
            state_at: Arc::new(state_at),
            m,
            fd_step: 1e-5,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn state_at(&self, theta: &[f64]) -> Result<ProbVec> {
        same_dim(self.m, theta.len())?;
        (self.state_at)(theta)
    }

    /// Applies a parameter-independent map to every member of the family.
    pub fn map(
        &self,
        f: impl Fn(&ProbVec) -> Result<ProbVec> + Send + Sync + 'static,
    ) -> ParamFamily {
        let inner = self.state_at.clone();
        ParamFamily {
            state_at: Arc::new(move |th| f(&inner(th)?)),
            m: self.m,
            fd_step: self.fd_step,
        }
    }

    /// `d p / d theta_k` by central differences with one Richardson level.
    pub fn derivative(&self, theta: &[f64], k: usize) -> Result<Vec<f64>> {
        let central = |h: f64| -> Result<Vec<f64>> {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[k] += h;
            minus[k] -= h;
            let a = self.state_at(&plus)?;
            let b = self.state_at(&minus)?;
            Ok(a.iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) / (2.0 * h))
                .collect())
        };
        let coarse = central(self.fd_step)?;
        let fine = central(0.5 * self.fd_step)?;
        Ok(fine
            .iter()
            .zip(&coarse)
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect())
    }
}

/// Fisher information matrix `J_kl = sum_i d_k p_i d_l p_i / p_i`.
pub fn fisher_matrix(fam: &ParamFamily, theta: &[f64]) -> Result<DMatrix<f64>> {
    let p = fam.state_at(theta)?;
    p.require_full_support()?;
    let derivs = (0..fam.m)
        .map(|k| fam.derivative(theta, k))
        .collect::<Result<Vec<_>>>()?;
    let mut j = DMatrix::zeros(fam.m, fam.m);
    for k in 0..fam.m {
        for l in k..fam.m {
            let v = fisher_metric(&p, &derivs[k], &derivs[l])?;
            j[(k, l)] = v;
            j[(l, k)] = v;
        }
    }
    Ok(j)
}
