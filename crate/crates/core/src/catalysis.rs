//! Catalytic majorization: direct catalyst verification and the Rényi-type
//! conditions for exact, approximate and correlated catalysis.
//!
//! A finite grid of orders can only refute a transformation; a satisfied
//! verdict is necessary-only evidence, and the verdict says so.

use serde::Serialize;

use crate::divergence::{renyi_entropy, renyi_slices, shannon_entropy};
use crate::error::{Error, Result};
use crate::majorization::majorizes;
use crate::prob::{same_dim, tensor, ProbVec};

/// Margin for the strict inequalities of exact trumping.
pub const STRICT_MARGIN: f64 = 1e-12;
const GRID_TOL: f64 = 1e-10;

/// Outcome of a grid-based condition check.
#[derive(Debug, Clone, Serialize)]
pub struct CatalysisVerdict {
    pub satisfied: bool,
    pub failing_alpha: Option<f64>,
    pub alpha_grid: Vec<f64>,
    pub caveat: String,
}

impl CatalysisVerdict {
    fn from_first_failure(failing_alpha: Option<f64>, alpha_grid: Vec<f64>, caveat: &str) -> Self {
        CatalysisVerdict {
            satisfied: failing_alpha.is_none(),
            failing_alpha,
            alpha_grid,
            caveat: caveat.to_string(),
        }
    }
}

const GRID_CAVEAT: &str = "orders checked on a finite grid plus the alpha -> +-inf limits; \
     a satisfied verdict is necessary-only evidence";

/// Default orders: 80 log-spaced values on each of `[-20, -0.01]` and
/// `[0.01, 20]`, plus `0` and `1`, sorted.
pub fn default_alpha_grid() -> Vec<f64> {
    let n = 80;
    let (lo, hi) = (0.01f64.ln(), 20f64.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp())
        .flat_map(|a| [a, -a])
        .collect();
    grid.extend([0.0, 1.0]);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Whether `p (x) r` majorizes `p_target (x) r`.
pub fn verify_catalyst(p: &ProbVec, p_target: &ProbVec, r: &ProbVec) -> bool {
    majorizes(&tensor(p, r), &tensor(p_target, r))
}

/// The monotone `f_alpha` of exact trumping; `+inf` where a zero entry is
/// raised to a non-positive power.
pub fn trump_monotone(p: &ProbVec, alpha: f64) -> f64 {
    let full = p.is_full_rank();
    let power_sum = || p.iter().filter(|&&x| x > 0.0).map(|x| x.powf(alpha)).sum::<f64>();
    if alpha > 1.0 {
        power_sum().ln()
    } else if alpha == 1.0 {
        -shannon_entropy(p)
    } else if alpha > 0.0 {
        -power_sum().ln()
    } else if !full {
        f64::INFINITY
    } else if alpha == 0.0 {
        -p.iter().map(|x| x.ln()).sum::<f64>()
    } else {
        power_sum().ln()
    }
}

fn sorted_equal(p: &ProbVec, q: &ProbVec) -> bool {
    p.dim() == q.dim()
        && p
            .sorted_decreasing()
            .iter()
            .zip(q.sorted_decreasing())
            .all(|(a, b)| (a - b).abs() <= GRID_TOL)
}

fn max_entry(p: &ProbVec) -> f64 {
    p.iter().copied().fold(0.0, f64::max)
}

fn min_entry(p: &ProbVec) -> f64 {
    p.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks `f_alpha(p_target) < f_alpha(p)` over the grid, then the limits
/// `max p_target <= max p` and `min p_target >= min p`.
///
/// The target must have full rank. A rank-deficient source is accepted: its
/// monotones are `+inf` for `alpha <= 0`, so those orders hold trivially.
pub fn trump_exact_conditions(
    p: &ProbVec,
    p_target: &ProbVec,
    alpha_grid: &[f64],
) -> Result<CatalysisVerdict> {
    same_dim(p.dim(), p_target.dim())?;
    if !p_target.is_full_rank() {
        return Err(Error::RankDeficient);
    }
    if sorted_equal(p, p_target) {
        return Err(Error::EqualSortedVectors);
    }
    let grid_fail = alpha_grid.iter().copied().find(|&a| {
        let (src, dst) = (trump_monotone(p, a), trump_monotone(p_target, a));
        !(src.is_infinite() && src > 0.0) && dst >= src - STRICT_MARGIN
    });
    let failing = grid_fail.or_else(|| {
        if max_entry(p_target) > max_entry(p) + GRID_TOL {
            Some(f64::INFINITY)
        } else if min_entry(p_target) < min_entry(p) - GRID_TOL {
            Some(f64::NEG_INFINITY)
        } else {
            None
        }
    });
    Ok(CatalysisVerdict::from_first_failure(
        failing,
        alpha_grid.to_vec(),
        GRID_CAVEAT,
    ))
}

fn leq(a: f64, b: f64) -> bool {
    a <= b || (a.is_finite() && b.is_finite() && a - b <= GRID_TOL * (1.0 + a.abs().max(b.abs())))
}

fn with_limits(alpha_grid: &[f64]) -> impl Iterator<Item = f64> + '_ {
    alpha_grid
        .iter()
        .copied()
        .chain([f64::INFINITY, f64::NEG_INFINITY])
}

/// Checks `S_alpha(p) <= S_alpha(p_target)` over the grid, negative orders
/// included, and at `alpha = +-inf`.
pub fn trump_approx_conditions(
    p: &ProbVec,
    p_target: &ProbVec,
    alpha_grid: &[f64],
) -> Result<CatalysisVerdict> {
    same_dim(p.dim(), p_target.dim())?;
    let failing = with_limits(alpha_grid)
        .find(|&a| !leq(renyi_entropy(p, a), renyi_entropy(p_target, a)));
    Ok(CatalysisVerdict::from_first_failure(
        failing,
        alpha_grid.to_vec(),
        GRID_CAVEAT,
    ))
}

/// Checks `S_alpha(p || q) >= S_alpha(p_target || q_target)` over the grid,
/// negative orders included, and at `alpha = +-inf`.
pub fn d_trump_conditions(
    p: &ProbVec,
    q: &ProbVec,
    p_target: &ProbVec,
    q_target: &ProbVec,
    alpha_grid: &[f64],
) -> Result<CatalysisVerdict> {
    same_dim(p.dim(), q.dim())?;
    same_dim(p_target.dim(), q_target.dim())?;
    for r in [q, q_target] {
        if !r.is_full_rank() {
            return Err(Error::SupportViolation(
                "reference distributions must have full support".into(),
            ));
        }
    }
    let failing = with_limits(alpha_grid).find(|&a| {
        let src = renyi_slices(p.as_slice(), q.as_slice(), a);
        let dst = renyi_slices(p_target.as_slice(), q_target.as_slice(), a);
        !leq(dst, src)
    });
    Ok(CatalysisVerdict::from_first_failure(
        failing,
        alpha_grid.to_vec(),
        GRID_CAVEAT,
    ))
}

/// The two exact conditions for correlated catalysis:
/// `S_0(p) <= S_0(p_target)` and `S_1(p) < S_1(p_target)`.
///
/// `failing_alpha` reports the order (0 or 1) that fails first.
pub fn correlated_catalysis_conditions(p: &ProbVec, p_target: &ProbVec) -> Result<CatalysisVerdict> {
    let d = p.dim().max(p_target.dim());
    let (p, p_target) = (p.padded(d), p_target.padded(d));
    if sorted_equal(&p, &p_target) {
        return Err(Error::EqualSortedVectors);
    }
    let failing = if p.rank() > p_target.rank() {
        Some(0.0)
    } else if shannon_entropy(&p) >= shannon_entropy(&p_target) - STRICT_MARGIN {
        Some(1.0)
    } else {
        None
    };
    Ok(CatalysisVerdict::from_first_failure(
        failing,
        vec![0.0, 1.0],
        "exact conditions; no grid approximation involved",
    ))
}
