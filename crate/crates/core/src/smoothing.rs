//! Hypothesis-testing divergence, smooth min/max divergences and finite-n
//! Stein sweeps.
//!
//! `S_H^eta(rho || sigma) = -ln(min{tr[sigma Q] : 0 <= Q <= I, tr[rho Q] >= eta} / eta)`.
//! Classical instances are solved exactly by a fractional knapsack over
//! likelihood-ratio classes. Quantum instances use a threshold sweep over
//! `P{rho - t sigma > 0}` and report a dual certificate `(mu, X)` with
//! `X = (mu rho - sigma)_+`.

use std::collections::HashMap;

use serde::Serialize;

use crate::divergence::kl_divergence;
use crate::error::{Error, Result};
use crate::prob::{same_dim, ProbVec, StochasticMatrix};
use crate::qdivergence::quantum_kl;
use crate::quantum::{c, hermitian_eigen, trace_product, CMatrix, DensityMatrix, C64};

pub const CLASSICAL_SWEEP_TOL: f64 = 0.02;
pub const QUANTUM_SWEEP_TOL: f64 = 0.1;
pub const MARKOV_SWEEP_TOL: f64 = 0.05;
/// Largest alphabet accepted by the type-class method.
pub const MAX_IID_ALPHABET: usize = 8;
const MAX_CLASSES: usize = 4_000_000;
const MAX_DENSE_DIM: usize = 1024;
const BISECTION_STEPS: usize = 200;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "must lie strictly between 0 and 1",
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must lie in [0, 1)",
        });
    }
    Ok(())
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Fractional knapsack over atoms `(ln P, ln Q)` with constant likelihood
/// ratio inside each atom. Returns `ln min{Q-mass : P-mass >= eta}`.
fn greedy_log(mut atoms: Vec<(f64, f64)>, eta: f64) -> f64 {
    atoms.retain(|a| a.0 > f64::NEG_INFINITY);
    let ratio = |a: &(f64, f64)| {
        if a.1 == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            a.0 - a.1
        }
    };
    atoms.sort_by(|a, b| ratio(b).total_cmp(&ratio(a)));
    let mut acc = 0.0;
    let mut taken = Vec::with_capacity(atoms.len());
    for (lp, lq) in atoms {
        let pm = lp.exp();
        if acc + pm >= eta {
            let frac = ((eta - acc) / pm).clamp(0.0, 1.0);
            taken.push(lq + frac.ln());
            return log_sum_exp(&taken);
        }
        acc += pm;
        taken.push(lq);
    }
    log_sum_exp(&taken)
}

fn sh_from_atoms(atoms: Vec<(f64, f64)>, eta: f64) -> f64 {
    eta.ln() - greedy_log(atoms, eta)
}

/// Exact classical `S_H^eta(p || q)`. Indices with `q_i = 0 < p_i` are
/// taken first at no cost.
pub fn sh_classical(p: &ProbVec, q: &ProbVec, eta: f64) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    sh_classical_slices(p.as_slice(), q.as_slice(), eta)
}

/// Same as [`sh_classical`] for raw non-negative weights; `q` may be
/// unnormalized.
pub fn sh_classical_slices(p: &[f64], q: &[f64], eta: f64) -> Result<f64> {
    same_dim(p.len(), q.len())?;
    check_eta(eta)?;
    let atoms = p.iter().zip(q).map(|(a, b)| (a.ln(), b.ln())).collect();
    Ok(sh_from_atoms(atoms, eta))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn for_each_composition(n: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, slot: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == cur.len() {
            cur[slot] = rest;
            f(cur);
            return;
        }
        for k in 0..=rest {
            cur[slot] = k;
            rec(rest - k, slot + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(n, 0, &mut cur, f);
}

/// `S_H^eta(p^n || q^n)` computed over type classes.
pub fn sh_classical_iid(p: &ProbVec, q: &ProbVec, eta: f64, n: usize) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    // Letters outside supp(p) only produce classes of zero P-mass.
    let letters: Vec<(f64, f64)> = p
        .iter()
        .zip(q.iter())
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let d = letters.len();
    if d > MAX_IID_ALPHABET {
        return Err(Error::TooLarge(format!(
            "alphabet of size {d} exceeds {MAX_IID_ALPHABET} for the type-class method"
        )));
    }
    let classes = binomial_f64(n + d - 1, d - 1);
    if classes > MAX_CLASSES as f64 {
        return Err(Error::TooLarge(format!("{classes:.0} type classes")));
    }
    let lf = ln_factorials(n);
    let mut atoms = Vec::with_capacity(classes as usize);
    for_each_composition(n, d, &mut |k| {
        let mut lc = lf[n];
        let (mut lp, mut lq) = (0.0, 0.0);
        for (&ki, &(a, b)) in k.iter().zip(&letters) {
            if ki > 0 {
                lc -= lf[ki];
                lp += ki as f64 * a;
                lq += ki as f64 * b;
            }
        }
        atoms.push((lc + lp, lc + lq));
    });
    Ok(sh_from_atoms(atoms, eta))
}

/// Dual certificate: `mu >= 0`, `X >= 0` with `mu rho <= sigma + X`.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub mu: f64,
    pub x: CMatrix,
}

/// Result of the quantum hypothesis-testing optimization.
#[derive(Clone, Debug)]
pub struct ShQuantum {
    pub value: f64,
    /// `min tr[sigma Q] / eta` attained by `test`.
    pub primal: f64,
    /// `mu - tr[X] / eta` for the certificate.
    pub dual: f64,
    /// `primal - dual`, non-negative by weak duality.
    pub gap: f64,
    pub test: CMatrix,
    pub certificate: DualCertificate,
}

/// A block `mult * (rho_b, sigma_b)` of a block-diagonal pair.
#[derive(Clone, Debug)]
pub(crate) struct PencilBlock {
    pub mult: f64,
    pub rho: CMatrix,
    pub sigma: CMatrix,
}

struct BlockSolution {
    value: f64,
    primal: f64,
    dual: f64,
    mu: f64,
    tests: Vec<CMatrix>,
}

fn positive_projector(m: &CMatrix) -> CMatrix {
    let s = hermitian_eigen(m);
    s.apply(|x| if x > 0.0 { 1.0 } else { 0.0 })
}

fn threshold_projectors(blocks: &[PencilBlock], t: f64) -> Vec<CMatrix> {
    blocks
        .iter()
        .map(|b| positive_projector(&(&b.rho - &b.sigma * c(t))))
        .collect()
}

fn weighted_trace(blocks: &[PencilBlock], proj: &[CMatrix], of_rho: bool) -> f64 {
    blocks
        .iter()
        .zip(proj)
        .map(|(b, p)| b.mult * trace_product(if of_rho { &b.rho } else { &b.sigma }, p).re)
        .sum()
}

fn dual_value(blocks: &[PencilBlock], mu: f64, eta: f64) -> f64 {
    let tx: f64 = blocks
        .iter()
        .map(|b| {
            let m = &b.rho * c(mu) - &b.sigma;
            b.mult * hermitian_eigen(&m).values.iter().filter(|&&x| x > 0.0).sum::<f64>()
        })
        .sum();
    mu - tx / eta
}

fn solve_blocks(blocks: &[PencilBlock], eta: f64) -> Result<BlockSolution> {
    check_eta(eta)?;
    let mut t_hi: f64 = 0.0;
    for b in blocks {
        let s = DensityMatrix::positive(b.sigma.clone())?;
        if !s.is_full_rank() {
            return Err(Error::RankDeficient);
        }
        let w = s.power(-0.5);
        let m = &w * &b.rho * &w;
        t_hi = t_hi.max(hermitian_eigen(&m).values[0]);
    }
    let mut hi = t_hi * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let mut p_hi = threshold_projectors(blocks, hi);
    while weighted_trace(blocks, &p_hi, true) >= eta {
        hi *= 2.0;
        p_hi = threshold_projectors(blocks, hi);
    }
    let mut lo = 0.0;
    let mut p_lo = threshold_projectors(blocks, lo);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p_mid = threshold_projectors(blocks, mid);
        if weighted_trace(blocks, &p_mid, true) >= eta {
            lo = mid;
            p_lo = p_mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
    }
    let (h_lo, h_hi) = (weighted_trace(blocks, &p_lo, true), weighted_trace(blocks, &p_hi, true));
    let s = if h_lo > h_hi {
        ((eta - h_hi) / (h_lo - h_hi)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let tests: Vec<CMatrix> = p_lo
        .iter()
        .zip(&p_hi)
        .map(|(a, b)| a * c(s) + b * c(1.0 - s))
        .collect();
    let primal = weighted_trace(blocks, &tests, false) / eta;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in [lo, hi, 0.5 * (lo + hi)] {
        if t > 0.0 {
            let d = dual_value(blocks, 1.0 / t, eta);
            if d > best.0 {
                best = (d, 1.0 / t);
            }
        }
    }
    Ok(BlockSolution {
        value: -primal.ln(),
        primal,
        dual: best.0,
        mu: best.1,
        tests,
    })
}

/// Quantum `S_H^eta(rho || sigma)` for positive definite `sigma`.
pub fn sh_quantum(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64) -> Result<ShQuantum> {
    same_dim(rho.dim(), sigma.dim())?;
    let blocks = [PencilBlock {
        mult: 1.0,
        rho: rho.matrix().clone(),
        sigma: sigma.matrix().clone(),
    }];
    let sol = solve_blocks(&blocks, eta)?;
    let x = hermitian_eigen(&(rho.matrix() * c(sol.mu) - sigma.matrix())).apply(|v| v.max(0.0));
    Ok(ShQuantum {
        value: sol.value,
        primal: sol.primal,
        dual: sol.dual,
        gap: sol.primal - sol.dual,
        test: sol.tests.into_iter().next().expect("one block"),
        certificate: DualCertificate { mu: sol.mu, x },
    })
}

/// `S_H^eta` of a block-diagonal pair given blockwise.
pub(crate) fn sh_quantum_blocks(blocks: &[PencilBlock], eta: f64) -> Result<(f64, f64)> {
    let sol = solve_blocks(blocks, eta)?;
    Ok((sol.value, sol.primal - sol.dual))
}

/// Smooth max-relative-entropy style outcome with an exactness flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothEstimate {
    pub value: f64,
    /// `false` when the search hit its node budget and returned the best
    /// subset found.
    pub exact: bool,
}

const R0_NODE_BUDGET: usize = 5_000_000;

/// `max S_0(tau || q)` over normalized `tau` within trace distance `eps` of
/// `p`: minimize `q[L]` over supports `L` with `p[complement of L] <= eps`.
/// Solved by branch and bound over the dropped indices.
pub fn smooth_r0_classical(p: &ProbVec, q: &ProbVec, eps: f64) -> Result<SmoothEstimate> {
    same_dim(p.dim(), q.dim())?;
    check_eps(eps)?;
    // Dropping zero-probability indices is free.
    let mut kept_q = 0.0;
    let mut items: Vec<(f64, f64)> = Vec::new();
    for (&a, &b) in p.iter().zip(q.iter()) {
        if a > 0.0 {
            items.push((a, b));
            kept_q += b;
        }
    }
    items.sort_by(|x, y| (y.1 * x.0).total_cmp(&(x.1 * y.0)));
    let mut best = (0.0f64, Vec::<bool>::new());
    let mut nodes = 0usize;
    let mut chosen = vec![false; items.len()];
    let cap = eps * (1.0 + 1e-12) + 1e-15;
    fn bound(items: &[(f64, f64)], from: usize, room: f64) -> f64 {
        let mut gain = 0.0;
        let mut room = room;
        for &(a, b) in &items[from..] {
            if a <= room {
                room -= a;
                gain += b;
            } else {
                gain += b * room / a;
                break;
            }
        }
        gain
    }
    #[allow(clippy::too_many_arguments)]
    fn search(
        items: &[(f64, f64)],
        i: usize,
        used: f64,
        gain: f64,
        cap: f64,
        chosen: &mut Vec<bool>,
        best: &mut (f64, Vec<bool>),
        nodes: &mut usize,
    ) {
        *nodes += 1;
        if gain > best.0 {
            *best = (gain, chosen.clone());
        }
        if i == items.len() || *nodes > R0_NODE_BUDGET {
            return;
        }
        if gain + bound(items, i, cap - used) <= best.0 {
            return;
        }
        let (a, b) = items[i];
        if used + a <= cap {
            chosen[i] = true;
            search(items, i + 1, used + a, gain + b, cap, chosen, best, nodes);
            chosen[i] = false;
        }
        search(items, i + 1, used, gain, cap, chosen, best, nodes);
    }
    search(&items, 0, 0.0, 0.0, cap, &mut chosen, &mut best, &mut nodes);
    let flags = if best.1.is_empty() { vec![false; items.len()] } else { best.1 };
    let support: f64 = items
        .iter()
        .zip(&flags)
        .filter(|(_, f)| !**f)
        .map(|(x, _)| x.1)
        .sum();
    let support = if kept_q == 0.0 { 0.0 } else { support };
    Ok(SmoothEstimate {
        value: -support.ln(),
        exact: nodes <= R0_NODE_BUDGET,
    })
}

/// `min S_inf(tau || q)` over normalized `tau` within trace distance `eps`
/// of `p`: `ln max(1, lambda*)` with `lambda*` the smallest `lambda` such
/// that `sum_i (p_i - lambda q_i)_+ <= eps`.
pub fn smooth_rinf_classical(p: &ProbVec, q: &ProbVec, eps: f64) -> Result<f64> {
    same_dim(p.dim(), q.dim())?;
    check_eps(eps)?;
    let unsupported: f64 = p.iter().zip(q.iter()).filter(|(_, b)| **b == 0.0).map(|(a, _)| a).sum();
    if unsupported > eps {
        return Ok(f64::INFINITY);
    }
    let budget = eps - unsupported;
    let mut items: Vec<(f64, f64)> = p
        .iter()
        .zip(q.iter())
        .filter(|(a, b)| **b > 0.0 && **a > 0.0)
        .map(|(a, b)| (*a, *b))
        .collect();
    items.sort_by(|x, y| (y.0 / y.1).total_cmp(&(x.0 / x.1)));
    // Above the k-th ratio the excess is P_k - lambda Q_k over the first k items.
    let (mut pk, mut qk) = (0.0, 0.0);
    let mut lambda = 0.0;
    for k in 0..items.len() {
        pk += items[k].0;
        qk += items[k].1;
        let next = items.get(k + 1).map_or(0.0, |x| x.0 / x.1);
        let excess_at_next = pk - next * qk;
        if excess_at_next > budget {
            lambda = (pk - budget) / qk;
            break;
        }
    }
    Ok(lambda.max(1.0).ln())
}

/// Brackets for the quantum smooth divergences from `S_H` at four levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantumSmoothBounds {
    pub r0_lo: f64,
    pub r0_hi: f64,
    pub rinf_lo: f64,
    pub rinf_hi: f64,
}

/// For `0 < eps < 1/2`:
/// `S_H^{1-e^2/6} - ln((1-e^2/6)/(e^2/6)) <= S_0^eps <= S_H^{1-e} - ln(1-e)` and
/// `S_H^{2e} - ln 2 <= S_inf^eps <= S_H^{e^2/2} - ln(1-e)`.
pub fn smooth_quantum_bounds(rho: &DensityMatrix, sigma: &DensityMatrix, eps: f64) -> Result<QuantumSmoothBounds> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "brackets hold for 0 < eps < 1/2",
        });
    }
    let sh = |eta: f64| sh_quantum(rho, sigma, eta).map(|s| s.value);
    let e6 = eps * eps / 6.0;
    Ok(QuantumSmoothBounds {
        r0_lo: sh(1.0 - e6)? - ((1.0 - e6) / e6).ln(),
        r0_hi: sh(1.0 - eps)? - (1.0 - eps).ln(),
        rinf_lo: sh(2.0 * eps)? - 2f64.ln(),
        rinf_hi: sh(eps * eps / 2.0)? - (1.0 - eps).ln(),
    })
}

/// Finite-n rates `S_H^eta(n) / n` against the relative entropy rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteinSweep {
    pub eta: f64,
    pub n_values: Vec<usize>,
    pub rates: Vec<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub converged: bool,
}

impl SteinSweep {
    pub fn new(eta: f64, n_values: Vec<usize>, rates: Vec<f64>, target: f64, tolerance: f64) -> Self {
        let converged = rates.last().is_some_and(|r| (r - target).abs() <= tolerance);
        SteinSweep {
            eta,
            n_values,
            rates,
            target,
            tolerance,
            converged,
        }
    }

    pub fn final_gap(&self) -> f64 {
        self.rates.last().map_or(f64::NAN, |r| (r - self.target).abs())
    }

    /// Whether the gap to the target shrinks from the first to the last point.
    pub fn gap_decreases(&self) -> bool {
        match (self.rates.first(), self.rates.last()) {
            (Some(a), Some(b)) => (b - self.target).abs() <= (a - self.target).abs(),
            _ => false,
        }
    }
}

fn check_n_max(n_max: usize) -> Result<()> {
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    Ok(())
}

/// Powers of two below `n_max`, then `n_max`.
pub fn doubling_grid(n_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n < n_max)
        .collect();
    v.push(n_max);
    v
}

/// Sweep over `n` for an i.i.d. pair, using type classes.
pub fn stein_sweep_classical(p: &ProbVec, q: &ProbVec, eta: f64, n_max: usize) -> Result<SteinSweep> {
    check_n_max(n_max)?;
    let n_values = doubling_grid(n_max);
    let rates = n_values
        .iter()
        .map(|&n| sh_classical_iid(p, q, eta, n).map(|v| v / n as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteinSweep::new(eta, n_values, rates, kl_divergence(p, q)?, CLASSICAL_SWEEP_TOL))
}

/// Rates `S_H^eta(n) / n` on a grid of `eta` (rows) and `n` (columns), so
/// both orders of the limits can be read off.
pub fn rate_grid_classical(p: &ProbVec, q: &ProbVec, etas: &[f64], n_values: &[usize]) -> Result<Vec<Vec<f64>>> {
    etas.iter()
        .map(|&eta| {
            n_values
                .iter()
                .map(|&n| sh_classical_iid(p, q, eta, n).map(|v| v / n as f64))
                .collect()
        })
        .collect()
}

/// Coefficients of `x^{m-k} y^k` in `(a x + b y)^m`.
fn binomial_poly(a: C64, b: C64, m: usize) -> Vec<C64> {
    let mut poly = vec![c(1.0)];
    for _ in 0..m {
        let mut next = vec![c(0.0); poly.len() + 1];
        for (k, &v) in poly.iter().enumerate() {
            next[k] += v * a;
            next[k + 1] += v * b;
        }
        poly = next;
    }
    poly
}

/// `A^{(x) m}` restricted to the symmetric subspace, in the Dicke basis
/// ordered by the number of excitations.
pub fn symmetric_power(a: &CMatrix, m: usize) -> CMatrix {
    assert_eq!((a.nrows(), a.ncols()), (2, 2), "symmetric_power needs a 2x2 matrix");
    let (a00, a01, a10, a11) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let binom: Vec<f64> = (0..=m).map(|k| binomial_f64(m, k)).collect();
    let mut s = CMatrix::zeros(m + 1, m + 1);
    for j in 0..=m {
        let left = binomial_poly(a00, a10, m - j);
        let right = binomial_poly(a01, a11, j);
        for (u, &lv) in left.iter().enumerate() {
            for (v, &rv) in right.iter().enumerate() {
                s[(u + v, j)] += lv * rv;
            }
        }
        for k in 0..=m {
            s[(k, j)] *= c((binom[j] / binom[k]).sqrt());
        }
    }
    s
}

fn det2(a: &CMatrix) -> f64 {
    (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re
}

/// Blocks of `(rho^{(x) n}, sigma^{(x) n})` for qubits: weight `n - 2k`
/// irreps carry `det^k Sym^{n-2k}` with multiplicity `C(n,k) - C(n,k-1)`.
pub(crate) fn schur_weyl_blocks(rho: &CMatrix, sigma: &CMatrix, n: usize) -> Vec<PencilBlock> {
    let (dr, ds) = (det2(rho).max(0.0), det2(sigma).max(0.0));
    (0..=n / 2)
        .map(|k| {
            let mult = binomial_f64(n, k) - if k > 0 { binomial_f64(n, k - 1) } else { 0.0 };
            let m = n - 2 * k;
            PencilBlock {
                mult,
                rho: symmetric_power(rho, m) * c(dr.powi(k as i32)),
                sigma: symmetric_power(sigma, m) * c(ds.powi(k as i32)),
            }
        })
        .collect()
}

fn tensor_power(rho: &DensityMatrix, n: usize) -> DensityMatrix {
    (1..n).fold(rho.clone(), |acc, _| acc.tensor(rho))
}

/// `S_H^eta(rho^{(x) n} || sigma^{(x) n})`. Qubits use the Schur-Weyl block
/// decomposition; other dimensions build the tensor power, up to dimension 1024.
pub fn sh_quantum_iid(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64, n: usize) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    check_n_max(n)?;
    if rho.dim() == 2 {
        let blocks = schur_weyl_blocks(rho.matrix(), sigma.matrix(), n);
        return sh_quantum_blocks(&blocks, eta).map(|v| v.0);
    }
    let dim = (rho.dim() as f64).powi(n as i32);
    if dim > MAX_DENSE_DIM as f64 {
        return Err(Error::TooLarge(format!(
            "tensor power of dimension {dim:.0} exceeds {MAX_DENSE_DIM}"
        )));
    }
    Ok(sh_quantum(&tensor_power(rho, n), &tensor_power(sigma, n), eta)?.value)
}

/// Sweep `n = 1..=n_max` for a quantum i.i.d. pair.
pub fn stein_sweep_quantum(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64, n_max: usize) -> Result<SteinSweep> {
    check_n_max(n_max)?;
    let n_values: Vec<usize> = (1..=n_max).collect();
    let rates = n_values
        .iter()
        .map(|&n| sh_quantum_iid(rho, sigma, eta, n).map(|v| v / n as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteinSweep::new(eta, n_values, rates, quantum_kl(rho, sigma)?, QUANTUM_SWEEP_TOL))
}

fn is_irreducible(chain: &StochasticMatrix) -> bool {
    let d = chain.dim_in();
    let reach = |forward: bool| {
        let mut seen = vec![false; d];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..d {
                let w = if forward { chain.get(j, i) } else { chain.get(i, j) };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary distribution of an irreducible column-stochastic chain.
pub fn stationary_distribution(chain: &StochasticMatrix) -> Result<ProbVec> {
    let d = chain.dim_in();
    if chain.dim_out() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: chain.dim_out(),
        });
    }
    if !is_irreducible(chain) {
        return Err(Error::ReducibleChain);
    }
    // Solve (T - I) pi = 0 with sum(pi) = 1 by replacing the last equation.
    let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = chain.get(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    rhs[d - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Invalid("stationary distribution not unique".into()))?;
    ProbVec::normalize(pi.iter().map(|x| x.max(0.0)).collect())
}

/// `sum_i pi_i sum_j T_ji ln(T_ji / q_j)`.
pub fn markov_kl_rate(chain: &StochasticMatrix, q: &ProbVec) -> Result<f64> {
    let pi = stationary_distribution(chain)?;
    same_dim(chain.dim_out(), q.dim())?;
    let mut rate = 0.0;
    for i in 0..pi.dim() {
        for j in 0..q.dim() {
            let t = chain.get(j, i);
            if t > 0.0 {
                if q.get(j) == 0.0 {
                    return Ok(f64::INFINITY);
                }
                rate += pi.get(i) * t * (t / q.get(j)).ln();
            }
        }
    }
    Ok(rate)
}

/// Path weights of the chain started from `init`, against `q^n`, grouped by
/// first symbol, last symbol and transition counts.
fn markov_atoms(chain: &StochasticMatrix, init: &ProbVec, q: &ProbVec, n: usize) -> Result<Vec<(f64, f64)>> {
    let d = chain.dim_in();
    type Key = (usize, Vec<u16>);
    let mut layer: HashMap<Key, (f64, usize)> = HashMap::new();
    for s in 0..d {
        if init.get(s) > 0.0 {
            layer.insert((s, vec![0; d * d]), (1.0, s));
        }
    }
    for _ in 1..n {
        let mut next: HashMap<Key, (f64, usize)> = HashMap::with_capacity(layer.len() * d);
        for ((first, counts), (paths, last)) in &layer {
            for j in 0..d {
                if chain.get(j, *last) == 0.0 {
                    continue;
                }
                let mut k = counts.clone();
                k[*last * d + j] += 1;
                // The last symbol is fixed by the counts together with the first symbol.
                let e = next.entry((*first, k)).or_insert((0.0, j));
                e.0 += paths;
            }
        }
        if next.len() > MAX_CLASSES {
            return Err(Error::TooLarge(format!("{} path classes", next.len())));
        }
        layer = next;
    }
    let ln = |x: f64| x.ln();
    Ok(layer
        .into_iter()
        .map(|((first, counts), (paths, _))| {
            let mut lp = ln(paths) + ln(init.get(first));
            let mut lq = ln(paths) + ln(q.get(first));
            for (idx, &k) in counts.iter().enumerate() {
                if k > 0 {
                    let (i, j) = (idx / d, idx % d);
                    lp += k as f64 * ln(chain.get(j, i));
                    lq += k as f64 * ln(q.get(j));
                }
            }
            (lp, lq)
        })
        .collect())
}

/// `S_H^eta` of the first `n` symbols of a Markov source against `q^n`.
pub fn sh_markov(chain: &StochasticMatrix, init: &ProbVec, q: &ProbVec, eta: f64, n: usize) -> Result<f64> {
    same_dim(chain.dim_in(), init.dim())?;
    same_dim(chain.dim_out(), q.dim())?;
    check_eta(eta)?;
    check_n_max(n)?;
    if !is_irreducible(chain) {
        return Err(Error::ReducibleChain);
    }
    Ok(sh_from_atoms(markov_atoms(chain, init, q, n)?, eta))
}

/// Sweep `n = 1..=n_max` for a Markov source started from `init` against an
/// i.i.d. reference; the target is the stationary relative entropy rate.
pub fn markov_source_sweep(
    chain: &StochasticMatrix,
    init: &ProbVec,
    q: &ProbVec,
    eta: f64,
    n_max: usize,
) -> Result<SteinSweep> {
    check_n_max(n_max)?;
    let target = markov_kl_rate(chain, q)?;
    let n_values: Vec<usize> = (1..=n_max).collect();
    let rates = n_values
        .iter()
        .map(|&n| sh_markov(chain, init, q, eta, n).map(|v| v / n as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteinSweep::new(eta, n_values, rates, target, MARKOV_SWEEP_TOL))
}
