#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use thermomaj::quantum::{hermitian_eigen, trace_re, CMatrix, DensityMatrix, C64};
use thermomaj::{ProbVec, StochasticMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the simplex.
pub fn random_probvec<R: Rng>(d: usize, rng: &mut R) -> ProbVec {
    let w: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    ProbVec::normalize(w).unwrap()
}

/// Like [`random_probvec`] but each entry is zeroed with probability
/// `zero_prob`, keeping at least one entry.
pub fn random_sparse_probvec<R: Rng>(d: usize, zero_prob: f64, rng: &mut R) -> ProbVec {
    let keep = rng.random_range(0..d);
    let w: Vec<f64> = (0..d)
        .map(|i| {
            if i != keep && rng.random_bool(zero_prob) {
                0.0
            } else {
                Exp1.sample(rng)
            }
        })
        .collect();
    ProbVec::normalize(w).unwrap()
}

/// Column-stochastic matrix with independent uniform columns.
pub fn random_stochastic<R: Rng>(d_out: usize, d_in: usize, rng: &mut R) -> StochasticMatrix {
    let cols: Vec<ProbVec> = (0..d_in).map(|_| random_probvec(d_out, rng)).collect();
    let rows = (0..d_out)
        .map(|i| cols.iter().map(|c| c.get(i)).collect())
        .collect();
    StochasticMatrix::from_rows(rows).unwrap()
}

/// Convex combination of `k` uniformly random permutation matrices.
pub fn random_doubly_stochastic<R: Rng>(d: usize, k: usize, rng: &mut R) -> StochasticMatrix {
    let w = random_probvec(k, rng);
    let mut data = vec![0.0; d * d];
    let mut perm: Vec<usize> = (0..d).collect();
    for &wk in w.iter() {
        perm.shuffle(rng);
        for (j, &i) in perm.iter().enumerate() {
            data[i * d + j] += wk;
        }
    }
    StochasticMatrix::from_row_major(d, d, data).unwrap()
}

pub fn apply(t: &StochasticMatrix, p: &ProbVec) -> Vec<f64> {
    (0..t.dim_out())
        .map(|i| (0..t.dim_in()).map(|j| t.get(i, j) * p.get(j)).sum())
        .collect()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Minimum total slack of `T x_k = y_k` over column-stochastic `T`
/// (doubly stochastic when `doubly` is set).
fn lp_min_slack(pairs: &[(&ProbVec, &ProbVec)], doubly: bool) -> f64 {
    let d_in = pairs[0].0.dim();
    let d_out = pairs[0].1.dim();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t: Vec<Vec<_>> = (0..d_out)
        .map(|_| (0..d_in).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect())
        .collect();
    for j in 0..d_in {
        let col: Vec<_> = (0..d_out).map(|i| (t[i][j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, 1.0);
    }
    if doubly {
        for row in &t {
            let r: Vec<_> = row.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(r.as_slice(), ComparisonOp::Eq, 1.0);
        }
    }
    for (x, y) in pairs {
        for i in 0..d_out {
            let up = lp.add_var(1.0, (0.0, f64::INFINITY));
            let down = lp.add_var(1.0, (0.0, f64::INFINITY));
            let mut expr: Vec<_> = (0..d_in).map(|j| (t[i][j], x.get(j))).collect();
            expr.push((up, -1.0));
            expr.push((down, 1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, y.get(i));
        }
    }
    lp.solve().map(|s| s.objective()).unwrap_or(f64::INFINITY)
}

pub const LP_FEASIBLE: f64 = 1e-9;

/// Whether a doubly stochastic `T` with `T p = p_target` exists.
pub fn lp_majorizes(p: &ProbVec, p_target: &ProbVec) -> bool {
    lp_min_slack(&[(p, p_target)], true) <= LP_FEASIBLE
}

/// Whether a column-stochastic `T` with `T p = p'` and `T q = q'` exists.
pub fn lp_d_majorizes(p: &ProbVec, q: &ProbVec, pt: &ProbVec, qt: &ProbVec) -> bool {
    lp_min_slack(&[(p, pt), (q, qt)], false) <= LP_FEASIBLE
}

/// `min S_inf(tau || q)` over the eps-ball of `p`, by bisection on the
/// threshold `lambda` of `sum (p_i - lambda q_i)_+ <= eps`.
pub fn rinf_oracle(p: &ProbVec, q: &ProbVec, eps: f64) -> f64 {
    let excess = |lam: f64| -> f64 {
        p.iter()
            .zip(q.iter())
            .map(|(a, b)| (a - lam * b).max(0.0))
            .sum()
    };
    if excess(1.0) <= eps {
        return 0.0;
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while excess(hi) > eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).ln()
}

/// `max -ln q[L]` over all supports `L` whose complement carries at most
/// `eps` of `p`, by enumerating every subset.
pub fn r0_oracle(p: &ProbVec, q: &ProbVec, eps: f64) -> f64 {
    let d = p.dim();
    let cap = eps * (1.0 + 1e-12) + 1e-15;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        let (mut dropped, mut kept_q, mut kept_p) = (0.0, 0.0, 0.0);
        for i in 0..d {
            if mask & (1 << i) != 0 {
                dropped += p.get(i);
            } else {
                kept_q += q.get(i);
                kept_p += p.get(i);
            }
        }
        if dropped <= cap && kept_p > 0.0 {
            best = best.min(kept_q);
        }
    }
    -best.ln()
}

/// `S_H^eta` from dense grids of threshold tests `P{rho - t sigma > 0}`.
///
/// Mixtures of tests realize every point of the convex hull of their
/// `(tr rho Q, tr sigma Q)` pairs, so the lower hull read at `tr rho Q = eta`
/// bounds the optimum; on a fine grid it converges to it.
pub fn sh_threshold_grid_oracle(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64, steps: usize) -> f64 {
    let d = rho.dim();
    let inv_sqrt = sigma.power(-0.5);
    let t_max = hermitian_eigen(&(&inv_sqrt * rho.matrix() * &inv_sqrt)).values[0] * 1.01;
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0), (1.0, trace_re(sigma.matrix()))];
    // uniform and log-spaced thresholds, so ill-conditioned sigma is covered
    let uniform = (0..=steps).map(|k| t_max * k as f64 / steps as f64);
    let logs = (0..=steps).map(|k| t_max * (1e-9f64).powf(1.0 - k as f64 / steps as f64));
    for t in uniform.chain(logs) {
        let m = rho.matrix() - sigma.matrix() * C64::new(t, 0.0);
        let e = hermitian_eigen(&m);
        let mut q = CMatrix::zeros(d, d);
        for (j, &v) in e.values.iter().enumerate() {
            if v > 0.0 {
                let col = e.vectors.column(j);
                q += &col * col.adjoint();
            }
        }
        pts.push((trace_re(&(rho.matrix() * &q)), trace_re(&(sigma.matrix() * &q))));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // lower hull, left to right
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut best = f64::INFINITY;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 <= eta && eta <= b.0 && b.0 > a.0 {
            best = best.min(a.1 + (b.1 - a.1) * (eta - a.0) / (b.0 - a.0));
        }
        if b.0 >= eta {
            best = best.min(b.1);
        }
    }
    -(best / eta).ln()
}

pub struct Tally {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub worst: f64,
}

impl Tally {
    pub fn new(name: &'static str) -> Self {
        Tally {
            name,
            trials: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records one trial whose violation is `excess` (positive means failed).
    pub fn record(&mut self, excess: f64) {
        self.trials += 1;
        if excess > 0.0 || excess.is_nan() {
            self.failures += 1;
        }
        if excess > self.worst || excess.is_nan() {
            self.worst = excess;
        }
    }

    pub fn check(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }
}
