//! Lorenz curves and the majorization preorders (ordinary, relative and
//! thermal), with constructive stochastic-matrix witnesses and the Birkhoff
//! decomposition of doubly stochastic matrices.
//!
//! Every `<=` in a decision procedure carries the additive tolerance
//! [`MAJ_TOL`]; curves that touch count as ordered.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp;
use crate::prob::{decreasing_order, same_dim, Permutation, ProbVec, StochasticMatrix};

/// Additive tolerance of the decision procedures.
pub const MAJ_TOL: f64 = 1e-10;
/// Largest common denominator tried by the rational embedding witness.
pub const M_MAX: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LorenzKind {
    Ordinary,
    Relative,
}

/// A concave polyline through `(0, 0)` and `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    pub points: Vec<(f64, f64)>,
    pub kind: LorenzKind,
}

impl LorenzCurve {
    fn from_steps(steps: impl Iterator<Item = (f64, f64)>, kind: LorenzKind) -> Self {
        let mut points = vec![(0.0, 0.0)];
        let (mut x, mut y) = (0.0, 0.0);
        for (dx, dy) in steps {
            x += dx;
            y += dy;
            let last = points.last_mut().expect("non-empty");
            if dx == 0.0 {
                // vertical or empty segment: collapse onto the previous x
                last.1 = y;
            } else {
                points.push((x, y));
            }
        }
        // pin the endpoint against rounding drift
        let last = points.last_mut().expect("non-empty");
        *last = (1.0, 1.0);
        LorenzCurve { points, kind }
    }

    /// Linear interpolation; `x` outside `[0, 1]` is clamped.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let pts = &self.points;
        let k = pts.partition_point(|&(px, _)| px < x);
        if k == 0 {
            return pts[0].1;
        }
        if k == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(x, _)| x)
    }

    /// Slopes are non-increasing within `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        let slopes: Vec<f64> = self
            .points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        slopes.windows(2).all(|s| s[1] <= s[0] + tol)
    }

    /// First breakpoint where `self` falls below `other` by more than `tol`,
    /// checked on the union of both breakpoint sets.
    pub fn first_shortfall(&self, other: &LorenzCurve, tol: f64) -> Option<(f64, f64)> {
        let mut xs: Vec<f64> = self.breakpoints().chain(other.breakpoints()).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter().find_map(|x| {
            let gap = other.eval(x) - self.eval(x);
            (gap > tol).then_some((x, gap))
        })
    }
}

/// Ordinary Lorenz curve: breakpoints `(k/d, sum_{i<=k} p_i^down)`.
pub fn lorenz(p: &ProbVec) -> LorenzCurve {
    let d = p.dim() as f64;
    let sorted = p.sorted_decreasing();
    LorenzCurve::from_steps(sorted.into_iter().map(|v| (1.0 / d, v)), LorenzKind::Ordinary)
}

/// Order of indices by decreasing likelihood ratio `p_i / q_i` (stable).
fn ratio_order(p: &[f64], q: &[f64]) -> Vec<usize> {
    let ratios: Vec<f64> = p.iter().zip(q).map(|(a, b)| a / b).collect();
    decreasing_order(&ratios)
}

fn require_full(q: &ProbVec, what: &str) -> Result<()> {
    if q.is_full_rank() {
        Ok(())
    } else {
        Err(Error::SupportViolation(format!(
            "{what} must have full support"
        )))
    }
}

/// Relative Lorenz curve of `(p, q)`: cumulative `q*` against cumulative `p*`
/// after sorting by decreasing `p_i / q_i`.
pub fn lorenz_relative(p: &ProbVec, q: &ProbVec) -> Result<LorenzCurve> {
    same_dim(p.dim(), q.dim())?;
    require_full(q, "reference distribution")?;
    let order = ratio_order(p.as_slice(), q.as_slice());
    Ok(LorenzCurve::from_steps(
        order.into_iter().map(|i| (q.get(i), p.get(i))),
        LorenzKind::Relative,
    ))
}

/// First `k` (1-based) with `sum_{i<=k} lo^down > sum_{i<=k} hi^down + MAJ_TOL`.
/// Shorter vectors are padded with zeros.
pub fn majorization_violation(p_hi: &ProbVec, p_lo: &ProbVec) -> Option<usize> {
    let d = p_hi.dim().max(p_lo.dim());
    let hi = p_hi.padded(d).sorted_decreasing();
    let lo = p_lo.padded(d).sorted_decreasing();
    let (mut sh, mut sl) = (0.0, 0.0);
    for k in 0..d {
        sh += hi[k];
        sl += lo[k];
        if sl > sh + MAJ_TOL {
            return Some(k + 1);
        }
    }
    None
}

/// Whether `p_hi` majorizes `p_lo`.
pub fn majorizes(p_hi: &ProbVec, p_lo: &ProbVec) -> bool {
    majorization_violation(p_hi, p_lo).is_none()
}

fn check_pair(p: &ProbVec, q: &ProbVec) -> Result<()> {
    same_dim(p.dim(), q.dim())?;
    require_full(q, "reference distribution")
}

/// Where the relative Lorenz curve of `hi` drops below that of `lo`, if anywhere.
pub fn d_majorization_shortfall(
    hi: (&ProbVec, &ProbVec),
    lo: (&ProbVec, &ProbVec),
) -> Result<Option<(f64, f64)>> {
    check_pair(hi.0, hi.1)?;
    check_pair(lo.0, lo.1)?;
    let upper = lorenz_relative(hi.0, hi.1)?;
    let lower = lorenz_relative(lo.0, lo.1)?;
    Ok(upper.first_shortfall(&lower, MAJ_TOL))
}

/// Whether `(p, q)` d-majorizes `(p', q')`: the relative Lorenz curve of the
/// first pair lies weakly above that of the second.
pub fn d_majorizes(hi: (&ProbVec, &ProbVec), lo: (&ProbVec, &ProbVec)) -> Result<bool> {
    Ok(d_majorization_shortfall(hi, lo)?.is_none())
}

fn l1_to_line(p: &ProbVec, q: &ProbVec, t: f64) -> f64 {
    p.iter().zip(q.iter()).map(|(a, b)| (a - t * b).abs()).sum()
}

/// Independent route to d-majorization: `sum |p'_i - t q'_i| <= sum |p_i - t q_i|`
/// at every ratio breakpoint `t` of either pair (and at `t = 0`).
pub fn d_majorizes_t_sweep(hi: (&ProbVec, &ProbVec), lo: (&ProbVec, &ProbVec)) -> Result<bool> {
    check_pair(hi.0, hi.1)?;
    check_pair(lo.0, lo.1)?;
    let ts = std::iter::once(0.0)
        .chain(hi.0.iter().zip(hi.1.iter()).map(|(a, b)| a / b))
        .chain(lo.0.iter().zip(lo.1.iter()).map(|(a, b)| a / b));
    let scale = |t: f64| MAJ_TOL * (1.0 + t);
    Ok(ts
        .into_iter()
        .all(|t| l1_to_line(lo.0, lo.1, t) <= l1_to_line(hi.0, hi.1, t) + scale(t)))
}

/// Thermo-majorization: d-majorization with the Gibbs state on both sides.
pub fn thermo_majorizes(p: &ProbVec, p_target: &ProbVec, gibbs: &ProbVec) -> Result<bool> {
    d_majorizes((p, gibbs), (p_target, gibbs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessMethod {
    Ttransform,
    Embedding,
    Lp,
}

/// A stochastic matrix realizing a transformation, with its l1 residuals.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub matrix: StochasticMatrix,
    pub residual_p: f64,
    pub residual_q: Option<f64>,
    pub method: WitnessMethod,
}

/// A doubly stochastic map written as a sort, a chain of T-transforms on
/// sorted coordinates, and an unsort.
#[derive(Debug, Clone)]
struct TransformChain {
    input_order: Vec<usize>,
    output_order: Vec<usize>,
    /// `(j, k, lambda)`: `(x_j, x_k) <- (l x_j + (1-l) x_k, (1-l) x_j + l x_k)`.
    steps: Vec<(usize, usize, f64)>,
}

impl TransformChain {
    /// Hardy-Littlewood-Polya construction; `x` must majorize `y`.
    fn build(x_in: &[f64], y_in: &[f64]) -> TransformChain {
        let d = x_in.len();
        let input_order = decreasing_order(x_in);
        let output_order = decreasing_order(y_in);
        let mut x: Vec<f64> = input_order.iter().map(|&i| x_in[i]).collect();
        let y: Vec<f64> = output_order.iter().map(|&i| y_in[i]).collect();
        let eps = 1e-15;
        let mut steps = Vec::new();
        for _ in 0..(4 * d + 4) {
            let Some(k) = (0..d).find(|&k| x[k] < y[k] - eps) else {
                break;
            };
            let Some(j) = (0..k).rev().find(|&j| x[j] > y[j]) else {
                break;
            };
            let delta = (x[j] - y[j]).min(y[k] - x[k]);
            let gap = x[j] - x[k];
            if gap <= 0.0 || delta <= 0.0 {
                break;
            }
            let lambda = 1.0 - delta / gap;
            steps.push((j, k, lambda));
            if x[j] - y[j] <= y[k] - x[k] {
                x[k] += x[j] - y[j];
                x[j] = y[j];
            } else {
                x[j] -= y[k] - x[k];
                x[k] = y[k];
            }
        }
        TransformChain {
            input_order,
            output_order,
            steps,
        }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.input_order.iter().map(|&i| v[i]).collect();
        for &(j, k, l) in &self.steps {
            let (a, b) = (w[j], w[k]);
            w[j] = l * a + (1.0 - l) * b;
            w[k] = (1.0 - l) * a + l * b;
        }
        let mut out = vec![0.0; v.len()];
        for (pos, &i) in self.output_order.iter().enumerate() {
            out[i] = w[pos];
        }
        out
    }

    fn to_matrix(&self) -> StochasticMatrix {
        let d = self.input_order.len();
        let mut data = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for col in 0..d {
            e[col] = 1.0;
            for (row, v) in self.apply(&e).into_iter().enumerate() {
                data[row * d + col] = v;
            }
            e[col] = 0.0;
        }
        StochasticMatrix::from_row_major_unchecked(d, d, data)
    }
}

fn l1_residual(t: &StochasticMatrix, p: &[f64], target: &[f64]) -> f64 {
    t.apply_slice(p)
        .map(|tp| tp.iter().zip(target).map(|(a, b)| (a - b).abs()).sum())
        .unwrap_or(f64::INFINITY)
}

/// Doubly stochastic `T` with `T p = p_target`, as a product of at most
/// `d - 1` T-transforms between two permutations.
pub fn witness_doubly_stochastic(p: &ProbVec, p_target: &ProbVec) -> Result<WitnessReport> {
    same_dim(p.dim(), p_target.dim())?;
    if let Some(violated_k) = majorization_violation(p, p_target) {
        return Err(Error::NotMajorized { violated_k });
    }
    let chain = TransformChain::build(p.as_slice(), p_target.as_slice());
    let matrix = chain.to_matrix();
    let residual_p = l1_residual(&matrix, p.as_slice(), p_target.as_slice());
    Ok(WitnessReport {
        matrix,
        residual_p,
        residual_q: None,
        method: WitnessMethod::Ttransform,
    })
}

/// Smallest common denominator `M <= m_max` with `q_i M` integral (to 1e-9)
/// for every entry of both vectors.
fn common_denominator(a: &ProbVec, b: &ProbVec, m_max: usize) -> Option<usize> {
    (1..=m_max).find(|&m| {
        let mf = m as f64;
        a.iter().chain(b.iter()).all(|&x| {
            let s = x * mf;
            s.round() >= 1.0 && (s - s.round()).abs() <= 1e-9
        })
    })
}

fn block_sizes(q: &ProbVec, m: usize) -> Vec<usize> {
    q.iter().map(|&x| (x * m as f64).round() as usize).collect()
}

fn embed(p: &ProbVec, blocks: &[usize]) -> Vec<f64> {
    let mut v = Vec::with_capacity(blocks.iter().sum());
    for (&pi, &m) in p.iter().zip(blocks) {
        v.extend(std::iter::repeat_n(pi / m as f64, m));
    }
    v
}

fn embedding_witness(
    p: &ProbVec,
    q: &ProbVec,
    p_target: &ProbVec,
    q_target: &ProbVec,
) -> Option<StochasticMatrix> {
    let m = common_denominator(q, q_target, M_MAX)?;
    let blocks_in = block_sizes(q, m);
    let blocks_out = block_sizes(q_target, m);
    if blocks_in.iter().sum::<usize>() != m || blocks_out.iter().sum::<usize>() != m {
        return None;
    }
    let chain = TransformChain::build(&embed(p, &blocks_in), &embed(p_target, &blocks_out));
    let (d_in, d_out) = (p.dim(), p_target.dim());
    let mut data = vec![0.0; d_out * d_in];
    let mut offset = 0;
    for (col, &mi) in blocks_in.iter().enumerate() {
        let mut e = vec![0.0; m];
        e[offset..offset + mi].iter_mut().for_each(|x| *x = 1.0 / mi as f64);
        offset += mi;
        let image = chain.apply(&e);
        let mut start = 0;
        for (row, &mj) in blocks_out.iter().enumerate() {
            data[row * d_in + col] = image[start..start + mj].iter().sum();
            start += mj;
        }
    }
    Some(StochasticMatrix::from_row_major_unchecked(d_out, d_in, data))
}

/// Solves for `T >= 0` with unit column sums, `T p = p'` and `T q = q'`.
fn lp_witness(
    p: &ProbVec,
    q: &ProbVec,
    p_target: &ProbVec,
    q_target: &ProbVec,
) -> Result<StochasticMatrix> {
    let (d_in, d_out) = (p.dim(), p_target.dim());
    let n = d_in * d_out;
    let var = |row: usize, col: usize| row * d_in + col;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for col in 0..d_in {
        let mut r = vec![0.0; n];
        (0..d_out).for_each(|row| r[var(row, col)] = 1.0);
        a.extend(r);
        b.push(1.0);
    }
    for (src, dst) in [(p, p_target), (q, q_target)] {
        for row in 0..d_out {
            let mut r = vec![0.0; n];
            (0..d_in).for_each(|col| r[var(row, col)] = src.get(col));
            a.extend(r);
            b.push(dst.get(row));
        }
    }
    let sol = lp::phase_one(&a, &b, n)?;
    if sol.infeasibility > 1e-9 {
        return Err(Error::LpInfeasible {
            residual: sol.infeasibility,
        });
    }
    let mut data = sol.x;
    // restore exact unit column sums lost to rounding
    for col in 0..d_in {
        let s: f64 = (0..d_out).map(|row| data[var(row, col)]).sum();
        if s > 0.0 {
            (0..d_out).for_each(|row| data[var(row, col)] /= s);
        }
    }
    StochasticMatrix::from_row_major(d_out, d_in, data)
}

/// Column-stochastic `T` with `T p = p_target` and `T q = q_target`.
///
/// Tries the rational embedding into a common denominator `M <= M_MAX`, which
/// reduces the problem to a doubly stochastic witness on `M` points; falls
/// back to a dense LP when no such `M` exists or its residual is too large.
pub fn witness_d_stochastic(
    p: &ProbVec,
    q: &ProbVec,
    p_target: &ProbVec,
    q_target: &ProbVec,
) -> Result<WitnessReport> {
    if let Some((at_x, gap)) = d_majorization_shortfall((p, q), (p_target, q_target))? {
        return Err(Error::NotDMajorized { at_x, gap });
    }
    let report = |matrix: StochasticMatrix, method| WitnessReport {
        residual_p: l1_residual(&matrix, p.as_slice(), p_target.as_slice()),
        residual_q: Some(l1_residual(&matrix, q.as_slice(), q_target.as_slice())),
        matrix,
        method,
    };
    if let Some(t) = embedding_witness(p, q, p_target, q_target) {
        let r = report(t, WitnessMethod::Embedding);
        if r.residual_p <= 1e-8 && r.residual_q.unwrap_or(0.0) <= 1e-8 {
            return Ok(r);
        }
    }
    Ok(report(
        lp_witness(p, q, p_target, q_target)?,
        WitnessMethod::Lp,
    ))
}

/// Kuhn augmenting-path matching; `allowed(r, c)` marks usable edges.
fn perfect_matching(
    d: usize,
    rows: &[usize],
    cols: &[usize],
    allowed: &dyn Fn(usize, usize) -> bool,
) -> bool {
    let mut match_col: Vec<Option<usize>> = vec![None; d];
    fn augment(
        r: usize,
        cols: &[usize],
        allowed: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for &c in cols {
            if allowed(r, c) && !seen[c] {
                seen[c] = true;
                if match_col[c].is_none_or(|r2| augment(r2, cols, allowed, seen, match_col)) {
                    match_col[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    rows.iter().all(|&r| {
        let mut seen = vec![false; d];
        augment(r, cols, allowed, &mut seen, &mut match_col)
    })
}

/// Lexicographically smallest perfect matching using entries `>= tau`.
fn lex_smallest_matching(m: &[f64], d: usize, tau: f64) -> Option<Vec<usize>> {
    let ok = |r: usize, c: usize| m[r * d + c] >= tau;
    let mut assigned = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for r in 0..d {
        let rest_rows: Vec<usize> = ((r + 1)..d).collect();
        let mut placed = false;
        for c in 0..d {
            if used[c] || !ok(r, c) {
                continue;
            }
            used[c] = true;
            let rest_cols: Vec<usize> = (0..d).filter(|&j| !used[j]).collect();
            if perfect_matching(d, &rest_rows, &rest_cols, &ok) {
                assigned[r] = c;
                placed = true;
                break;
            }
            used[c] = false;
        }
        if !placed {
            return None;
        }
    }
    Some(assigned)
}

/// Birkhoff decomposition `T = sum_k w_k P_k` by repeatedly peeling off a
/// maximum-bottleneck permutation (ties: lexicographically smallest).
pub fn birkhoff_decompose(t: &StochasticMatrix) -> Result<Vec<(Permutation, f64)>> {
    if !t.is_doubly_stochastic() {
        let deviation = if t.dim_in() == t.dim_out() {
            t.row_sum_deviation()
        } else {
            f64::INFINITY
        };
        return Err(Error::NotDoublyStochastic { deviation });
    }
    let d = t.dim_in();
    let mut m = t.as_row_major().to_vec();
    let zero_tol = 1e-13;
    let mut terms = Vec::new();
    let max_terms = (d - 1) * (d - 1) + 1;
    let mut remaining = 1.0;
    while remaining > 1e-12 && terms.len() < max_terms.max(1) + d {
        let mut values: Vec<f64> = m.iter().copied().filter(|&x| x > zero_tol).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        // largest threshold admitting a perfect matching
        let (mut lo, mut hi) = (0usize, values.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if lex_smallest_matching(&m, d, values[mid]).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let Some(&tau) = values.get(lo) else { break };
        let Some(assign) = lex_smallest_matching(&m, d, tau) else {
            break;
        };
        let w = (0..d).map(|r| m[r * d + assign[r]]).fold(f64::INFINITY, f64::min);
        for r in 0..d {
            let e = &mut m[r * d + assign[r]];
            *e -= w;
            if *e <= zero_tol {
                *e = 0.0;
            }
        }
        remaining -= w;
        // entry (r, assign[r]) sends input assign[r] to output r
        terms.push((Permutation::from_order(&assign), w));
    }
    Ok(terms)
}

/// `sum_k w_k P_k` as a dense row-major matrix.
pub fn birkhoff_reconstruct(terms: &[(Permutation, f64)], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for (perm, w) in terms {
        for i in 0..d {
            out[perm.image(i) * d + i] += w;
        }
    }
    out
}
