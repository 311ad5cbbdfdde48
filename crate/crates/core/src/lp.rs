//! Dense phase-one simplex for small feasibility problems `A x = b, x >= 0`.
//!
//! Bland's rule is used throughout, so the method terminates on degenerate
//! problems at the price of more pivots. Problem sizes here are a few dozen
//! rows and columns.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// A feasible point, or the smallest phase-one infeasibility found.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub x: Vec<f64>,
    /// Sum of artificial variables at the phase-one optimum.
    pub infeasibility: f64,
}

/// Solves phase one for `A x = b, x >= 0`, `A` given row-major as `m x n`.
pub fn phase_one(a: &[f64], b: &[f64], n: usize) -> Result<Feasibility> {
    let m = b.len();
    if a.len() != m * n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            found: a.len(),
        });
    }
    // tableau columns: n structural, m artificial, 1 rhs
    let width = n + m + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i * width + j] = sign * a[i * n + j];
        }
        tab[i * width + n + i] = 1.0;
        tab[i * width + n + m] = sign * b[i];
    }
    // objective row: minimize sum of artificials, stored as reduced costs
    for j in 0..width {
        if j >= n && j < n + m {
            continue;
        }
        let s: f64 = (0..m).map(|i| tab[i * width + j]).sum();
        tab[m * width + j] = -s;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iter = 50 * (n + m).max(10);
    for _ in 0..max_iter {
        // entering: smallest index with negative reduced cost (Bland)
        let entering = (0..n + m).find(|&j| tab[m * width + j] < -PIVOT_EPS);
        let Some(e) = entering else { break };
        // leaving: min ratio, ties by smallest basis index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i * width + e];
            if coef > PIVOT_EPS {
                let ratio = tab[i * width + n + m] / coef;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            // unbounded direction cannot occur in phase one; stop
            break;
        };
        pivot(&mut tab, width, m, r, e);
        basis[r] = e;
    }

    let mut x = vec![0.0; n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab[i * width + n + m].max(0.0);
        }
    }
    let infeasibility = -tab[m * width + n + m];
    Ok(Feasibility {
        x,
        infeasibility: infeasibility.max(0.0),
    })
}

fn pivot(tab: &mut [f64], width: usize, m: usize, r: usize, e: usize) {
    let p = tab[r * width + e];
    for j in 0..width {
        tab[r * width + j] /= p;
    }
    for i in 0..=m {
        if i == r {
            continue;
        }
        let f = tab[i * width + e];
        if f != 0.0 {
            for j in 0..width {
                tab[i * width + j] -= f * tab[r * width + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_system() {
        // x + y = 1, x - y = 0.5
        let f = phase_one(&[1.0, 1.0, 1.0, -1.0], &[1.0, 0.5], 2).unwrap();
        assert!(f.infeasibility < 1e-12);
        assert!((f.x[0] - 0.75).abs() < 1e-12);
        assert!((f.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        // x + y = 1, x + y = 2
        let f = phase_one(&[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0], 2).unwrap();
        assert!(f.infeasibility > 0.5);
    }

    #[test]
    fn negative_rhs_and_redundancy() {
        // -x = -0.3, x + y = 1, 2x + 2y = 2
        let a = [-1.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let f = phase_one(&a, &[-0.3, 1.0, 2.0], 2).unwrap();
        assert!(f.infeasibility < 1e-12);
        assert!((f.x[0] - 0.3).abs() < 1e-12);
        assert!((f.x[1] - 0.7).abs() < 1e-12);
    }
}
