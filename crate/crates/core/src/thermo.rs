//! Classical stochastic thermodynamics on finite state spaces: quench and
//! relax protocols with exact work statistics, nonequilibrium free energies,
//! and single-shot work with a two-level work storage and two-state clock.

use serde::{Deserialize, Serialize};

use crate::divergence::{kl_slices, renyi_slices, shannon_entropy};
use crate::error::{Error, Result};
use crate::majorization::thermo_majorizes;
use crate::prob::{same_dim, tensor, GibbsSpec, ProbVec, StochasticMatrix};

/// Residual allowed for `T p^G = p^G` in relaxation steps.
pub const GIBBS_TOL: f64 = 1e-9;
/// Levels that should sit at infinite energy are placed this far (in units
/// of `1/beta`) above the highest finite level.
pub const ENERGY_CAP: f64 = 40.0;
/// Step count used by [`single_shot_extraction`].
pub const DEFAULT_RESTORE_STEPS: usize = 256;

/// One stage of a protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Instantaneous change of the energy levels; the state is frozen.
    Quench(Vec<f64>),
    /// A stochastic map that must fix the Gibbs state of the current levels.
    Relax(StochasticMatrix),
    /// Full relaxation to the Gibbs state of the current levels.
    Thermalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub beta: f64,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    /// Average work done on the system.
    pub work: f64,
    /// Average heat absorbed from the bath.
    pub heat: f64,
    #[serde(rename = "delta_S1")]
    pub delta_s1: f64,
    /// Entropy production `delta_S1 - beta * heat`.
    pub sigma: f64,
    /// Variance of the stochastic work.
    pub work_variance: f64,
    /// State after each step, starting with the initial state.
    pub trajectory: Vec<ProbVec>,
    pub final_energies: Vec<f64>,
}

fn gibbs_of(energies: &[f64], beta: f64) -> Result<ProbVec> {
    Ok(GibbsSpec::new(energies.to_vec(), beta)?.state())
}

/// `S_1(p || p^G) - S_1(Tp || p^G)`, the entropy produced by a
/// Gibbs-preserving map.
pub fn entropy_production(p: &ProbVec, t: &StochasticMatrix, gibbs: &GibbsSpec) -> Result<f64> {
    same_dim(p.dim(), gibbs.dim())?;
    let g = gibbs.state();
    let residual = t.fixed_point_residual(&g)?;
    if residual > GIBBS_TOL {
        return Err(Error::NotGibbsPreserving { residual });
    }
    let tp = t.apply_slice(p.as_slice())?;
    Ok(kl_slices(p.as_slice(), g.as_slice()) - kl_slices(&tp, g.as_slice()))
}

/// `F_alpha(p; H) = S_alpha(p || p^G) / beta + F`.
pub fn noneq_free_energy(p: &ProbVec, gibbs: &GibbsSpec, alpha: f64) -> Result<f64> {
    same_dim(p.dim(), gibbs.dim())?;
    let f = gibbs.free_energy()?;
    let s = renyi_slices(p.as_slice(), gibbs.state().as_slice(), alpha);
    Ok(s / gibbs.beta() + f)
}

/// Runs a protocol from `p0` under initial levels `e0`.
///
/// Work is booked at quenches and heat at relaxations. The work variance is
/// exact: the first two work moments are carried per microstate.
pub fn simulate_protocol(proto: &Protocol, p0: &ProbVec, e0: &[f64]) -> Result<ProtocolReport> {
    same_dim(p0.dim(), e0.len())?;
    let beta = proto.beta;
    let d = p0.dim();
    let mut energies = e0.to_vec();
    let mut p = p0.as_slice().to_vec();
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let (mut work, mut heat) = (0.0, 0.0);
    let mut trajectory = vec![p0.clone()];
    let energy = |e: &[f64], p: &[f64]| e.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();

    for step in &proto.steps {
        match step {
            Step::Quench(next) => {
                same_dim(d, next.len())?;
                if let Some(index) = next.iter().position(|e| !e.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                for i in 0..d {
                    let de = next[i] - energies[i];
                    m2[i] += 2.0 * de * m1[i] + de * de * p[i];
                    m1[i] += de * p[i];
                    work += de * p[i];
                }
                energies.clone_from(next);
            }
            Step::Relax(t) => {
                let g = gibbs_of(&energies, beta)?;
                let residual = t.fixed_point_residual(&g)?;
                if residual > GIBBS_TOL {
                    return Err(Error::NotGibbsPreserving { residual });
                }
                let next = t.apply_slice(&p)?;
                heat += energy(&energies, &next) - energy(&energies, &p);
                p = next;
                m1 = t.apply_slice(&m1)?;
                m2 = t.apply_slice(&m2)?;
            }
            Step::Thermalize => {
                let g = gibbs_of(&energies, beta)?;
                let (w1, w2): (f64, f64) = (m1.iter().sum(), m2.iter().sum());
                heat += energy(&energies, g.as_slice()) - energy(&energies, &p);
                // the rank-one map forgets the microstate but not the work
                for i in 0..d {
                    m1[i] = g.get(i) * w1;
                    m2[i] = g.get(i) * w2;
                }
                p = g.into_vec();
            }
        }
        trajectory.push(ProbVec::from_computed(p.clone()));
    }
    let p_final = trajectory.last().expect("non-empty");
    let delta_s1 = shannon_entropy(p_final) - shannon_entropy(p0);
    let mean: f64 = m1.iter().sum();
    let second: f64 = m2.iter().sum();
    Ok(ProtocolReport {
        work,
        heat,
        delta_s1,
        sigma: delta_s1 - beta * heat,
        work_variance: (second - mean * mean).max(0.0),
        trajectory,
        final_energies: energies,
    })
}

/// `n` quench-and-thermalize steps along the straight line from `e0` to `e1`.
pub fn quasi_static_protocol(e0: &[f64], e1: &[f64], beta: f64, n: usize) -> Result<Protocol> {
    same_dim(e0.len(), e1.len())?;
    require_steps(n)?;
    let steps = (1..=n)
        .flat_map(|k| {
            let s = k as f64 / n as f64;
            let e: Vec<f64> = e0.iter().zip(e1).map(|(a, b)| a + s * (b - a)).collect();
            [Step::Quench(e), Step::Thermalize]
        })
        .collect();
    Ok(Protocol { beta, steps })
}

fn require_steps(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "at least one step is required",
        });
    }
    Ok(())
}

/// Levels `-ln(p_i)/beta`; zero entries are put at the energy cap.
fn levels_for(p: &ProbVec, beta: f64) -> Vec<f64> {
    let finite_max = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| -x.ln() / beta)
        .fold(f64::NEG_INFINITY, f64::max);
    p.iter()
        .map(|&x| {
            if x > 0.0 {
                -x.ln() / beta
            } else {
                finite_max + ENERGY_CAP / beta
            }
        })
        .collect()
}

/// Point at fraction `s` on the great circle between `sqrt(p)` and
/// `sqrt(p_target)`, squared back to a distribution.
fn geodesic_point(p: &[f64], p_target: &[f64], s: f64) -> Vec<f64> {
    let a: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
    let b: Vec<f64> = p_target.iter().map(|x| x.sqrt()).collect();
    let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
    let theta = cos.acos();
    let v: Vec<f64> = if theta < 1e-12 {
        a.iter().zip(&b).map(|(x, y)| x + s * (y - x)).collect()
    } else {
        let (wa, wb) = (((1.0 - s) * theta).sin(), (s * theta).sin());
        a.iter()
            .zip(&b)
            .map(|(x, y)| (wa * x + wb * y) / theta.sin())
            .collect()
    };
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    let z: f64 = sq.iter().sum();
    sq.into_iter().map(|x| x / z).collect()
}

/// Quench to levels making `p` thermal, move quasi-statically to levels
/// making `p_target` thermal, then quench to `e_target`.
///
/// The intermediate thermal states follow the Fisher-Rao geodesic, which
/// spreads entropy production evenly over the `n` steps. Zero entries of the
/// target are approximated by levels at the energy cap.
pub fn optimal_fluctuating_protocol(
    p: &ProbVec,
    p_target: &ProbVec,
    e: &[f64],
    e_target: &[f64],
    beta: f64,
    n: usize,
) -> Result<Protocol> {
    same_dim(p.dim(), e.len())?;
    same_dim(p_target.dim(), e_target.len())?;
    same_dim(p.dim(), p_target.dim())?;
    p.require_full_support()?;
    require_steps(n)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::UndefinedFreeEnergy);
    }
    let floored = ProbVec::from_computed(gibbs_of(&levels_for(p_target, beta), beta)?.into_vec());
    let mut steps = vec![Step::Quench(levels_for(p, beta))];
    for k in 1..=n {
        let q = geodesic_point(p.as_slice(), floored.as_slice(), k as f64 / n as f64);
        let levels = q.iter().map(|x| -x.ln() / beta).collect();
        steps.extend([Step::Quench(levels), Step::Thermalize]);
    }
    steps.push(Step::Quench(e_target.to_vec()));
    Ok(Protocol { beta, steps })
}

/// Work extractable in a single shot, `S_0(p || p^G) / beta`, with the
/// protocol realizing it. See [`single_shot_extraction_with_steps`].
pub fn single_shot_extraction(p: &ProbVec, gibbs: &GibbsSpec) -> Result<(f64, Protocol)> {
    single_shot_extraction_with_steps(p, gibbs, DEFAULT_RESTORE_STEPS)
}

/// Raises the unoccupied levels to the energy cap, lets the system relax, and
/// lowers them back in `n` quasi-static steps. For full-rank `p` the protocol
/// is empty.
pub fn single_shot_extraction_with_steps(
    p: &ProbVec,
    gibbs: &GibbsSpec,
    n: usize,
) -> Result<(f64, Protocol)> {
    same_dim(p.dim(), gibbs.dim())?;
    gibbs.require_positive_beta()?;
    require_steps(n)?;
    let beta = gibbs.beta();
    let w = renyi_slices(p.as_slice(), gibbs.state().as_slice(), 0.0) / beta;
    if p.is_full_rank() {
        return Ok((0.0, Protocol { beta, steps: vec![] }));
    }
    let e = gibbs.energies();
    let cap = e.iter().copied().fold(f64::NEG_INFINITY, f64::max) + ENERGY_CAP / beta;
    let raised: Vec<f64> = e
        .iter()
        .zip(p.iter())
        .map(|(&ei, &pi)| if pi > 0.0 { ei } else { cap })
        .collect();
    let mut steps = vec![Step::Quench(raised.clone()), Step::Thermalize];
    // lower the raised levels linearly in their Boltzmann weight
    for k in 1..=n {
        let s = k as f64 / n as f64;
        let levels = e
            .iter()
            .zip(&raised)
            .map(|(&ei, &ri)| {
                if ri == ei {
                    ei
                } else {
                    ei - ((1.0 - s) * (-beta * (ri - ei)).exp() + s).ln() / beta
                }
            })
            .collect();
        steps.extend([Step::Quench(levels), Step::Thermalize]);
    }
    Ok((w, Protocol { beta, steps }))
}

/// Outcome of a work-assisted transformation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WorkVerdict {
    /// Thermo-majorization of the composite system, which decides the question.
    pub transformable: bool,
    /// `w >= F_inf(p') - F_0(p)`.
    pub sufficient: bool,
    /// `w >= F_alpha(p') - F_alpha(p)` for `alpha` in `{0, 1, inf}`.
    pub necessary: bool,
}

/// Whether `p` under `gibbs` can be turned into `p_target` under
/// `gibbs_target` while a two-level work storage with levels `{0, w}` drops
/// from `w` to `0`; `w` is the work done on the system.
///
/// When the Hamiltonians differ, a two-state clock switches between them and
/// the composite Gibbs state is
/// `(Z p^G (x) |0> + Z' p^G' (x) |1>)/(Z + Z') (x) r^G`.
pub fn w_assisted_transformable(
    p: &ProbVec,
    p_target: &ProbVec,
    gibbs: &GibbsSpec,
    gibbs_target: &GibbsSpec,
    w: f64,
) -> Result<WorkVerdict> {
    same_dim(p.dim(), gibbs.dim())?;
    same_dim(p_target.dim(), gibbs_target.dim())?;
    gibbs.require_positive_beta()?;
    if gibbs.beta() != gibbs_target.beta() {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: gibbs_target.beta(),
            reason: "both Hamiltonians must share one temperature",
        });
    }
    if !w.is_finite() {
        return Err(Error::InvalidParameter {
            name: "w",
            value: w,
            reason: "must be finite",
        });
    }
    let beta = gibbs.beta();
    // storage levels (0, w), Gibbs weights computed with a stable shift
    let storage = GibbsSpec::new(vec![0.0, w], beta)?;
    let r_gibbs = storage.state();
    let (r_init, r_final) = (ProbVec::delta(2, 1), ProbVec::delta(2, 0));

    let same_hamiltonian = gibbs == gibbs_target;
    let (src, dst, system_gibbs) = if same_hamiltonian {
        (p.clone(), p_target.clone(), gibbs.state())
    } else {
        let (lz, lz2) = (gibbs.log_partition(), gibbs_target.log_partition());
        let top = lz.max(lz2);
        let (a, b) = ((lz - top).exp(), (lz2 - top).exp());
        let (a, b) = (a / (a + b), b / (a + b));
        let d0 = p.dim();
        let d1 = p_target.dim();
        let mut g = Vec::with_capacity(d0 + d1);
        g.extend(gibbs.state().iter().map(|x| a * x));
        g.extend(gibbs_target.state().iter().map(|x| b * x));
        let mut s = p.as_slice().to_vec();
        s.resize(d0 + d1, 0.0);
        let mut t = vec![0.0; d0];
        t.extend_from_slice(p_target.as_slice());
        (
            ProbVec::from_computed(s),
            ProbVec::from_computed(t),
            ProbVec::from_computed(g),
        )
    };
    let transformable = thermo_majorizes(
        &tensor(&src, &r_init),
        &tensor(&dst, &r_final),
        &tensor(&system_gibbs, &r_gibbs),
    )?;

    let f = |q: &ProbVec, g: &GibbsSpec, a: f64| noneq_free_energy(q, g, a);
    let tol = 1e-10 * (1.0 + w.abs());
    let sufficient = w >= f(p_target, gibbs_target, f64::INFINITY)? - f(p, gibbs, 0.0)? - tol;
    let mut necessary = true;
    for a in [0.0, 1.0, f64::INFINITY] {
        necessary &= w >= f(p_target, gibbs_target, a)? - f(p, gibbs, a)? - tol;
    }
    Ok(WorkVerdict {
        transformable,
        sufficient,
        necessary,
    })
}
