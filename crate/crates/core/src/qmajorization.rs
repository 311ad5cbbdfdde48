//! Quantum majorization with explicit channel witnesses, a measure-and-prepare
//! sufficiency test for quantum d-majorization, and single-shot work bounds
//! on a system + clock + work-storage composite.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::majorization::{birkhoff_decompose, majorizes, witness_doubly_stochastic};
use crate::prob::same_dim;
use crate::qdivergence::{q_renyi_0, q_renyi_inf, quantum_kl, von_neumann};
use crate::quantum::{
    c, kron, partial_trace_matrix, trace_re, CMatrix, DensityMatrix, Keep, QGibbsSpec,
    QuantumChannel,
};

/// Slack for the sufficiency test of measure-and-prepare witnesses.
pub const SUFFICIENCY_TOL: f64 = 1e-10;
const NECESSARY_TOL: f64 = 1e-9;

/// Spectral majorization: `rho` majorizes `rho_target`.
pub fn q_majorizes(rho: &DensityMatrix, rho_target: &DensityMatrix) -> Result<bool> {
    same_dim(rho.dim(), rho_target.dim())?;
    Ok(majorizes(&rho.spectrum_probvec()?, &rho_target.spectrum_probvec()?))
}

fn outer(u: &CMatrix, i: usize, v: &CMatrix, j: usize) -> CMatrix {
    u.column(i) * v.column(j).adjoint()
}

/// Unital channel with Kraus operators `sqrt(T_ji) |phi'_j><phi_i|`, where
/// `T` is a doubly stochastic map between the spectra.
pub fn q_majorization_witness(rho: &DensityMatrix, rho_target: &DensityMatrix) -> Result<QuantumChannel> {
    same_dim(rho.dim(), rho_target.dim())?;
    let (p, pt) = (rho.spectrum_probvec()?, rho_target.spectrum_probvec()?);
    let t = witness_doubly_stochastic(&p, &pt)?.matrix;
    let (phi, phi_t) = (&rho.spectrum().vectors, &rho_target.spectrum().vectors);
    let d = rho.dim();
    let mut kraus = Vec::new();
    for j in 0..d {
        for i in 0..d {
            let w = t.get(j, i);
            if w > 0.0 {
                kraus.push(outer(phi_t, j, phi, i) * c(w.sqrt()));
            }
        }
    }
    Ok(QuantumChannel::from_kraus_unchecked(kraus))
}

/// Weights and unitaries `U_k = V P_k` with `sum_k r_k U_k rho U_k^dagger = rho_target`,
/// where `V` maps the eigenbasis of `rho` onto that of `rho_target` and the
/// `P_k` come from a Birkhoff decomposition of the spectral witness.
pub fn mixture_of_unitaries_witness(
    rho: &DensityMatrix,
    rho_target: &DensityMatrix,
) -> Result<Vec<(f64, CMatrix)>> {
    same_dim(rho.dim(), rho_target.dim())?;
    let (p, pt) = (rho.spectrum_probvec()?, rho_target.spectrum_probvec()?);
    let t = witness_doubly_stochastic(&p, &pt)?.matrix;
    let (phi, phi_t) = (&rho.spectrum().vectors, &rho_target.spectrum().vectors);
    let d = rho.dim();
    Ok(birkhoff_decompose(&t)?
        .into_iter()
        .map(|(perm, r)| {
            let mut u = CMatrix::zeros(d, d);
            for i in 0..d {
                u += outer(phi_t, perm.image(i), phi, i);
            }
            (r, u)
        })
        .collect())
}

/// `X -> sum_k tr[P_k X] omega_k` for projectors given by orthonormal columns.
pub(crate) fn measure_and_prepare(branches: &[(CMatrix, &DensityMatrix)]) -> QuantumChannel {
    let mut kraus = Vec::new();
    for (basis, omega) in branches {
        let s = omega.spectrum();
        for (l, &w) in s.values.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            for m in 0..basis.ncols() {
                kraus.push(outer(&s.vectors, l, basis, m) * c(w.sqrt()));
            }
        }
    }
    QuantumChannel::from_kraus_unchecked(kraus)
}

/// Measure-and-prepare channel sending `rho -> rho_target` and
/// `sigma -> sigma_target`, built when
/// `S_inf(rho_target || sigma_target) <= S_0(rho || sigma)`.
///
/// `None` means the sufficient condition failed; a channel may still exist.
pub fn q_dmaj_sufficient_witness(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    rho_target: &DensityMatrix,
    sigma_target: &DensityMatrix,
) -> Result<Option<QuantumChannel>> {
    same_dim(rho.dim(), sigma.dim())?;
    same_dim(rho_target.dim(), sigma_target.dim())?;
    let s0 = q_renyi_0(rho, sigma)?;
    let sinf = q_renyi_inf(rho_target, sigma_target)?;
    if !s0.is_finite() {
        return Err(Error::SupportViolation(
            "the first state is orthogonal to the reference".into(),
        ));
    }
    if sinf > s0 + SUFFICIENCY_TOL {
        return Ok(None);
    }
    let cw = (-s0).exp();
    let vectors = &rho.spectrum().vectors;
    let r = rho.rank();
    let inside = vectors.columns(0, r).into_owned();
    let outside = vectors.columns(r, rho.dim() - r).into_owned();
    if outside.ncols() == 0 || 1.0 - cw <= SUFFICIENCY_TOL {
        // sigma lives on the support of rho, so rho_target = sigma_target
        // and the remaining branch is never populated.
        let all = vectors.clone();
        return Ok(Some(measure_and_prepare(&[(all, rho_target)])));
    }
    let rest = (sigma_target.matrix() - rho_target.matrix() * c(cw)) / c(1.0 - cw);
    let rest = DensityMatrix::normalize(DensityMatrix::from_computed(rest).into_matrix())?;
    Ok(Some(measure_and_prepare(&[
        (inside, rho_target),
        (outside, &rest),
    ])))
}

/// System, clock and two-level work storage with
/// `H = H_S (x) |0><0| + H_S' (x) |1><1| + H_W`, `H_W = w |i><i| + 0 |f><f|`.
///
/// Tensor order is system, clock, work storage; the work basis is `(|i>, |f>)`.
#[derive(Clone, Debug)]
pub struct SCWComposite {
    pub spec_s: QGibbsSpec,
    pub spec_s_target: QGibbsSpec,
    pub w: f64,
    pub hamiltonian: CMatrix,
    pub gibbs: DensityMatrix,
}

fn projector(d: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(k, k)] = c(1.0);
    m
}

/// Numerically stable `(1 / (1 + e^{b - a}), 1 / (1 + e^{a - b}))`.
fn log_weights(a: f64, b: f64) -> (f64, f64) {
    let x = 1.0 / (1.0 + (b - a).exp());
    let y = 1.0 / (1.0 + (a - b).exp());
    (x, y)
}

impl SCWComposite {
    pub fn dim_s(&self) -> usize {
        self.spec_s.dim()
    }

    pub fn beta(&self) -> f64 {
        self.spec_s.beta()
    }

    /// Clock weights `Z_S / (Z_S + Z_S')` and `Z_S' / (Z_S + Z_S')`.
    pub fn clock_weights(&self) -> (f64, f64) {
        log_weights(self.spec_s.log_partition(), self.spec_s_target.log_partition())
    }

    pub fn log_partition_w(&self) -> f64 {
        let b = self.beta();
        let (x, y) = (-b * self.w, 0.0f64);
        x.max(y) + (1.0 + (-(x - y).abs()).exp()).ln()
    }

    pub fn spec(&self) -> Result<QGibbsSpec> {
        QGibbsSpec::new(self.hamiltonian.clone(), self.beta())
    }

    /// `rho_S (x) |0><0| (x) |i><i|`.
    pub fn initial_state(&self, rho_s: &DensityMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim_s(), rho_s.dim())?;
        Ok(rho_s
            .tensor(&DensityMatrix::from_diagonal(&[1.0, 0.0])?)
            .tensor(&DensityMatrix::from_diagonal(&[1.0, 0.0])?))
    }

    /// `rho_S' (x) |1><1| (x) |f><f|`.
    pub fn final_state(&self, rho_s_target: &DensityMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim_s(), rho_s_target.dim())?;
        Ok(rho_s_target
            .tensor(&DensityMatrix::from_diagonal(&[0.0, 1.0])?)
            .tensor(&DensityMatrix::from_diagonal(&[0.0, 1.0])?))
    }

    /// Embeds a state of system and work storage with the clock in `|clock>`.
    pub fn with_clock(&self, rho_sw: &DensityMatrix, clock: usize) -> Result<DensityMatrix> {
        same_dim(2 * self.dim_s(), rho_sw.dim())?;
        let d = self.dim_s();
        let mut out = CMatrix::zeros(4 * d, 4 * d);
        for a in 0..d {
            for b in 0..d {
                for x in 0..2 {
                    for y in 0..2 {
                        out[(4 * a + 2 * clock + x, 4 * b + 2 * clock + y)] =
                            rho_sw.matrix()[(2 * a + x, 2 * b + y)];
                    }
                }
            }
        }
        DensityMatrix::new(out)
    }

    /// Clock-1 part of the Gibbs state, `rho_S'^G (x) rho_W^G`, as a state on SW.
    pub fn gibbs_sw_target(&self) -> DensityMatrix {
        self.spec_s_target.state().tensor(&self.gibbs_w())
    }

    pub fn gibbs_w(&self) -> DensityMatrix {
        let b = self.beta();
        let (gi, gf) = log_weights(-b * self.w, 0.0);
        DensityMatrix::from_diagonal(&[gi, gf]).expect("two-level Gibbs state")
    }
}

/// Builds the composite for the system Hamiltonians before and after and the
/// work cost `w = E_i - E_f`.
pub fn build_scw(spec_s: &QGibbsSpec, spec_s_target: &QGibbsSpec, w: f64) -> Result<SCWComposite> {
    same_dim(spec_s.dim(), spec_s_target.dim())?;
    if spec_s.beta() != spec_s_target.beta() {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: spec_s_target.beta(),
            reason: "initial and final Hamiltonians must share the temperature",
        });
    }
    if !w.is_finite() {
        return Err(Error::InvalidParameter {
            name: "w",
            value: w,
            reason: "must be finite",
        });
    }
    let d = spec_s.dim();
    let id_s = CMatrix::identity(d, d);
    let id2 = CMatrix::identity(2, 2);
    let hw = {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(w);
        m
    };
    let hamiltonian = kron(&kron(spec_s.hamiltonian(), &projector(2, 0)), &id2)
        + kron(&kron(spec_s_target.hamiltonian(), &projector(2, 1)), &id2)
        + kron(&kron(&id_s, &id2), &hw);
    let mut scw = SCWComposite {
        spec_s: spec_s.clone(),
        spec_s_target: spec_s_target.clone(),
        w,
        hamiltonian,
        gibbs: DensityMatrix::maximally_mixed(1),
    };
    let (w0, w1) = scw.clock_weights();
    let gw = scw.gibbs_w();
    let sc = kron(&spec_s.state().into_matrix(), &projector(2, 0)) * c(w0)
        + kron(&spec_s_target.state().into_matrix(), &projector(2, 1)) * c(w1);
    scw.gibbs = DensityMatrix::new(kron(&sc, gw.matrix()))?;
    Ok(scw)
}

/// The three necessary conditions and the sufficient condition for a
/// work-assisted single-shot transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QWorkVerdict {
    pub necessary_alpha0: bool,
    pub necessary_alpha1: bool,
    pub necessary_alphainf: bool,
    pub sufficient: bool,
}

impl QWorkVerdict {
    pub fn all_necessary(&self) -> bool {
        self.necessary_alpha0 && self.necessary_alpha1 && self.necessary_alphainf
    }

    /// A sufficient verdict must come with all necessary ones.
    pub fn is_consistent(&self) -> bool {
        !self.sufficient || self.all_necessary()
    }
}

fn require_work_specs(spec: &QGibbsSpec, spec_target: &QGibbsSpec) -> Result<()> {
    if spec.beta() != spec_target.beta() {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: spec_target.beta(),
            reason: "initial and final Hamiltonians must share the temperature",
        });
    }
    if spec.beta() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: spec.beta(),
            reason: "must be positive",
        });
    }
    Ok(())
}

/// Compares `beta (w - dF)` with differences of `S_alpha(. || Gibbs)` at
/// `alpha = 0, 1, inf`, and with `S_inf(target) - S_0(source)`.
pub fn single_shot_work_verdict(
    rho: &DensityMatrix,
    rho_target: &DensityMatrix,
    spec: &QGibbsSpec,
    spec_target: &QGibbsSpec,
    w: f64,
) -> Result<QWorkVerdict> {
    same_dim(rho.dim(), spec.dim())?;
    same_dim(rho_target.dim(), spec_target.dim())?;
    require_work_specs(spec, spec_target)?;
    let beta = spec.beta();
    let (g, gt) = (spec.state(), spec_target.state());
    let lhs = beta * (w - (spec_target.free_energy()? - spec.free_energy()?));
    let src = [q_renyi_0(rho, &g)?, quantum_kl(rho, &g)?, q_renyi_inf(rho, &g)?];
    let dst = [
        q_renyi_0(rho_target, &gt)?,
        quantum_kl(rho_target, &gt)?,
        q_renyi_inf(rho_target, &gt)?,
    ];
    if src.iter().chain(&dst).any(|x| !x.is_finite()) {
        return Err(Error::SupportViolation(
            "a state is not supported on its Gibbs state".into(),
        ));
    }
    let scale = 1.0 + lhs.abs();
    let nec = |k: usize| lhs >= dst[k] - src[k] - NECESSARY_TOL * scale;
    Ok(QWorkVerdict {
        necessary_alpha0: nec(0),
        necessary_alpha1: nec(1),
        necessary_alphainf: nec(2),
        sufficient: lhs >= dst[2] - src[0] - SUFFICIENCY_TOL * scale,
    })
}

/// Non-equilibrium free energy `F + S_alpha(rho || rho^G) / beta` for
/// `alpha` in `{0, 1, inf}`.
pub fn alpha_free_energy_q(rho: &DensityMatrix, spec: &QGibbsSpec, alpha: f64) -> Result<f64> {
    same_dim(rho.dim(), spec.dim())?;
    if spec.beta() <= 0.0 {
        return Err(Error::UndefinedFreeEnergy);
    }
    let g = spec.state();
    let s = if alpha == 0.0 {
        q_renyi_0(rho, &g)?
    } else if alpha == 1.0 {
        quantum_kl(rho, &g)?
    } else if alpha == f64::INFINITY {
        q_renyi_inf(rho, &g)?
    } else {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "supported orders are 0, 1 and inf",
        });
    };
    Ok(spec.free_energy()? + s / spec.beta())
}

/// Bookkeeping of the average-work bound for one process on the composite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AverageWorkBalance {
    /// `tr[(rho_W - rho_W') H_W]`.
    pub work: f64,
    /// `beta (W - dF_S)`.
    pub lhs: f64,
    /// `S_1(rho_S' || rho_S'^G) - S_1(rho_S || rho_S^G)`.
    pub rhs: f64,
    /// `S_1(rho_W') - S_1(rho_W)`.
    pub work_entropy_change: f64,
    /// Weight left on the clock-0 sector by the process.
    pub clock_residual: f64,
}

impl AverageWorkBalance {
    /// `beta (W - dF_S) + dS_W >= dS_1`; the entropy term vanishes when the
    /// work storage keeps its entropy.
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs + self.work_entropy_change >= self.rhs - tol
    }
}

/// Reads the average work and the system divergences from a process
/// `rho_S (x) |0><0| (x) rho_W -> output` on the composite.
pub fn average_work_balance(
    scw: &SCWComposite,
    rho_s: &DensityMatrix,
    rho_w: &DensityMatrix,
    output: &DensityMatrix,
) -> Result<AverageWorkBalance> {
    let d = scw.dim_s();
    same_dim(d, rho_s.dim())?;
    same_dim(2, rho_w.dim())?;
    same_dim(4 * d, output.dim())?;
    let clock0 = kron(&kron(&CMatrix::identity(d, d), &projector(2, 0)), &CMatrix::identity(2, 2));
    let clock_residual = (output.matrix() * clock0).trace().re;
    let out_s = DensityMatrix::from_computed(partial_trace_matrix(output.matrix(), (d, 4), Keep::A)?);
    let out_w = DensityMatrix::from_computed(partial_trace_matrix(output.matrix(), (2 * d, 2), Keep::B)?);
    let hw = projector(2, 0) * c(scw.w);
    let work = trace_re(&((rho_w.matrix() - out_w.matrix()) * hw));
    let beta = scw.beta();
    let df = scw.spec_s_target.free_energy()? - scw.spec_s.free_energy()?;
    let rhs = quantum_kl(&out_s, &scw.spec_s_target.state())? - quantum_kl(rho_s, &scw.spec_s.state())?;
    Ok(AverageWorkBalance {
        work,
        lhs: beta * (work - df),
        rhs,
        work_entropy_change: von_neumann(&out_w) - von_neumann(rho_w),
        clock_residual,
    })
}
