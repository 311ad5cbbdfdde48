mod common;

use rand::Rng;

use common::rng;
use thermomaj::qdivergence::{
    petz_renyi, q_renyi_0, q_renyi_inf, quantum_kl, sandwiched_renyi, von_neumann,
};
use thermomaj::qmajorization::{q_dmaj_sufficient_witness, single_shot_work_verdict};
use thermomaj::quantum::{
    c, fidelity, ginibre, hermitian_eigen, hermitian_part, kron, partial_trace, partial_trace_matrix,
    random_channel, random_density, random_unital_channel, thermal_operation_channel, trace_distance_q,
    trace_re, CMatrix, DensityMatrix, Keep, QGibbsSpec, CHANNEL_TOL,
};

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_eig(m: &CMatrix) -> f64 {
    *hermitian_eigen(m).values.last().unwrap()
}

fn random_rank<R: Rng>(d: usize, rng: &mut R) -> DensityMatrix {
    let r = rng.random_range(1..=d);
    random_density(d, r, rng)
}

#[test]
fn channels_keep_states_valid() {
    let mut rng = rng(21);
    for _ in 0..1000 {
        let (d, d2) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let e = random_channel(d, d2, rng.random_range(1..=4), &mut rng);
        assert!(e.is_cptp(CHANNEL_TOL));
        let rho = random_rank(d, &mut rng);
        let out = e.apply_matrix(rho.matrix()).unwrap();
        assert!((trace_re(&out) - 1.0).abs() < 1e-12);
        assert!(min_eig(&out) > -1e-12);
        assert!(max_entry(&(&out - out.adjoint())) < 1e-12);
    }
}

#[test]
fn kraus_form_matches_dilation() {
    let mut rng = rng(22);
    for _ in 0..20 {
        let d = rng.random_range(2..=3);
        let energies: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        let spec = QGibbsSpec::from_energies(&energies, rng.random_range(0.3..2.0)).unwrap();
        // swap followed by evolution under the total Hamiltonian conserves energy
        let swap = CMatrix::from_fn(d * d, d * d, |i, j| c(((i / d == j % d) && (i % d == j / d)) as u8 as f64));
        let total: Vec<f64> = (0..d * d).map(|k| energies[k / d] + energies[k % d]).collect();
        let t = rng.random_range(0.0..6.0);
        let phase = CMatrix::from_fn(d * d, d * d, |i, j| {
            if i == j {
                thermomaj::quantum::C64::from_polar(1.0, -t * total[i])
            } else {
                c(0.0)
            }
        });
        let u = phase * swap;
        let e = thermal_operation_channel(&spec, &spec, &u).unwrap();
        let rho = random_rank(d, &mut rng);
        let joint = &u * kron(rho.matrix(), spec.state().matrix()) * u.adjoint();
        let direct = partial_trace_matrix(&joint, (d, d), Keep::A).unwrap();
        let kraus = e.apply(&rho).unwrap();
        assert!(max_entry(&(direct - kraus.matrix())) < 1e-9);
    }
}

#[test]
fn fidelity_and_trace_distance_are_monotone() {
    let mut rng = rng(23);
    for _ in 0..500 {
        let (d, d2) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let (rho, sigma) = (random_rank(d, &mut rng), random_rank(d, &mut rng));
        let e = random_channel(d, d2, rng.random_range(1..=3), &mut rng);
        let (er, es) = (e.apply(&rho).unwrap(), e.apply(&sigma).unwrap());
        let (f0, f1) = (fidelity(&rho, &sigma).unwrap(), fidelity(&er, &es).unwrap());
        assert!(f0 <= f1 + 1e-9, "{f0} {f1} ranks {} {} -> {} {}", rho.rank(), sigma.rank(), er.rank(), es.rank());
        assert!(trace_distance_q(&er, &es).unwrap() <= trace_distance_q(&rho, &sigma).unwrap() + 1e-9);
    }
}

#[test]
fn divergence_orderings() {
    let mut rng = rng(24);
    for _ in 0..500 {
        let d = rng.random_range(2..=4);
        let rho = random_rank(d, &mut rng);
        let sigma = random_density(d, d, &mut rng);
        let mut chain = vec![q_renyi_0(&rho, &sigma).unwrap()];
        for a in [0.5, 0.8] {
            chain.push(sandwiched_renyi(&rho, &sigma, a).unwrap());
        }
        chain.push(quantum_kl(&rho, &sigma).unwrap());
        for a in [1.5, 3.0] {
            chain.push(sandwiched_renyi(&rho, &sigma, a).unwrap());
        }
        chain.push(q_renyi_inf(&rho, &sigma).unwrap());
        for w in chain.windows(2) {
            assert!(w[0] <= w[1] + 1e-9, "{chain:?}");
        }
        // the sandwiched divergence never exceeds the Petz one
        for a in [0.6, 1.5, 2.0] {
            assert!(sandwiched_renyi(&rho, &sigma, a).unwrap() <= petz_renyi(&rho, &sigma, a).unwrap() + 1e-9);
        }
    }
}

#[test]
fn joint_convexity() {
    let mut rng = rng(25);
    for _ in 0..300 {
        let d = rng.random_range(2..=3);
        let k = rng.random_range(2..=4);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let rhos: Vec<DensityMatrix> = (0..k).map(|_| random_rank(d, &mut rng)).collect();
        let sigmas: Vec<DensityMatrix> = (0..k).map(|_| random_density(d, d, &mut rng)).collect();
        let mix = |v: &[DensityMatrix]| {
            let m = v.iter().zip(&w).fold(CMatrix::zeros(d, d), |acc, (s, x)| acc + s.matrix() * c(x / total));
            DensityMatrix::new(m).unwrap()
        };
        let (rho, sigma) = (mix(&rhos), mix(&sigmas));
        for f in [quantum_kl, q_renyi_0] {
            let avg: f64 = rhos
                .iter()
                .zip(&sigmas)
                .zip(&w)
                .map(|((r, s), x)| x / total * f(r, s).unwrap())
                .sum();
            assert!(f(&rho, &sigma).unwrap() <= avg + 1e-8);
        }
    }
}

#[test]
fn entropy_subadditivity() {
    let mut rng = rng(26);
    for _ in 0..300 {
        let rank = rng.random_range(1..=8);
        let abc = random_density(8, rank, &mut rng);
        let ab = partial_trace(&abc, (4, 2), Keep::A).unwrap();
        let bc = partial_trace(&abc, (2, 4), Keep::B).unwrap();
        let b = partial_trace(&ab, (2, 2), Keep::B).unwrap();
        let a = partial_trace(&ab, (2, 2), Keep::A).unwrap();
        let s = von_neumann;
        assert!(s(&ab) <= s(&a) + s(&b) + 1e-10);
        assert!(s(&abc) + s(&b) <= s(&ab) + s(&bc) + 1e-10);
    }
}

#[test]
fn kadison_inequality() {
    let mut rng = rng(27);
    for _ in 0..300 {
        let d = rng.random_range(2..=4);
        let e = random_unital_channel(d, rng.random_range(1..=4), &mut rng);
        let x = hermitian_part(&ginibre(d, d, &mut rng));
        let ex = e.apply_matrix(&x).unwrap();
        let gap = e.apply_matrix(&(&x * &x)).unwrap() - &ex * &ex;
        assert!(min_eig(&hermitian_part(&gap)) >= -1e-8);
    }
}

#[test]
fn unital_channels_induce_doubly_stochastic_matrices() {
    let mut rng = rng(28);
    for _ in 0..200 {
        let d = rng.random_range(2..=4);
        let e = random_unital_channel(d, rng.random_range(1..=4), &mut rng);
        let (rho, rho2) = (random_density(d, d, &mut rng), random_density(d, d, &mut rng));
        let (phi, phi2) = (&rho.spectrum().vectors, &rho2.spectrum().vectors);
        // T_ji = <phi'_j| E(|phi_i><phi_i|) |phi'_j>
        let mut t = vec![vec![0.0; d]; d];
        for i in 0..d {
            let ket = phi.column(i);
            let out = e.apply_matrix(&(&ket * ket.adjoint())).unwrap();
            for (j, row) in t.iter_mut().enumerate() {
                let v = phi2.column(j);
                row[i] = (v.adjoint() * &out * v)[(0, 0)].re;
            }
        }
        for k in 0..d {
            let row: f64 = t[k].iter().sum();
            let col: f64 = t.iter().map(|r| r[k]).sum();
            assert!((row - 1.0).abs() < 1e-10 && (col - 1.0).abs() < 1e-10);
            assert!(t[k].iter().all(|x| *x >= -1e-12));
        }
    }
}

#[test]
fn measure_and_prepare_hits_both_targets() {
    let mut rng = rng(29);
    let mut built = 0;
    for _ in 0..500 {
        let (d, d2) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let rho = random_rank(d, &mut rng);
        let sigma = random_density(d, d, &mut rng);
        let sigma_t = random_density(d2, d2, &mut rng);
        // a target no more distinguishable than allowed by S_0
        let s0 = q_renyi_0(&rho, &sigma).unwrap();
        let lam = rng.random_range(0.0..1.0) * (-s0).exp().min(1.0);
        let junk = random_density(d2, d2, &mut rng);
        let rho_t = DensityMatrix::new(sigma_t.matrix() * c(1.0 - lam) + junk.matrix() * c(lam)).unwrap();
        let Some(e) = q_dmaj_sufficient_witness(&rho, &sigma, &rho_t, &sigma_t).unwrap() else {
            continue;
        };
        built += 1;
        assert!(e.is_cptp(1e-8));
        assert!(max_entry(&(e.apply(&rho).unwrap().matrix() - rho_t.matrix())) < 1e-8);
        assert!(max_entry(&(e.apply(&sigma).unwrap().matrix() - sigma_t.matrix())) < 1e-8);
    }
    assert!(built > 100, "{built}");
}

#[test]
fn work_verdicts_are_monotone_in_w() {
    let mut rng = rng(30);
    for _ in 0..200 {
        let d = rng.random_range(2..=3);
        let beta = rng.random_range(0.3..2.0);
        let s = QGibbsSpec::new(hermitian_part(&ginibre(d, d, &mut rng)), beta).unwrap();
        let st = QGibbsSpec::new(hermitian_part(&ginibre(d, d, &mut rng)), beta).unwrap();
        let (rho, rho_t) = (random_rank(d, &mut rng), random_rank(d, &mut rng));
        let mut prev: Option<[bool; 4]> = None;
        for k in 0..=80 {
            let w = -20.0 + k as f64;
            let v = single_shot_work_verdict(&rho, &rho_t, &s, &st, w).unwrap();
            let now = [v.necessary_alpha0, v.necessary_alpha1, v.necessary_alphainf, v.sufficient];
            if let Some(p) = prev {
                for (a, b) in p.iter().zip(&now) {
                    assert!(!a || *b, "verdict flipped back at w = {w}");
                }
            }
            prev = Some(now);
        }
        assert!(prev.unwrap().iter().all(|x| *x));
    }
}
