//! `thermomaj` command-line front end.
//!
//! Stochastic matrices are column-stochastic: `T[i][j]` is the probability of
//! moving from state `j` to state `i`, so every column sums to one.
//!
//! Exit codes: 0 success, 1 mathematically negative answer (for example "not
//! majorized"), 2 bad input. Results go to stdout as one JSON document; input
//! errors are reported there as `{"error": {"code", "message"}}`.

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use thermomaj::catalysis::{
    correlated_catalysis_conditions, d_trump_conditions, default_alpha_grid, trump_exact_conditions,
    verify_catalyst,
};
use thermomaj::divergence::{f_divergence, kl_divergence, renyi_divergence, ConvexFnSpec};
use thermomaj::majorization::{
    birkhoff_decompose, d_majorization_shortfall, lorenz, lorenz_relative, majorization_violation,
    witness_d_stochastic, witness_doubly_stochastic,
};
use thermomaj::qdivergence::{petz_renyi, q_renyi_0, q_renyi_inf, quantum_kl, sandwiched_renyi};
use thermomaj::qmajorization::{
    mixture_of_unitaries_witness, q_dmaj_sufficient_witness, q_majorization_witness, q_majorizes, single_shot_work_verdict,
};
use thermomaj::quantum::{
    hermitian_eigen, matrix_from_rows, matrix_to_rows, random_density, trace_re, DensityMatrix, QGibbsSpec,
    QuantumChannel, CHANNEL_TOL,
};
use thermomaj::smoothing::{
    sh_classical, sh_classical_iid, sh_quantum, smooth_quantum_bounds, smooth_r0_classical, smooth_rinf_classical,
    stein_sweep_classical, stein_sweep_quantum,
};
use thermomaj::thermo::{noneq_free_energy, quasi_static_protocol, simulate_protocol, w_assisted_transformable, Protocol};
use thermomaj::{GibbsSpec, ProbVec};

use io::{load, write_csv, CliError, CliResult, Outcome};

const MAX_N_CLASSICAL: usize = 1_000_000;
const MAX_N_QUANTUM: usize = 12;
const MAX_SAMPLES: usize = 1_000_000;
const MAX_PROTOCOL_STEPS: usize = 100_000;

#[derive(Parser)]
#[command(name = "thermomaj", version, about = "Majorization, divergences and single-shot thermodynamics")]
struct Cli {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Majorization of probability vectors.
    Majorize {
        #[arg(value_enum)]
        action: Action,
        #[command(flatten)]
        pair: Pair,
        /// Also decompose the witness into permutations.
        #[arg(long)]
        birkhoff: bool,
    },
    /// Relative majorization of pairs `(p, q)` over `(p', q')`.
    Dmajorize {
        #[arg(value_enum)]
        action: Action,
        #[command(flatten)]
        quad: Quad,
    },
    /// Lorenz curve of `p`, or relative Lorenz curve of `(p, q)`.
    Lorenz {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: Option<PathBuf>,
        /// Write `x,y` rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Classical divergence: Renyi of order `--alpha` or a named f-divergence.
    Div {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_parser = non_negative, conflicts_with = "f", required_unless_present = "f")]
        alpha: Option<f64>,
        /// One of klf, tv, hellinger, chi2, alpha:A.
        #[arg(long)]
        f: Option<String>,
    },
    /// Quantum divergence.
    Qdiv {
        /// One of kl, r0, rinf, petz:A, sandwich:A.
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        states: States,
    },
    /// Catalytic transformation conditions.
    Catalysis {
        #[arg(value_enum)]
        mode: CatalysisMode,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        ptarget: PathBuf,
        /// Reference distributions, required for `dtrump`.
        #[arg(long)]
        q: Option<PathBuf>,
        #[arg(long)]
        qtarget: Option<PathBuf>,
        /// A candidate catalyst to verify exactly.
        #[arg(long)]
        catalyst: Option<PathBuf>,
    },
    /// Classical thermodynamic protocols and work bounds.
    Thermo {
        #[command(subcommand)]
        command: ThermoCommand,
    },
    /// Quantum single-shot work.
    Qwork {
        #[command(subcommand)]
        command: QworkCommand,
    },
    /// Hypothesis-testing divergence `S_H^eta`.
    Sh {
        #[arg(long, value_parser = open_unit)]
        eta: f64,
        #[command(flatten)]
        input: ClassicalOrQuantum,
        /// Number of i.i.d. copies (classical input only).
        #[arg(long, value_parser = n_classical)]
        n: Option<usize>,
    },
    /// Smoothed min- and max-divergences.
    Smooth {
        #[arg(long, value_parser = unit_right_open)]
        eps: f64,
        #[arg(long, value_enum)]
        which: Which,
        #[command(flatten)]
        input: ClassicalOrQuantum,
    },
    /// Finite-n rates `S_H^eta(n)/n` against the relative entropy rate.
    Stein {
        #[arg(long, value_parser = open_unit, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, value_parser = n_classical)]
        n_max: usize,
        #[command(flatten)]
        input: ClassicalOrQuantum,
        /// Write `n,rate,target` rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Quantum transformation witnesses.
    Witness {
        #[arg(value_enum)]
        kind: WitnessKind,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long = "rhoT")]
        rho_target: PathBuf,
        /// Reference states, required for `dmaj`.
        #[arg(long)]
        sigma: Option<PathBuf>,
        #[arg(long = "sigmaT")]
        sigma_target: Option<PathBuf>,
    },
    /// Structural checks of a channel given by Kraus operators.
    ChannelCheck {
        #[arg(long)]
        channel: PathBuf,
        /// Hamiltonian whose Gibbs state should be preserved.
        #[arg(long = "H", requires = "beta")]
        hamiltonian: Option<PathBuf>,
        #[arg(long, value_parser = positive_finite)]
        beta: Option<f64>,
        /// Random input states to push through the channel.
        #[arg(long, value_parser = sample_count, requires = "seed")]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ThermoCommand {
    /// Run a protocol file `{"beta", "steps", "p0", "energies"}`.
    Protocol {
        #[arg(long)]
        spec: PathBuf,
        /// Write the state after every step here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Quasi-static protocol between two Gibbs specs, started in equilibrium.
    Quasistatic {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long, value_parser = protocol_steps)]
        steps: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Minimal work done on the system for a single-shot task.
    Workbound {
        #[arg(long, value_enum)]
        case: WorkCase,
        #[arg(long)]
        gibbs: PathBuf,
        /// The non-equilibrium state (formation and extraction).
        #[arg(long)]
        p: Option<PathBuf>,
        /// Final Gibbs spec (equilibrium).
        #[arg(long)]
        gibbs_target: Option<PathBuf>,
        /// Also decide whether this much work suffices.
        #[arg(long, value_parser = finite, allow_negative_numbers = true)]
        w: Option<f64>,
    },
}

#[derive(Subcommand)]
enum QworkCommand {
    Verdict {
        #[arg(long)]
        rho: PathBuf,
        #[arg(long = "rhoT")]
        rho_target: PathBuf,
        #[arg(long = "H")]
        hamiltonian: PathBuf,
        #[arg(long = "HT")]
        hamiltonian_target: PathBuf,
        #[arg(long, value_parser = positive_finite)]
        beta: f64,
        #[arg(long, value_parser = finite, allow_negative_numbers = true)]
        w: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Action {
    Check,
    Witness,
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalysisMode {
    Trump,
    Dtrump,
    Correlated,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkCase {
    Formation,
    Extraction,
    Equilibrium,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    R0,
    Rinf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WitnessKind {
    /// Unital channel for quantum majorization.
    Channel,
    /// Mixture of unitaries for quantum majorization.
    Unitary,
    /// Measure-and-prepare channel for a pair of pairs.
    Dmaj,
}

#[derive(Args)]
struct Pair {
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
}

#[derive(Args)]
struct Quad {
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
    #[arg(long)]
    pt: PathBuf,
    #[arg(long)]
    qt: PathBuf,
}

#[derive(Args)]
struct States {
    #[arg(long)]
    rho: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
}

#[derive(Args)]
struct ClassicalOrQuantum {
    #[arg(long, requires = "q", conflicts_with_all = ["rho", "sigma"], required_unless_present = "rho")]
    p: Option<PathBuf>,
    #[arg(long, requires = "p")]
    q: Option<PathBuf>,
    #[arg(long, requires = "sigma")]
    rho: Option<PathBuf>,
    #[arg(long, requires = "rho")]
    sigma: Option<PathBuf>,
}

enum Input {
    Classical(ProbVec, ProbVec),
    Quantum(DensityMatrix, DensityMatrix),
}

impl ClassicalOrQuantum {
    fn load(&self) -> CliResult<Input> {
        match (&self.p, &self.q, &self.rho, &self.sigma) {
            (Some(p), Some(q), None, None) => Ok(Input::Classical(load(p)?, load(q)?)),
            (None, None, Some(r), Some(s)) => Ok(Input::Quantum(load(r)?, load(s)?)),
            _ => Err(CliError::new("usage", "give either --p and --q or --rho and --sigma")),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn finite(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive_finite(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

/// Renyi orders: `0 <= alpha`, where `inf` is allowed.
fn non_negative(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err("must be non-negative".into())
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn unit_right_open(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if (0.0..1.0).contains(&x) {
        Ok(x)
    } else {
        Err("must lie in [0, 1)".into())
    }
}

fn bounded_count(s: &str, max: usize) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))?;
    if (1..=max).contains(&n) {
        Ok(n)
    } else {
        Err(format!("must lie in [1, {max}]"))
    }
}

fn n_classical(s: &str) -> Result<usize, String> {
    bounded_count(s, MAX_N_CLASSICAL)
}

fn sample_count(s: &str) -> Result<usize, String> {
    bounded_count(s, MAX_SAMPLES)
}

fn protocol_steps(s: &str) -> Result<usize, String> {
    bounded_count(s, MAX_PROTOCOL_STEPS)
}

fn load_hamiltonian(path: &Path, beta: f64) -> CliResult<QGibbsSpec> {
    let rows: Vec<Vec<[f64; 2]>> = load(path)?;
    Ok(QGibbsSpec::new(matrix_from_rows(&rows)?, beta)?)
}

fn required<'a>(opt: &'a Option<PathBuf>, flag: &str, context: &str) -> CliResult<&'a PathBuf> {
    opt.as_ref()
        .ok_or_else(|| CliError::new("usage", format!("--{flag} is required for {context}")))
}

fn majorize(action: Action, pair: &Pair, birkhoff: bool) -> CliResult<Outcome> {
    let (p, q): (ProbVec, ProbVec) = (load(&pair.p)?, load(&pair.q)?);
    let violated = majorization_violation(&p, &q);
    match (action, violated) {
        (Action::Check, v) | (Action::Witness, v @ Some(_)) => {
            Outcome::verdict(json!({ "majorizes": v.is_none(), "violated_k": v }), v.is_none())
        }
        (Action::Witness, None) => {
            let report = witness_doubly_stochastic(&p, &q)?;
            let mut value = serde_json::to_value(&report).map_err(|e| CliError::new("serialization", e.to_string()))?;
            if birkhoff {
                let terms: Vec<_> = birkhoff_decompose(&report.matrix)?
                    .into_iter()
                    .map(|(perm, w)| json!({ "weight": w, "image": perm.as_slice() }))
                    .collect();
                value["birkhoff"] = json!(terms);
            }
            Outcome::ok(value)
        }
    }
}

fn dmajorize(action: Action, quad: &Quad) -> CliResult<Outcome> {
    let p: ProbVec = load(&quad.p)?;
    let q: ProbVec = load(&quad.q)?;
    let pt: ProbVec = load(&quad.pt)?;
    let qt: ProbVec = load(&quad.qt)?;
    let shortfall = d_majorization_shortfall((&p, &q), (&pt, &qt))?;
    if let Some((at_x, gap)) = shortfall {
        return Outcome::verdict(json!({ "d_majorizes": false, "at_x": at_x, "gap": gap }), false);
    }
    match action {
        Action::Check => Outcome::ok(json!({ "d_majorizes": true })),
        Action::Witness => Outcome::ok(witness_d_stochastic(&p, &q, &pt, &qt)?),
    }
}

fn lorenz_cmd(p: &Path, q: Option<&PathBuf>, csv: Option<&PathBuf>) -> CliResult<Outcome> {
    let p: ProbVec = load(p)?;
    let curve = match q {
        Some(q) => lorenz_relative(&p, &load(q)?)?,
        None => lorenz(&p),
    };
    if let Some(path) = csv {
        write_csv(path, &["x".into(), "y".into()], curve.points.iter().copied())?;
    }
    Outcome::ok(&curve)
}

fn div(pair: &Pair, alpha: Option<f64>, f: Option<&str>) -> CliResult<Outcome> {
    let (p, q): (ProbVec, ProbVec) = (load(&pair.p)?, load(&pair.q)?);
    let value = match (alpha, f) {
        (Some(a), _) if a == 1.0 => kl_divergence(&p, &q)?,
        (Some(a), _) => renyi_divergence(&p, &q, a)?,
        (None, Some(name)) => f_divergence(&p, &q, &ConvexFnSpec::by_name(name)?)?,
        (None, None) => return Err(CliError::new("usage", "give --alpha or --f")),
    };
    Outcome::ok(json!({ "value": value }))
}

fn qdiv(kind: &str, states: &States) -> CliResult<Outcome> {
    let rho: DensityMatrix = load(&states.rho)?;
    let sigma: DensityMatrix = load(&states.sigma)?;
    let order = |s: &str| -> CliResult<f64> {
        non_negative(s)
            .ok()
            .filter(|a| a.is_finite() && *a > 0.0)
            .ok_or_else(|| CliError::new("invalid_parameter", format!("bad order in '{kind}'")))
    };
    let value = match kind {
        "kl" => quantum_kl(&rho, &sigma)?,
        "r0" => q_renyi_0(&rho, &sigma)?,
        "rinf" => q_renyi_inf(&rho, &sigma)?,
        _ => {
            if let Some(a) = kind.strip_prefix("petz:") {
                petz_renyi(&rho, &sigma, order(a)?)?
            } else if let Some(a) = kind.strip_prefix("sandwich:") {
                sandwiched_renyi(&rho, &sigma, order(a)?)?
            } else {
                return Err(CliError::new("invalid_parameter", format!("unknown kind '{kind}'")));
            }
        }
    };
    Outcome::ok(json!({ "value": value }))
}

fn catalysis(
    mode: CatalysisMode,
    p: &Path,
    ptarget: &Path,
    q: &Option<PathBuf>,
    qtarget: &Option<PathBuf>,
    catalyst: &Option<PathBuf>,
) -> CliResult<Outcome> {
    let (p, pt): (ProbVec, ProbVec) = (load(p)?, load(ptarget)?);
    if let Some(r) = catalyst {
        let r: ProbVec = load(r)?;
        let ok = verify_catalyst(&p, &pt, &r);
        return Outcome::verdict(json!({ "catalyst_works": ok }), ok);
    }
    let grid = default_alpha_grid();
    let verdict = match mode {
        CatalysisMode::Trump => trump_exact_conditions(&p, &pt, &grid)?,
        CatalysisMode::Correlated => correlated_catalysis_conditions(&p, &pt)?,
        CatalysisMode::Dtrump => {
            let q: ProbVec = load(required(q, "q", "dtrump")?)?;
            let qt: ProbVec = load(required(qtarget, "qtarget", "dtrump")?)?;
            d_trump_conditions(&p, &q, &pt, &qt, &grid)?
        }
    };
    let ok = verdict.satisfied;
    Outcome::verdict(verdict, ok)
}

#[derive(Deserialize)]
struct ProtocolFile {
    #[serde(flatten)]
    protocol: Protocol,
    p0: ProbVec,
    energies: Vec<f64>,
}

fn trajectory_csv(path: &PathBuf, trajectory: &[ProbVec]) -> CliResult<()> {
    let d = trajectory.first().map_or(0, |p| p.dim());
    let mut header = vec!["step".to_string()];
    header.extend((0..d).map(|i| format!("p{i}")));
    let rows = trajectory.iter().enumerate().map(|(k, p)| {
        let mut row = vec![k as f64];
        row.extend(p.iter());
        row
    });
    write_csv(path, &header, rows)
}

fn thermo(cmd: &ThermoCommand) -> CliResult<Outcome> {
    match cmd {
        ThermoCommand::Protocol { spec, csv } => {
            let file: ProtocolFile = load(spec)?;
            let report = simulate_protocol(&file.protocol, &file.p0, &file.energies)?;
            if let Some(path) = csv {
                trajectory_csv(path, &report.trajectory)?;
            }
            Outcome::ok(&report)
        }
        ThermoCommand::Quasistatic { from, to, steps, csv } => {
            let (g0, g1): (GibbsSpec, GibbsSpec) = (load(from)?, load(to)?);
            if g0.beta() != g1.beta() {
                return Err(CliError::new("invalid_parameter", "both specs must share beta"));
            }
            let protocol = quasi_static_protocol(g0.energies(), g1.energies(), g0.beta(), *steps)?;
            let report = simulate_protocol(&protocol, &g0.state(), g0.energies())?;
            if let Some(path) = csv {
                trajectory_csv(path, &report.trajectory)?;
            }
            let delta_f = g1.free_energy()? - g0.free_energy()?;
            Outcome::ok(json!({ "protocol": protocol, "report": report, "delta_F": delta_f }))
        }
        ThermoCommand::Workbound {
            case,
            gibbs,
            p,
            gibbs_target,
            w,
        } => {
            let g: GibbsSpec = load(gibbs)?;
            let f = g.free_energy()?;
            let (name, bound, source, target, g_target) = match case {
                WorkCase::Formation => {
                    let p: ProbVec = load(required(p, "p", "formation")?)?;
                    let bound = noneq_free_energy(&p, &g, f64::INFINITY)? - f;
                    ("formation", bound, g.state(), p, g.clone())
                }
                WorkCase::Extraction => {
                    let p: ProbVec = load(required(p, "p", "extraction")?)?;
                    let bound = f - noneq_free_energy(&p, &g, 0.0)?;
                    ("extraction", bound, p, g.state(), g.clone())
                }
                WorkCase::Equilibrium => {
                    let gt: GibbsSpec = load(required(gibbs_target, "gibbs-target", "equilibrium")?)?;
                    let bound = gt.free_energy()? - f;
                    ("equilibrium", bound, g.state(), gt.state(), gt)
                }
            };
            match w {
                None => Outcome::ok(json!({ "case": name, "bound": bound })),
                Some(w) => {
                    let v = w_assisted_transformable(&source, &target, &g, &g_target, *w)?;
                    Outcome::verdict(
                        json!({ "case": name, "bound": bound, "w": w, "verdict": v }),
                        v.transformable,
                    )
                }
            }
        }
    }
}

fn qwork(cmd: &QworkCommand) -> CliResult<Outcome> {
    let QworkCommand::Verdict {
        rho,
        rho_target,
        hamiltonian,
        hamiltonian_target,
        beta,
        w,
    } = cmd;
    let rho: DensityMatrix = load(rho)?;
    let rho_t: DensityMatrix = load(rho_target)?;
    let spec = load_hamiltonian(hamiltonian, *beta)?;
    let spec_t = load_hamiltonian(hamiltonian_target, *beta)?;
    let v = single_shot_work_verdict(&rho, &rho_t, &spec, &spec_t, *w)?;
    // failing a necessary condition rules the transformation out
    Outcome::verdict(v, v.all_necessary())
}

fn sh(eta: f64, input: &ClassicalOrQuantum, n: Option<usize>) -> CliResult<Outcome> {
    match (input.load()?, n) {
        (Input::Classical(p, q), None) => Outcome::ok(json!({ "value": sh_classical(&p, &q, eta)? })),
        (Input::Classical(p, q), Some(n)) => {
            Outcome::ok(json!({ "value": sh_classical_iid(&p, &q, eta, n)?, "n": n }))
        }
        (Input::Quantum(..), Some(_)) => Err(CliError::new("usage", "--n applies to classical input only")),
        (Input::Quantum(rho, sigma), None) => {
            let r = sh_quantum(&rho, &sigma, eta)?;
            Outcome::ok(json!({
                "value": r.value,
                "primal": r.primal,
                "dual": r.dual,
                "gap": r.gap,
                "test": matrix_to_rows(&r.test),
            }))
        }
    }
}

fn smooth(eps: f64, which: Which, input: &ClassicalOrQuantum) -> CliResult<Outcome> {
    match input.load()? {
        Input::Classical(p, q) => match which {
            Which::R0 => Outcome::ok(smooth_r0_classical(&p, &q, eps)?),
            Which::Rinf => Outcome::ok(json!({ "value": smooth_rinf_classical(&p, &q, eps)?, "exact": true })),
        },
        Input::Quantum(rho, sigma) => {
            let b = smooth_quantum_bounds(&rho, &sigma, eps)?;
            let (lo, hi) = match which {
                Which::R0 => (b.r0_lo, b.r0_hi),
                Which::Rinf => (b.rinf_lo, b.rinf_hi),
            };
            Outcome::ok(json!({ "lower": lo, "upper": hi }))
        }
    }
}

fn stein(eta: f64, n_max: usize, input: &ClassicalOrQuantum, csv: Option<&PathBuf>) -> CliResult<Outcome> {
    let sweep = match input.load()? {
        Input::Classical(p, q) => stein_sweep_classical(&p, &q, eta, n_max)?,
        Input::Quantum(rho, sigma) => {
            if n_max > MAX_N_QUANTUM {
                return Err(CliError::new(
                    "invalid_parameter",
                    format!("--n-max must be at most {MAX_N_QUANTUM} for quantum input"),
                ));
            }
            stein_sweep_quantum(&rho, &sigma, eta, n_max)?
        }
    };
    if let Some(path) = csv {
        let rows = sweep
            .n_values
            .iter()
            .zip(&sweep.rates)
            .map(|(&n, &r)| (n, r, sweep.target));
        write_csv(path, &["n".into(), "rate".into(), "target".into()], rows)?;
    }
    Outcome::ok(&sweep)
}

fn witness(
    kind: WitnessKind,
    rho: &Path,
    rho_target: &Path,
    sigma: &Option<PathBuf>,
    sigma_target: &Option<PathBuf>,
) -> CliResult<Outcome> {
    let rho: DensityMatrix = load(rho)?;
    let rho_t: DensityMatrix = load(rho_target)?;
    if matches!(kind, WitnessKind::Channel | WitnessKind::Unitary) && !q_majorizes(&rho, &rho_t)? {
        let v = majorization_violation(&rho.spectrum_probvec()?, &rho_t.spectrum_probvec()?);
        return Outcome::verdict(json!({ "majorizes": false, "violated_k": v }), false);
    }
    match kind {
        WitnessKind::Channel => Outcome::ok(json!({ "channel": q_majorization_witness(&rho, &rho_t)? })),
        WitnessKind::Unitary => {
            let terms: Vec<_> = mixture_of_unitaries_witness(&rho, &rho_t)?
                .into_iter()
                .map(|(w, u)| json!({ "weight": w, "unitary": matrix_to_rows(&u) }))
                .collect();
            Outcome::ok(json!({ "mixture": terms }))
        }
        WitnessKind::Dmaj => {
            let sigma: DensityMatrix = load(required(sigma, "sigma", "dmaj")?)?;
            let sigma_t: DensityMatrix = load(required(sigma_target, "sigmaT", "dmaj")?)?;
            match q_dmaj_sufficient_witness(&rho, &sigma, &rho_t, &sigma_t)? {
                Some(ch) => Outcome::ok(json!({ "sufficient": true, "channel": ch })),
                None => Outcome::verdict(json!({ "sufficient": false }), false),
            }
        }
    }
}

fn channel_check(
    channel: &Path,
    hamiltonian: &Option<PathBuf>,
    beta: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> CliResult<Outcome> {
    let ch: QuantumChannel = load(channel)?;
    let cptp = ch.is_cptp(CHANNEL_TOL);
    let mut value = json!({
        "dim_in": ch.dim_in(),
        "dim_out": ch.dim_out(),
        "kraus_count": ch.kraus().len(),
        "cptp": cptp,
        "unital": ch.dim_in() == ch.dim_out() && ch.is_unital(CHANNEL_TOL),
    });
    if let (Some(path), Some(beta)) = (hamiltonian, beta) {
        let spec = load_hamiltonian(path, beta)?;
        value["gibbs_preserving"] = json!(ch.is_gibbs_preserving(&spec, CHANNEL_TOL));
    }
    if let (Some(count), Some(seed)) = (samples, seed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = ch.dim_in();
        let (mut min_eig, mut max_trace_err) = (f64::INFINITY, 0.0f64);
        for k in 0..count {
            let rho = random_density(d, 1 + k % d, &mut rng);
            let out = ch.apply_matrix(rho.matrix())?;
            min_eig = min_eig.min(*hermitian_eigen(&out).values.last().expect("non-empty"));
            max_trace_err = max_trace_err.max((trace_re(&out) - 1.0).abs());
        }
        value["samples"] = json!({ "count": count, "seed": seed, "min_eigenvalue": min_eig, "max_trace_error": max_trace_err });
    }
    Outcome::verdict(value, cptp)
}

fn dispatch(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Majorize { action, pair, birkhoff } => majorize(*action, pair, *birkhoff),
        Command::Dmajorize { action, quad } => dmajorize(*action, quad),
        Command::Lorenz { p, q, csv } => lorenz_cmd(p, q.as_ref(), csv.as_ref()),
        Command::Div { pair, alpha, f } => div(pair, *alpha, f.as_deref()),
        Command::Qdiv { kind, states } => qdiv(kind, states),
        Command::Catalysis {
            mode,
            p,
            ptarget,
            q,
            qtarget,
            catalyst,
        } => catalysis(*mode, p, ptarget, q, qtarget, catalyst),
        Command::Thermo { command } => thermo(command),
        Command::Qwork { command } => qwork(command),
        Command::Sh { eta, input, n } => sh(*eta, input, *n),
        Command::Smooth { eps, which, input } => smooth(*eps, *which, input),
        Command::Stein { eta, n_max, input, csv } => stein(*eta, *n_max, input, csv.as_ref()),
        Command::Witness {
            kind,
            rho,
            rho_target,
            sigma,
            sigma_target,
        } => witness(*kind, rho, rho_target, sigma, sigma_target),
        Command::ChannelCheck {
            channel,
            hamiltonian,
            beta,
            samples,
            seed,
        } => channel_check(channel, hamiltonian, *beta, *samples, *seed),
    }
}

fn emit(value: &serde_json::Value, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = value.to_string();
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let summary: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let summary = summary.join(" ");
            println!("{}", CliError::new("usage", summary.trim_start_matches("error: ")).to_json());
            return ExitCode::from(2);
        }
    };
    let result = dispatch(&cli.command).and_then(|o| emit(&o.value, cli.out.as_ref()).map(|_| o.negative));
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
