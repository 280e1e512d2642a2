//! Layered ansatz programs for the xy, xy_cd, grover and penalty methods,
//! the variational loop over them, and the comparison metrics.
//!
//! Each layer applies the cost phase first, then the mixer, then (xy_cd)
//! the counterdiabatic generators. Parameter slots within a layer are
//! ordered γ, β, then the η slots.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::agp::{agp_schedule, generate_pool, AgpSolve, OperatorPool, DEFAULT_MAX_WEIGHT};
use crate::error::{check_dims, Error, Result};
use crate::optimizer::{nelder_mead, NelderMeadOptions};
use crate::pauli::{Pauli, PauliSum};
use crate::portfolio::{
    default_penalty, exact_extrema, to_ising, to_penalty_ising, Bitstring, Extrema, IsingModel,
    PortfolioInstance,
};
use crate::statevector::{DiagonalCost, ExpKernel, QuantumState, Topology};

pub const EVALS_PER_PARAMETER: usize = 200;
pub const DEFAULT_RESTARTS: usize = 3;
pub const RAMP_SCALE: f64 = 0.6;
pub const DEFAULT_CVAR_ALPHA: f64 = 1.0;
/// Half-width of the uniform kick applied to restart points after the first.
pub const RESTART_SPREAD: f64 = 0.2;
/// Shots drawn from the final state when picking the best sampled bitstring.
pub const FINAL_SHOTS: usize = 1024;

const R_RANGE_TOL: f64 = 1e-9;

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Parse(format!(
                        concat!("unknown ", stringify!($name), " '{}'"), other
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Xy,
    XyCd,
    Grover,
    Penalty,
}

string_enum!(Method { Xy => "xy", XyCd => "xy_cd", Grover => "grover", Penalty => "penalty" });

impl Method {
    pub const ALL: [Method; 4] = [Method::Xy, Method::XyCd, Method::Grover, Method::Penalty];

    fn uses_topology(self) -> bool {
        matches!(self, Method::Xy | Method::XyCd)
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdMode {
    /// One η per layer multiplying every generator, each scaled by its
    /// relative gauge-potential coefficient.
    #[default]
    SingleEtaPerLayer,
    EtaPerGenerator,
}

string_enum!(CdMode {
    SingleEtaPerLayer => "single_eta_per_layer",
    EtaPerGenerator => "eta_per_generator",
});

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    LinearRamp,
    AgpSeeded,
    Random,
}

string_enum!(InitStrategy {
    LinearRamp => "linear_ramp",
    AgpSeeded => "agp_seeded",
    Random => "random",
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub method: Method,
    pub p: usize,
    /// Required by xy and xy_cd, absent otherwise.
    pub topology: Option<Topology>,
    pub cvar_alpha: f64,
    /// Required by xy_cd, absent otherwise.
    pub cd_mode: Option<CdMode>,
    pub init_strategy: InitStrategy,
    /// Evaluations per start; `None` means 200 per parameter.
    pub max_evals: Option<usize>,
    /// Number of optimizer starts, including the first.
    pub restarts: usize,
    /// Only for penalty; `None` there selects [`default_penalty`].
    pub penalty_alpha: Option<f64>,
    /// Pauli-weight cap of the counterdiabatic pool (xy_cd).
    pub max_weight: u32,
    pub seed: u64,
}

impl AnsatzConfig {
    /// Defaults for `method`: ring topology for the XY methods, one η per
    /// layer for xy_cd, linear-ramp start, three starts.
    pub fn new(method: Method, p: usize) -> Self {
        Self {
            method,
            p,
            topology: method.uses_topology().then_some(Topology::Ring),
            cvar_alpha: DEFAULT_CVAR_ALPHA,
            cd_mode: (method == Method::XyCd).then(CdMode::default),
            init_strategy: InitStrategy::default(),
            max_evals: None,
            restarts: DEFAULT_RESTARTS,
            penalty_alpha: None,
            max_weight: DEFAULT_MAX_WEIGHT,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.p == 0 {
            return bad("depth p must be positive".into());
        }
        if !(self.cvar_alpha > 0.0 && self.cvar_alpha <= 1.0) {
            return bad(format!("cvar_alpha {} not in (0, 1]", self.cvar_alpha));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        let m = self.method;
        if m.uses_topology() != self.topology.is_some() {
            return bad(if m.uses_topology() {
                format!("{m} needs a topology")
            } else {
                format!("topology does not apply to {m}")
            });
        }
        if (m == Method::XyCd) != self.cd_mode.is_some() {
            return bad(if m == Method::XyCd {
                "xy_cd needs a cd_mode".into()
            } else {
                format!("cd_mode does not apply to {m}")
            });
        }
        match (m, self.penalty_alpha) {
            (Method::Penalty, Some(a)) if !(a >= 0.0 && a.is_finite()) => {
                return bad(format!("penalty_alpha = {a}"));
            }
            (Method::Penalty, _) | (_, None) => {}
            (_, Some(_)) => return bad(format!("penalty_alpha does not apply to {m}")),
        }
        if m == Method::XyCd && self.max_weight < 2 {
            return bad(format!("max_weight {} below 2", self.max_weight));
        }
        Ok(())
    }

    pub fn evals_per_start(&self, n_params: usize) -> usize {
        self.max_evals.unwrap_or(EVALS_PER_PARAMETER * n_params)
    }
}

/// `Σ_{(i,j) ∈ edges} (X_i X_j + Y_i Y_j)`.
pub fn xy_mixer_hamiltonian(n: usize, topology: Topology) -> Result<PauliSum> {
    let mut h = PauliSum::zero(n)?;
    for (i, j) in topology.edges(n) {
        h = h.plus(&PauliSum::from_real_terms(
            n,
            &[
                (1.0, &[(i, Pauli::X), (j, Pauli::X)]),
                (1.0, &[(i, Pauli::Y), (j, Pauli::Y)]),
            ],
        )?)?;
    }
    Ok(h)
}

/// `Σ_i X_i`.
pub fn transverse_mixer_hamiltonian(n: usize) -> Result<PauliSum> {
    let mut h = PauliSum::zero(n)?;
    for i in 0..n {
        h = h.plus(&PauliSum::from_real_terms(n, &[(1.0, &[(i, Pauli::X)])])?)?;
    }
    Ok(h)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Gamma,
    Beta,
    Eta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub kind: SlotKind,
    /// 1-based layer index.
    pub layer: usize,
    /// Pool index for per-generator η slots.
    pub generator: Option<usize>,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            SlotKind::Gamma => "gamma",
            SlotKind::Beta => "beta",
            SlotKind::Eta => "eta",
        };
        match self.generator {
            Some(g) => write!(f, "{k}_{}_{g}", self.layer),
            None => write!(f, "{k}_{}", self.layer),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Dicke,
    Plus,
}

/// One program step; `slot` indexes the parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    /// `exp(−iγ H)` with the program's phase Hamiltonian.
    CostPhase { slot: usize },
    /// Ordered product of `exp(−iβ(X_iX_j + Y_iY_j))` over the edges.
    XyLayer { slot: usize, topology: Topology },
    GroverMixer { slot: usize },
    TransverseLayer { slot: usize },
    /// `exp(−i·weight·η·O)` for pool generator `O`.
    PauliExp {
        generator: usize,
        slot: usize,
        weight: f64,
    },
}

impl Gate {
    pub fn slot(&self) -> usize {
        match *self {
            Gate::CostPhase { slot }
            | Gate::XyLayer { slot, .. }
            | Gate::GroverMixer { slot }
            | Gate::TransverseLayer { slot }
            | Gate::PauliExp { slot, .. } => slot,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GateProgram {
    pub method: Method,
    pub n_qubits: usize,
    pub budget: usize,
    pub p: usize,
    pub initial: InitialState,
    pub gates: Vec<Gate>,
    pub slots: Vec<Slot>,
    /// Counterdiabatic pool (xy_cd only; may be empty).
    pub pool: Option<OperatorPool>,
    /// Gauge-potential solves at `λ_k = k/(p+1)`, one per layer (xy_cd only).
    pub agp: Vec<AgpSolve>,
    pub cd_mode: Option<CdMode>,
    /// Ising model the cost-phase gates exponentiate (penalized for penalty).
    pub phase_model: IsingModel,
    pub penalty_alpha: Option<f64>,
    /// Feasible-subspace extrema of the unpenalized cost.
    pub extrema: Extrema,
    cost: DiagonalCost,
    phase_cost: DiagonalCost,
    plan: Vec<Step>,
}

/// Simulation schedule: consecutive pauli_exp gates that share a slot and an
/// X mask and commute pairwise run as one fused kernel, which is exact.
#[derive(Clone, Debug)]
enum Step {
    Gate(usize),
    Kernel { slot: usize, kernel: ExpKernel },
}

impl GateProgram {
    pub fn n_params(&self) -> usize {
        self.slots.len()
    }

    /// Unpenalized cost diagonal.
    pub fn cost(&self) -> &DiagonalCost {
        &self.cost
    }

    /// Diagonal the optimizer minimizes (penalized for penalty).
    pub fn objective_cost(&self) -> &DiagonalCost {
        &self.phase_cost
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.slots.iter().map(Slot::to_string).collect()
    }

    pub fn initial_state(&self) -> Result<QuantumState> {
        match self.initial {
            InitialState::Dicke => QuantumState::dicke(self.n_qubits, self.budget),
            InitialState::Plus => QuantumState::plus(self.n_qubits),
        }
    }
}

pub fn build_ansatz(config: &AnsatzConfig, inst: &PortfolioInstance) -> Result<GateProgram> {
    config.validate()?;
    inst.validate()?;
    let n = inst.n_assets;
    let budget = inst.budget;
    let plain = to_ising(inst)?;
    let extrema = exact_extrema(&plain, n, budget)?;
    let cost = DiagonalCost::from_ising(&plain)?;

    let (phase_model, penalty_alpha, initial) = if config.method == Method::Penalty {
        let alpha = config.penalty_alpha.unwrap_or_else(|| default_penalty(inst));
        (to_penalty_ising(inst, alpha)?, Some(alpha), InitialState::Plus)
    } else {
        (plain.clone(), None, InitialState::Dicke)
    };
    let phase_cost = if config.method == Method::Penalty {
        DiagonalCost::from_ising(&phase_model)?
    } else {
        cost.clone()
    };

    let p = config.p;
    let (pool, agp) = if config.method == Method::XyCd {
        let topology = config.topology.expect("validated");
        let h_c = plain.to_pauli_sum(false)?;
        let h_m = xy_mixer_hamiltonian(n, topology)?;
        let pool = generate_pool(&h_c, &h_m, config.max_weight)?;
        let grid: Vec<f64> = (1..=p).map(|k| k as f64 / (p + 1) as f64).collect();
        let agp = agp_schedule(&h_c, &h_m, &pool, &grid)?;
        (Some(pool), agp)
    } else {
        (None, Vec::new())
    };
    // CD gates grouped by X support so commuting neighbours can fuse
    let cd_order: Vec<usize> = match &pool {
        Some(pool) => {
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.sort_by_key(|&j| (pool.generators[j].xy_sites.clone(), j));
            idx
        }
        None => Vec::new(),
    };

    let mut gates = Vec::new();
    let mut slots = Vec::new();
    let mut new_slot = |kind, layer, generator| {
        slots.push(Slot {
            kind,
            layer,
            generator,
        });
        slots.len() - 1
    };
    for layer in 1..=p {
        let g = new_slot(SlotKind::Gamma, layer, None);
        let b = new_slot(SlotKind::Beta, layer, None);
        gates.push(Gate::CostPhase { slot: g });
        gates.push(match config.method {
            Method::Xy | Method::XyCd => Gate::XyLayer {
                slot: b,
                topology: config.topology.expect("validated"),
            },
            Method::Grover => Gate::GroverMixer { slot: b },
            Method::Penalty => Gate::TransverseLayer { slot: b },
        });
        let Some(pool) = &pool else { continue };
        match config.cd_mode.expect("validated") {
            CdMode::SingleEtaPerLayer => {
                let eta = new_slot(SlotKind::Eta, layer, None);
                let weights = relative_weights(agp.get(layer - 1), pool.len());
                for &j in &cd_order {
                    gates.push(Gate::PauliExp {
                        generator: j,
                        slot: eta,
                        weight: weights[j],
                    });
                }
            }
            CdMode::EtaPerGenerator => {
                for &j in &cd_order {
                    let eta = new_slot(SlotKind::Eta, layer, Some(j));
                    gates.push(Gate::PauliExp {
                        generator: j,
                        slot: eta,
                        weight: 1.0,
                    });
                }
            }
        }
    }

    let plan = build_plan(&gates, pool.as_ref(), n)?;
    Ok(GateProgram {
        method: config.method,
        n_qubits: n,
        budget,
        p,
        initial,
        gates,
        slots,
        pool,
        agp,
        cd_mode: config.cd_mode,
        phase_model,
        penalty_alpha,
        extrema,
        cost,
        phase_cost,
        plan,
    })
}

fn build_plan(gates: &[Gate], pool: Option<&OperatorPool>, n: usize) -> Result<Vec<Step>> {
    let mut plan = Vec::new();
    // (slot, x mask, members, weighted sum)
    let mut open: Option<(usize, u64, Vec<usize>, PauliSum)> = None;
    let flush = |open: &mut Option<(usize, u64, Vec<usize>, PauliSum)>, plan: &mut Vec<Step>| {
        if let Some((slot, _, _, sum)) = open.take() {
            plan.push(Step::Kernel {
                slot,
                kernel: ExpKernel::new(&sum)?,
            });
        }
        Ok::<(), Error>(())
    };
    for (idx, gate) in gates.iter().enumerate() {
        let Gate::PauliExp {
            generator,
            slot,
            weight,
        } = *gate
        else {
            flush(&mut open, &mut plan)?;
            plan.push(Step::Gate(idx));
            continue;
        };
        let pool = pool.expect("pauli_exp gates come with a pool");
        let op = &pool.generators[generator].operator;
        let x = op.terms().next().map_or(0, |(w, _)| w.x_bits());
        let joins = match &open {
            Some((s, gx, members, _)) if *s == slot && *gx == x => members.iter().try_fold(true, |ok, &m| {
                Ok::<bool, Error>(ok && op.commutator(&pool.generators[m].operator)?.is_empty())
            })?,
            _ => false,
        };
        if !joins {
            flush(&mut open, &mut plan)?;
            open = Some((slot, x, Vec::new(), PauliSum::zero(n)?));
        }
        let (_, _, members, sum) = open.as_mut().expect("just opened");
        members.push(generator);
        *sum = sum.plus(&op.scaled(Complex64::new(weight, 0.0)))?;
    }
    flush(&mut open, &mut plan)?;
    Ok(plan)
}

/// Physical gauge-potential direction for one layer, normalized to unit
/// max-norm. `M c = v` yields `c` for the action with `G = ∂H − i[A, H]`;
/// under `exp(−iHt)` evolution the counterdiabatic term is `−Σ c_k O_k`.
fn relative_weights(solve: Option<&AgpSolve>, k: usize) -> Vec<f64> {
    let Some(solve) = solve else {
        return vec![1.0; k];
    };
    let scale = max_abs(&solve.coefficients);
    if scale == 0.0 {
        return vec![1.0; k];
    }
    solve.coefficients.iter().map(|c| -c / scale).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Final state of `program` at `params`.
pub fn simulate(program: &GateProgram, params: &[f64]) -> Result<QuantumState> {
    check_dims(program.n_params(), params.len())?;
    let mut state = program.initial_state()?;
    for step in &program.plan {
        match step {
            Step::Kernel { slot, kernel } => state.apply_kernel(kernel, params[*slot])?,
            Step::Gate(idx) => {
                let gate = &program.gates[*idx];
                let theta = params[gate.slot()];
                match *gate {
                    Gate::CostPhase { .. } => {
                        state.apply_diagonal_phase(&program.phase_cost, theta)?
                    }
                    Gate::XyLayer { topology, .. } => state.apply_xy_layer(theta, topology)?,
                    Gate::GroverMixer { .. } => state.apply_grover_mixer(theta, program.budget)?,
                    Gate::TransverseLayer { .. } => state.apply_transverse_layer(theta),
                    Gate::PauliExp { .. } => unreachable!("planned as kernels"),
                }
            }
        }
    }
    Ok(state)
}

/// CVaR of the unpenalized cost at `params`.
pub fn evaluate(program: &GateProgram, params: &[f64], cvar_alpha: f64) -> Result<f64> {
    simulate(program, params)?.cvar_expectation(&program.cost, cvar_alpha)
}

/// CVaR of the cost the optimizer minimizes; differs from [`evaluate`]
/// only for the penalty method.
pub fn objective(program: &GateProgram, params: &[f64], cvar_alpha: f64) -> Result<f64> {
    simulate(program, params)?.cvar_expectation(&program.phase_cost, cvar_alpha)
}

/// Starting point number `start` (0-based) of a multi-start run.
pub fn initial_parameters(program: &GateProgram, config: &AnsatzConfig, start: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(
        config
            .seed
            .wrapping_add((start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let p = program.p as f64;
    let dl = 1.0 / (p + 1.0);
    if config.init_strategy == InitStrategy::Random {
        return program
            .slots
            .iter()
            .map(|s| match s.kind {
                SlotKind::Eta => rng.random_range(-0.1..0.1),
                _ => rng.random_range(0.0..2.0 * RAMP_SCALE),
            })
            .collect();
    }
    let mut x: Vec<f64> = program
        .slots
        .iter()
        .map(|s| {
            let frac = s.layer as f64 / p;
            match s.kind {
                SlotKind::Gamma => RAMP_SCALE * frac,
                SlotKind::Beta => RAMP_SCALE * (1.0 - frac),
                SlotKind::Eta if config.init_strategy == InitStrategy::AgpSeeded => {
                    let Some(solve) = program.agp.get(s.layer - 1) else {
                        return 0.0;
                    };
                    match s.generator {
                        Some(j) => -dl * solve.coefficients[j],
                        None => dl * max_abs(&solve.coefficients),
                    }
                }
                SlotKind::Eta => 0.0,
            }
        })
        .collect();
    if start > 0 {
        for v in &mut x {
            *v += rng.random_range(-RESTART_SPREAD..RESTART_SPREAD);
        }
    }
    x
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    /// Approximation ratio from the plain expectation of the unpenalized
    /// cost; 1 when the feasible spectrum is flat.
    pub r: f64,
    pub p_gs: f64,
    pub feasible_mass: f64,
    /// Set when `r` falls outside [0, 1] (possible with infeasible support).
    pub r_out_of_range: bool,
}

pub fn metrics(
    state: &QuantumState,
    cost: &DiagonalCost,
    extrema: &Extrema,
    budget: usize,
) -> Result<Metrics> {
    check_dims(state.n_qubits(), cost.n_qubits())?;
    let mean = state.expectation(cost)?;
    let r = if extrema.is_degenerate() {
        1.0
    } else {
        (mean - extrema.e_max) / (extrema.e_min - extrema.e_max)
    };
    Ok(Metrics {
        r,
        p_gs: state.amplitudes()[extrema.argmin.bits as usize].norm_sqr(),
        feasible_mass: state.weight_mass(budget),
        r_out_of_range: !(-R_RANGE_TOL..=1.0 + R_RANGE_TOL).contains(&r),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub cnot_count: u64,
    pub two_qubit_count: u64,
    /// Greedy-scheduled depth in model time units.
    pub depth: u64,
}

/// CNOTs charged to one Grover mixer: inverse Dicke preparation, an
/// n-qubit controlled phase, Dicke preparation. Preparation uses
/// `5nB − 5B² − 2n` CNOTs; the controlled phase `2(n−1)` for n ≤ 2 and
/// `8n − 18` beyond.
pub fn grover_mixer_cnots(n: usize, budget: usize) -> u64 {
    let (n, b) = (n as i64, budget as i64);
    let prep = (5 * n * b - 5 * b * b - 2 * n).max(0);
    let mcp = if n <= 2 { 2 * (n - 1) } else { 8 * n - 18 }.max(0);
    (2 * prep + mcp) as u64
}

struct Scheduler {
    free: Vec<u64>,
    report: CostReport,
}

impl Scheduler {
    fn place(&mut self, qubits: &[usize], cnots: u64, two_qubit: u64, duration: u64) {
        let start = qubits.iter().map(|&q| self.free[q]).max().unwrap_or(0);
        for &q in qubits {
            self.free[q] = start + duration;
        }
        self.report.cnot_count += cnots;
        self.report.two_qubit_count += two_qubit;
    }
}

/// Decomposition cost model (state preparation excluded):
///
/// | gate | CNOT | two-qubit | duration |
/// |---|---|---|---|
/// | RZ, RX | 0 | 0 | 1 |
/// | ZZ rotation | 2 | 2 | 3 |
/// | XY rotation | 2 | 1 (native) | 3 |
/// | weight-w Pauli exponential | 2(w−1) | 2(w−1) | 2(w−1) + 1, +2 with X/Y factors |
/// | Grover mixer | [`grover_mixer_cnots`] | same | same, all qubits |
///
/// Each word of a pool generator is one Pauli exponential.
pub fn gate_cost(program: &GateProgram) -> CostReport {
    let n = program.n_qubits;
    let mut s = Scheduler {
        free: vec![0; n],
        report: CostReport {
            cnot_count: 0,
            two_qubit_count: 0,
            depth: 0,
        },
    };
    let all: Vec<usize> = (0..n).collect();
    for gate in &program.gates {
        match gate {
            Gate::CostPhase { .. } => {
                for &(i, j) in program.phase_model.couplings.keys() {
                    s.place(&[i, j], 2, 2, 3);
                }
                for (i, h) in program.phase_model.fields.iter().enumerate() {
                    if *h != 0.0 {
                        s.place(&[i], 0, 0, 1);
                    }
                }
            }
            Gate::XyLayer { topology, .. } => {
                for (i, j) in topology.edges(n) {
                    s.place(&[i, j], 2, 1, 3);
                }
            }
            Gate::TransverseLayer { .. } => {
                for q in 0..n {
                    s.place(&[q], 0, 0, 1);
                }
            }
            Gate::GroverMixer { .. } => {
                let c = grover_mixer_cnots(n, program.budget);
                s.place(&all, c, c, c);
            }
            Gate::PauliExp { generator, .. } => {
                let pool = program.pool.as_ref().expect("pauli_exp gates come with a pool");
                for (word, _) in pool.generators[*generator].operator.terms() {
                    let support: Vec<usize> =
                        (0..n).filter(|&q| (word.x_bits() | word.z_bits()) >> q & 1 == 1).collect();
                    let w = support.len() as u64;
                    let ladder = 2 * w.saturating_sub(1);
                    let basis_change = if word.x_bits() != 0 { 2 } else { 0 };
                    s.place(&support, ladder, ladder, ladder + 1 + basis_change);
                }
            }
        }
    }
    s.report.depth = s.free.iter().copied().max().unwrap_or(0);
    s.report
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub method: Method,
    pub p: usize,
    pub parameters: Vec<f64>,
    /// Best value of the optimized objective (penalized CVaR for penalty).
    pub best_objective: f64,
    /// CVaR of the unpenalized cost at the best parameters.
    pub best_cvar: f64,
    pub metrics: Metrics,
    /// Lowest-cost feasible string among [`FINAL_SHOTS`] samples of the
    /// final state (lowest-cost overall if none is feasible).
    pub best_bitstring: String,
    pub best_bitstring_cost: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best-so-far objective after each evaluation, across all starts.
    pub trace: Vec<f64>,
    pub gate_cost: CostReport,
    pub wall_ms: f64,
}

/// Multi-start Nelder–Mead on the CVaR objective, best start kept.
pub fn optimize(program: &GateProgram, config: &AnsatzConfig) -> Result<RunResult> {
    config.validate()?;
    if config.method != program.method || config.p != program.p {
        return Err(Error::InvalidParameter(
            "config does not match the program it optimizes".into(),
        ));
    }
    let clock = Instant::now();
    let opts = NelderMeadOptions {
        max_evals: config.evals_per_start(program.n_params()),
        ..NelderMeadOptions::default()
    };
    let alpha = config.cvar_alpha;
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut evals = 0;
    for start in 0..config.restarts {
        let x0 = initial_parameters(program, config, start);
        let run = nelder_mead(
            |x| objective(program, x, alpha).unwrap_or(f64::INFINITY),
            &x0,
            &opts,
        );
        let floor = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.extend(run.trace.iter().map(|v| v.min(floor)));
        evals += run.evals;
        if best.as_ref().is_none_or(|b| run.f < b.1) {
            best = Some((run.x, run.f, run.converged));
        }
    }
    let (parameters, best_objective, converged) = best.expect("at least one start");
    let state = simulate(program, &parameters)?;
    let best_cvar = state.cvar_expectation(&program.cost, alpha)?;
    let m = metrics(&state, &program.cost, &program.extrema, program.budget)?;
    let (bits, bits_cost) = best_sampled(&state, program, config.seed)?;
    Ok(RunResult {
        method: program.method,
        p: program.p,
        parameters,
        best_objective,
        best_cvar,
        metrics: m,
        best_bitstring: Bitstring::new(bits, program.n_qubits).to_string(),
        best_bitstring_cost: bits_cost,
        evals,
        converged,
        trace,
        gate_cost: gate_cost(program),
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

fn best_sampled(state: &QuantumState, program: &GateProgram, seed: u64) -> Result<(u64, f64)> {
    let energies = program.cost.energies();
    let samples = state.sample(FINAL_SHOTS, seed)?;
    let pick = |feasible_only: bool| {
        samples
            .iter()
            .copied()
            .filter(|b| !feasible_only || b.count_ones() as usize == program.budget)
            .min_by(|a, b| energies[*a as usize].total_cmp(&energies[*b as usize]).then(a.cmp(b)))
    };
    let b = pick(true).or_else(|| pick(false)).expect("shots > 0");
    Ok((b, energies[b as usize]))
}

/// Convenience: build the program and optimize it.
pub fn run(config: &AnsatzConfig, inst: &PortfolioInstance) -> Result<RunResult> {
    optimize(&build_ansatz(config, inst)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::random_instance;

    fn two_asset() -> PortfolioInstance {
        PortfolioInstance::new(vec![1.0, 0.0], vec![vec![0.0; 2]; 2], 0.5, 1).unwrap()
    }

    #[test]
    fn xy_program_structure() {
        let inst = random_instance(1, 4, 2, 0.5).unwrap();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Xy, 1), &inst).unwrap();
        assert_eq!(prog.initial, InitialState::Dicke);
        assert_eq!(
            prog.gates,
            vec![
                Gate::CostPhase { slot: 0 },
                Gate::XyLayer {
                    slot: 1,
                    topology: Topology::Ring
                }
            ]
        );
        assert_eq!(prog.n_params(), 2);
        assert_eq!(prog.slot_names(), vec!["gamma_1", "beta_1"]);
    }

    #[test]
    fn per_generator_slot_arithmetic() {
        let inst = random_instance(2, 4, 2, 0.5).unwrap();
        let mut cfg = AnsatzConfig::new(Method::XyCd, 2);
        cfg.cd_mode = Some(CdMode::EtaPerGenerator);
        let prog = build_ansatz(&cfg, &inst).unwrap();
        let k = prog.pool.as_ref().unwrap().len();
        assert!(k > 0);
        assert_eq!(prog.n_params(), 2 * (2 + k));
        let single = build_ansatz(&AnsatzConfig::new(Method::XyCd, 2), &inst).unwrap();
        assert_eq!(single.n_params(), 6);
        assert_eq!(single.agp.len(), 2);
        // slots are dense and all used
        for prog in [&prog, &single] {
            let mut used = vec![false; prog.n_params()];
            prog.gates.iter().for_each(|g| used[g.slot()] = true);
            assert!(used.iter().all(|u| *u));
        }
    }

    #[test]
    fn penalty_program_uses_plus_state_and_penalized_phase() {
        let inst = random_instance(3, 4, 2, 0.5).unwrap();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Penalty, 1), &inst).unwrap();
        assert_eq!(prog.initial, InitialState::Plus);
        assert_eq!(prog.gates[1], Gate::TransverseLayer { slot: 1 });
        let alpha = prog.penalty_alpha.unwrap();
        assert_eq!(alpha, default_penalty(&inst));
        // feasible energies agree, infeasible ones are shifted up
        for b in 0..16u64 {
            let d = prog.objective_cost().energies()[b as usize] - prog.cost().energies()[b as usize];
            let excess = b.count_ones() as f64 - 2.0;
            assert!((d - alpha * excess * excess).abs() < 1e-9);
        }
        let plain = to_ising(&inst).unwrap();
        assert_eq!(prog.extrema, exact_extrema(&plain, 4, 2).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = random_instance(4, 4, 2, 0.5).unwrap();
        let mut c = AnsatzConfig::new(Method::Grover, 1);
        c.topology = Some(Topology::Ring);
        assert!(build_ansatz(&c, &inst).is_err());
        let mut c = AnsatzConfig::new(Method::Xy, 1);
        c.topology = None;
        assert!(c.validate().is_err());
        let mut c = AnsatzConfig::new(Method::Xy, 1);
        c.cd_mode = Some(CdMode::SingleEtaPerLayer);
        assert!(c.validate().is_err());
        let mut c = AnsatzConfig::new(Method::Xy, 1);
        c.penalty_alpha = Some(2.0);
        assert!(c.validate().is_err());
        let mut c = AnsatzConfig::new(Method::Xy, 0);
        assert!(c.validate().is_err());
        c.p = 1;
        c.cvar_alpha = 0.0;
        assert!(c.validate().is_err());
        assert!(AnsatzConfig::new(Method::Penalty, 2).validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("eta_per_generator".parse::<CdMode>().unwrap(), CdMode::EtaPerGenerator);
        assert_eq!("agp_seeded".parse::<InitStrategy>().unwrap(), InitStrategy::AgpSeeded);
        assert!("qaoa".parse::<Method>().is_err());
    }

    #[test]
    fn zero_parameters_leave_dicke_state() {
        let inst = random_instance(5, 4, 2, 0.5).unwrap();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Xy, 2), &inst).unwrap();
        let dicke = QuantumState::dicke(4, 2).unwrap();
        for alpha in [0.25, 1.0] {
            let got = evaluate(&prog, &[0.0; 4], alpha).unwrap();
            let want = dicke.cvar_expectation(prog.cost(), alpha).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
        let mean = dicke.expectation(prog.cost()).unwrap();
        assert!((evaluate(&prog, &[0.0; 4], 1.0).unwrap() - mean).abs() < 1e-12);
        assert!(evaluate(&prog, &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn two_asset_problem_reaches_optimum() {
        let inst = two_asset();
        let res = run(&AnsatzConfig::new(Method::Xy, 1), &inst).unwrap();
        assert!(res.metrics.r >= 0.99, "r = {}", res.metrics.r);
        assert_eq!(res.best_bitstring, "10");
        assert!((res.metrics.feasible_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_examples() {
        let inst = two_asset();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Xy, 1), &inst).unwrap();
        let ex = &prog.extrema;
        let at_min = QuantumState::basis(2, ex.argmin.bits).unwrap();
        let m = metrics(&at_min, prog.cost(), ex, 1).unwrap();
        assert_eq!((m.r, m.p_gs), (1.0, 1.0));
        let at_max = QuantumState::basis(2, ex.argmax.bits).unwrap();
        assert_eq!(metrics(&at_max, prog.cost(), ex, 1).unwrap().r, 0.0);
        let d = QuantumState::dicke(2, 1).unwrap();
        let m = metrics(&d, prog.cost(), ex, 1).unwrap();
        assert!((m.p_gs - 0.5).abs() < 1e-12);
        assert!((m.feasible_mass - 1.0).abs() < 1e-12);
        assert!((m.r - 0.5).abs() < 1e-12);
        assert!(!m.r_out_of_range);
    }

    #[test]
    fn flat_feasible_spectrum_gives_unit_ratio() {
        let inst = PortfolioInstance::new(vec![0.0; 3], vec![vec![0.0; 3]; 3], 0.5, 1).unwrap();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Grover, 1), &inst).unwrap();
        let s = QuantumState::dicke(3, 1).unwrap();
        assert_eq!(metrics(&s, prog.cost(), &prog.extrema, 1).unwrap().r, 1.0);
    }

    #[test]
    fn zero_budget_returns_initial_point() {
        let inst = random_instance(6, 4, 2, 0.5).unwrap();
        let mut cfg = AnsatzConfig::new(Method::Xy, 2);
        cfg.max_evals = Some(0);
        cfg.restarts = 1;
        let prog = build_ansatz(&cfg, &inst).unwrap();
        let res = optimize(&prog, &cfg).unwrap();
        let x0 = initial_parameters(&prog, &cfg, 0);
        assert_eq!(res.evals, 1);
        assert_eq!(res.parameters, x0);
        assert_eq!(res.best_objective, objective(&prog, &x0, 1.0).unwrap());
        assert!(!res.converged);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let inst = random_instance(7, 5, 2, 0.5).unwrap();
        let mut cfg = AnsatzConfig::new(Method::XyCd, 1);
        cfg.seed = 11;
        cfg.cvar_alpha = 0.5;
        let mut a = run(&cfg, &inst).unwrap();
        let mut b = run(&cfg, &inst).unwrap();
        a.wall_ms = 0.0;
        b.wall_ms = 0.0;
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.trace.len(), a.evals);
    }

    #[test]
    fn ramp_and_seeded_starts() {
        let inst = random_instance(8, 5, 2, 0.5).unwrap();
        let mut cfg = AnsatzConfig::new(Method::XyCd, 2);
        let prog = build_ansatz(&cfg, &inst).unwrap();
        let x = initial_parameters(&prog, &cfg, 0);
        assert_eq!(x, vec![0.3, 0.3, 0.0, 0.6, 0.0, 0.0]);
        cfg.init_strategy = InitStrategy::AgpSeeded;
        let x = initial_parameters(&prog, &cfg, 0);
        let c1 = max_abs(&prog.agp[0].coefficients);
        assert!((x[2] - c1 / 3.0).abs() < 1e-15);
        assert_ne!(initial_parameters(&prog, &cfg, 1), x);
    }

    #[test]
    fn single_layer_costs() {
        let inst = random_instance(9, 4, 2, 0.5).unwrap();
        let prog = build_ansatz(&AnsatzConfig::new(Method::Xy, 1), &inst).unwrap();
        let c = gate_cost(&prog);
        let pairs = prog.phase_model.couplings.len() as u64;
        assert_eq!(c.cnot_count, 2 * pairs + 2 * 4);
        assert_eq!(c.two_qubit_count, 2 * pairs + 4);
        let three = gate_cost(&build_ansatz(&AnsatzConfig::new(Method::Xy, 3), &inst).unwrap());
        assert_eq!(three.cnot_count, 3 * c.cnot_count);
        assert_eq!(three.two_qubit_count, 3 * c.two_qubit_count);
        assert!(three.depth > c.depth);
    }

    #[test]
    fn grover_cnot_formula() {
        assert_eq!(grover_mixer_cnots(12, 4), 2 * (240 - 80 - 24) + 78);
        assert_eq!(grover_mixer_cnots(2, 1), 2 * (10 - 5 - 4) + 2);
    }

    #[test]
    fn fused_plan_matches_gate_by_gate() {
        let inst = random_instance(10, 5, 2, 0.5).unwrap();
        for mode in [CdMode::SingleEtaPerLayer, CdMode::EtaPerGenerator] {
            let mut cfg = AnsatzConfig::new(Method::XyCd, 2);
            cfg.cd_mode = Some(mode);
            let prog = build_ansatz(&cfg, &inst).unwrap();
            let cd_gates = prog.gates.iter().filter(|g| matches!(g, Gate::PauliExp { .. })).count();
            let kernels = prog.plan.iter().filter(|s| matches!(s, Step::Kernel { .. })).count();
            if mode == CdMode::SingleEtaPerLayer {
                assert!(kernels < cd_gates);
            }
            let params: Vec<f64> = (0..prog.n_params()).map(|i| 0.1 + 0.07 * i as f64).collect();
            let fused = simulate(&prog, &params).unwrap();
            let mut slow = prog.initial_state().unwrap();
            for g in &prog.gates {
                let t = params[g.slot()];
                match *g {
                    Gate::CostPhase { .. } => slow.apply_diagonal_phase(prog.objective_cost(), t).unwrap(),
                    Gate::XyLayer { topology, .. } => slow.apply_xy_layer(t, topology).unwrap(),
                    Gate::PauliExp { generator, weight, .. } => {
                        let op = &prog.pool.as_ref().unwrap().generators[generator].operator;
                        for (w, c) in op.terms() {
                            slow.apply_pauli_exponential(&w, weight * t * c.re).unwrap();
                        }
                    }
                    _ => unreachable!(),
                }
            }
            let overlap = fused.inner(&slow).unwrap().norm();
            assert!((overlap - 1.0).abs() < 1e-12);
        }
    }
}
