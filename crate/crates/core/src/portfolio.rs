//! Budget-constrained mean–variance portfolio instances and their Ising forms.
//!
//! The classical cost of a selection `x ∈ {0,1}^n` is
//! `q·xᵀΣx − μᵀx`, with `q` the risk aversion. Spins follow `x_i = (1 − Z_i)/2`,
//! so bit value 0 is spin +1 and bit value 1 is spin −1.
//!
//! Bitstrings print asset 0 first (`"10"` selects asset 0 only), while the
//! integer form puts asset/qubit 0 in the least significant bit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::pauli::{Pauli, PauliSum};

/// Identifies the sampling procedure behind [`random_instance`]:
/// ChaCha20 seeded through `seed_from_u64`; μ from n successive uniform
/// `f64` draws in [0, 1); then G row-major from Box–Muller pairs
/// `(u1, u2)` with `u1 = 1 − uniform`, emitting `r·cos` then `r·sin`;
/// Σ = G·Gᵀ / n.
pub const GENERATOR_ID: &str = "chacha20/seed_from_u64;mu=uniform01;G=box-muller;sigma=GGt/n";

pub const DEFAULT_RISK_AVERSION: f64 = 0.5;

/// Exhaustive scans refuse to enumerate more configurations than this.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

/// Fields serialize in this order: `n_assets, budget, risk_aversion, mu,
/// sigma, seed, generator_id`. Floats use shortest round-trip decimals, so
/// save/load is lossless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioInstance {
    pub n_assets: usize,
    pub budget: usize,
    pub risk_aversion: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_id: Option<String>,
}

impl PortfolioInstance {
    pub fn new(
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        risk_aversion: f64,
        budget: usize,
    ) -> Result<Self> {
        let inst = Self {
            n_assets: mu.len(),
            budget,
            risk_aversion,
            mu,
            sigma,
            seed: None,
            generator_id: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets;
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return bad(format!("n_assets = {n}"));
        }
        if self.budget == 0 || self.budget >= n {
            return bad(format!("budget {} not strictly between 0 and {n}", self.budget));
        }
        if !(self.risk_aversion >= 0.0 && self.risk_aversion.is_finite()) {
            return bad(format!("risk_aversion {}", self.risk_aversion));
        }
        if self.mu.len() != n || self.sigma.len() != n || self.sigma.iter().any(|r| r.len() != n) {
            return bad("mu/sigma shape does not match n_assets".into());
        }
        if self.mu.iter().chain(self.sigma.iter().flatten()).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        for i in 0..n {
            for j in 0..i {
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > SYMMETRY_TOL {
                    return bad(format!("sigma not symmetric at ({i}, {j})"));
                }
            }
        }
        let min_eig = self.sigma_min_eigenvalue();
        if min_eig < -PSD_TOL {
            return bad(format!("sigma not positive semidefinite (min eigenvalue {min_eig})"));
        }
        Ok(())
    }

    pub fn sigma_min_eigenvalue(&self) -> f64 {
        let n = self.n_assets;
        let m = DMatrix::from_fn(n, n, |i, j| self.sigma[i][j]);
        m.symmetric_eigenvalues().min()
    }

    /// Classical cost `q·xᵀΣx − μᵀx` of a selection mask.
    pub fn cost(&self, bits: u64) -> f64 {
        let n = self.n_assets;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in (0..n).filter(|&i| bits >> i & 1 == 1) {
            lin += self.mu[i];
            for j in (0..n).filter(|&j| bits >> j & 1 == 1) {
                quad += self.sigma[i][j];
            }
        }
        self.risk_aversion * quad - lin
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Seeded instance: μ uniform in [0, 1), Σ = G·Gᵀ/n with standard-normal G.
pub fn random_instance(
    seed: u64,
    n_assets: usize,
    budget: usize,
    risk_aversion: f64,
) -> Result<PortfolioInstance> {
    if !(2..=crate::pauli::MAX_QUBITS).contains(&n_assets) {
        return Err(Error::InvalidInstance(format!("n_assets = {n_assets}")));
    }
    if budget == 0 || budget >= n_assets {
        return Err(Error::InvalidInstance(format!(
            "budget {budget} not strictly between 0 and {n_assets}"
        )));
    }
    let n = n_assets;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mu: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let mut normals = Vec::with_capacity(n * n + 1);
    while normals.len() < n * n {
        let u1 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        normals.push(r * theta.cos());
        normals.push(r * theta.sin());
    }
    let g = |i: usize, k: usize| normals[i * n + k];

    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| g(i, k) * g(j, k)).sum::<f64>() / n as f64;
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
    }
    let mut inst = PortfolioInstance::new(mu, sigma, risk_aversion, budget)?;
    inst.seed = Some(seed);
    inst.generator_id = Some(GENERATOR_ID.to_string());
    Ok(inst)
}

/// Fixed-length bit vector; qubit `i` is bit `i` of `bits`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitstring {
    pub bits: u64,
    pub n: usize,
}

impl Bitstring {
    pub fn new(bits: u64, n: usize) -> Self {
        Self { bits, n }
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Parses asset-0-first text such as `"1010"`.
    pub fn parse(text: &str) -> Result<Self> {
        let n = text.len();
        if n == 0 || n > 64 {
            return Err(Error::Parse(format!("bitstring length {n}")));
        }
        let mut bits = 0u64;
        for (i, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::Parse(format!("bad bit `{ch}` in `{text}`"))),
            }
        }
        Ok(Self { bits, n })
    }

    /// Key under which the asset-0-first text sorts lexicographically.
    fn lex_key(&self) -> u64 {
        self.bits.reverse_bits() >> (64 - self.n)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", (self.bits >> i) & 1)?;
        }
        Ok(())
    }
}

/// `E(s) = offset + Σ h_i s_i + Σ_{i<j} J_ij s_i s_j` over spins `s_i = ±1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    pub n_qubits: usize,
    /// Keyed by `(i, j)` with `i < j`; exact zeros are not stored.
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub fields: Vec<f64>,
    pub offset: f64,
}

impl IsingModel {
    /// Compiles `Σ_ij Q_ij x_i x_j + Σ_i l_i x_i + c` (Q square, both triangles used).
    pub fn from_qubo(quad: &[Vec<f64>], linear: &[f64], constant: f64) -> Result<Self> {
        let n = linear.len();
        check_dims(n, quad.len())?;
        let mut couplings = BTreeMap::new();
        let mut fields = vec![0.0; n];
        let mut offset = constant;
        for i in 0..n {
            check_dims(n, quad[i].len())?;
            // x_i^2 = x_i = (1 - s_i)/2
            let diag = quad[i][i] + linear[i];
            offset += diag / 2.0;
            fields[i] -= diag / 2.0;
            for j in i + 1..n {
                // x_i x_j = (1 - s_i - s_j + s_i s_j)/4
                let w = (quad[i][j] + quad[j][i]) / 4.0;
                if w != 0.0 {
                    couplings.insert((i, j), w);
                }
                offset += w;
                fields[i] -= w;
                fields[j] -= w;
            }
        }
        Ok(Self {
            n_qubits: n,
            couplings,
            fields,
            offset,
        })
    }

    #[inline]
    pub fn energy(&self, bits: u64) -> f64 {
        let spin = |i: usize| if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = self.offset;
        for (i, h) in self.fields.iter().enumerate() {
            e += h * spin(i);
        }
        for (&(i, j), jij) in &self.couplings {
            e += jij * spin(i) * spin(j);
        }
        e
    }

    /// The operator form `Σ J_ij Z_i Z_j + Σ h_i Z_i + offset·I`.
    pub fn to_pauli_sum(&self, include_offset: bool) -> Result<PauliSum> {
        let n = self.n_qubits;
        let mut terms: Vec<(f64, Vec<(usize, Pauli)>)> = Vec::new();
        if include_offset {
            terms.push((self.offset, vec![]));
        }
        for (i, &h) in self.fields.iter().enumerate() {
            terms.push((h, vec![(i, Pauli::Z)]));
        }
        for (&(i, j), &w) in &self.couplings {
            terms.push((w, vec![(i, Pauli::Z), (j, Pauli::Z)]));
        }
        let mut out = PauliSum::zero(n)?;
        for (c, letters) in &terms {
            let s = crate::pauli::PauliString::from_letters(n, letters)?;
            out.add_string(&s, Complex64::new(*c, 0.0))?;
        }
        Ok(out)
    }
}

pub fn cost_of_bitstring(ising: &IsingModel, x: &Bitstring) -> Result<f64> {
    check_dims(ising.n_qubits, x.n)?;
    Ok(ising.energy(x.bits))
}

pub fn to_ising(inst: &PortfolioInstance) -> Result<IsingModel> {
    let q = inst.risk_aversion;
    let quad: Vec<Vec<f64>> = inst
        .sigma
        .iter()
        .map(|row| row.iter().map(|s| q * s).collect())
        .collect();
    let linear: Vec<f64> = inst.mu.iter().map(|m| -m).collect();
    IsingModel::from_qubo(&quad, &linear, 0.0)
}

/// Adds `α(Σx_i − B)²` to the cost before compiling.
pub fn to_penalty_ising(inst: &PortfolioInstance, penalty_alpha: f64) -> Result<IsingModel> {
    if !(penalty_alpha >= 0.0 && penalty_alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("penalty_alpha = {penalty_alpha}")));
    }
    let q = inst.risk_aversion;
    let b = inst.budget as f64;
    let quad: Vec<Vec<f64>> = inst
        .sigma
        .iter()
        .map(|row| row.iter().map(|s| q * s + penalty_alpha).collect())
        .collect();
    let linear: Vec<f64> = inst.mu.iter().map(|m| -m - 2.0 * penalty_alpha * b).collect();
    IsingModel::from_qubo(&quad, &linear, penalty_alpha * b * b)
}

/// `max(1, max|μ| + q·max|Σ|·n)`.
pub fn default_penalty(inst: &PortfolioInstance) -> f64 {
    let max_mu = inst.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_sigma = inst.sigma.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    (max_mu + inst.risk_aversion * max_sigma * inst.n_assets as f64).max(1.0)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All n-bit masks of the given weight, in increasing integer order.
pub fn fixed_weight_masks(n: usize, weight: usize) -> impl Iterator<Item = u64> {
    let limit = crate::pauli::qubit_mask(n);
    let first = if weight == 0 {
        0
    } else if weight >= 64 {
        u64::MAX
    } else {
        (1u64 << weight) - 1
    };
    let mut next = if weight <= n { Some(first) } else { None };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack
            let c = cur & cur.wrapping_neg();
            let r = cur.wrapping_add(c);
            if r == 0 {
                None
            } else {
                let nxt = (((r ^ cur) >> 2) / c) | r;
                (nxt & !limit == 0).then_some(nxt)
            }
        };
        Some(cur)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extrema {
    pub e_min: f64,
    pub e_max: f64,
    pub argmin: Bitstring,
    pub argmax: Bitstring,
    pub scanned: u64,
}

impl Extrema {
    pub fn is_degenerate(&self) -> bool {
        self.e_min == self.e_max
    }
}

/// Exhaustive scan of the weight-`budget` strings. Energy ties resolve to
/// the lexicographically smallest asset-0-first bitstring.
pub fn exact_extrema(ising: &IsingModel, n: usize, budget: usize) -> Result<Extrema> {
    check_dims(ising.n_qubits, n)?;
    if budget > n {
        return Err(Error::InvalidParameter(format!("budget {budget} > n {n}")));
    }
    let count = binomial(n, budget);
    if count > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard {
            count,
            guard: ENUMERATION_GUARD,
        });
    }
    let mut best: Option<(f64, Bitstring)> = None;
    let mut worst: Option<(f64, Bitstring)> = None;
    let mut scanned = 0u64;
    for bits in fixed_weight_masks(n, budget) {
        scanned += 1;
        let e = ising.energy(bits);
        let b = Bitstring::new(bits, n);
        let better = |cur: &Option<(f64, Bitstring)>, lower: bool| match cur {
            None => true,
            Some((ce, cb)) => {
                let strictly = if lower { e < *ce } else { e > *ce };
                strictly || (e == *ce && b.lex_key() < cb.lex_key())
            }
        };
        if better(&best, true) {
            best = Some((e, b));
        }
        if better(&worst, false) {
            worst = Some((e, b));
        }
    }
    let (e_min, argmin) = best.expect("at least one feasible string");
    let (e_max, argmax) = worst.expect("at least one feasible string");
    Ok(Extrema {
        e_min,
        e_max,
        argmin,
        argmax,
        scanned,
    })
}

/// Penalized-energy landscape split by feasibility.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenaltySeparation {
    pub penalty_alpha: f64,
    pub min_feasible: f64,
    pub max_feasible: f64,
    pub min_infeasible: f64,
}

impl PenaltySeparation {
    /// Positive when the penalized ground state is feasible.
    pub fn ground_gap(&self) -> f64 {
        self.min_infeasible - self.min_feasible
    }

    /// Positive when every feasible string beats every infeasible one.
    pub fn strict_gap(&self) -> f64 {
        self.min_infeasible - self.max_feasible
    }
}

pub fn penalty_separation(inst: &PortfolioInstance, penalty_alpha: f64) -> Result<PenaltySeparation> {
    let n = inst.n_assets;
    let total = 1u128 << n;
    if total > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard {
            count: total,
            guard: ENUMERATION_GUARD,
        });
    }
    let model = to_penalty_ising(inst, penalty_alpha)?;
    let mut sep = PenaltySeparation {
        penalty_alpha,
        min_feasible: f64::INFINITY,
        max_feasible: f64::NEG_INFINITY,
        min_infeasible: f64::INFINITY,
    };
    for bits in 0..(1u64 << n) {
        let e = model.energy(bits);
        if bits.count_ones() as usize == inst.budget {
            sep.min_feasible = sep.min_feasible.min(e);
            sep.max_feasible = sep.max_feasible.max(e);
        } else {
            sep.min_infeasible = sep.min_infeasible.min(e);
        }
    }
    Ok(sep)
}
