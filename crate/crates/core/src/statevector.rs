//! Dense statevector simulation of the gate families the ansatz programs use.
//!
//! Basis index `b` encodes qubit `q` in bit `q` (qubit 0 least significant).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::portfolio::{binomial, fixed_weight_masks, Bitstring, IsingModel};

pub const MAX_SIM_QUBITS: usize = 26;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Ring,
    Chain,
    Complete,
}

impl Topology {
    /// Edge list in ascending `(i, j)` order with `i < j`.
    pub fn edges(self, n: usize) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = match self {
            Topology::Chain => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Topology::Ring => {
                let mut e: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
                if n > 2 {
                    e.push((0, n - 1));
                }
                e
            }
            Topology::Complete => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        };
        edges.sort_unstable();
        edges
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::Chain => "chain",
            Topology::Complete => "complete",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Topology::Ring),
            "chain" => Ok(Topology::Chain),
            "complete" => Ok(Topology::Complete),
            other => Err(Error::InvalidParameter(format!("unknown topology `{other}`"))),
        }
    }
}

/// Precomputed diagonal of a cost Hamiltonian, with basis indices sorted by
/// ascending energy (ties by index) for CVaR.
#[derive(Clone, Debug)]
pub struct DiagonalCost {
    n_qubits: usize,
    energies: Vec<f64>,
    ascending: Vec<u32>,
}

impl DiagonalCost {
    pub fn from_ising(ising: &IsingModel) -> Result<Self> {
        check_sim_qubits(ising.n_qubits)?;
        let energies = (0..1u64 << ising.n_qubits).map(|b| ising.energy(b)).collect();
        Self::from_energies(ising.n_qubits, energies)
    }

    pub fn from_energies(n_qubits: usize, energies: Vec<f64>) -> Result<Self> {
        check_sim_qubits(n_qubits)?;
        check_dims(1 << n_qubits, energies.len())?;
        let mut ascending: Vec<u32> = (0..energies.len() as u32).collect();
        ascending.sort_by(|&a, &b| {
            energies[a as usize]
                .total_cmp(&energies[b as usize])
                .then(a.cmp(&b))
        });
        Ok(Self {
            n_qubits,
            energies,
            ascending,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `a·E + b` elementwise.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::from_energies(self.n_qubits, self.energies.iter().map(|e| a * e + b).collect())
    }
}

fn check_sim_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SIM_QUBITS {
        Err(Error::QubitCount {
            n,
            max: MAX_SIM_QUBITS,
        })
    } else {
        Ok(())
    }
}

fn check_budget(n: usize, budget: usize) -> Result<()> {
    if budget == 0 || budget >= n {
        Err(Error::InvalidParameter(format!(
            "budget {budget} not strictly between 0 and {n}"
        )))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn basis(n_qubits: usize, bits: u64) -> Result<Self> {
        check_sim_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if bits as usize >= dim {
            return Err(Error::InvalidParameter(format!("basis index {bits} out of range")));
        }
        let mut amps = vec![Complex64::default(); dim];
        amps[bits as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_sim_qubits(n_qubits)?;
        check_dims(1 << n_qubits, amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero or non-finite state".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    /// Uniform superposition over the weight-`budget` strings.
    pub fn dicke(n_qubits: usize, budget: usize) -> Result<Self> {
        check_sim_qubits(n_qubits)?;
        check_budget(n_qubits, budget)?;
        let amp = Complex64::new((binomial(n_qubits, budget) as f64).sqrt().recip(), 0.0);
        let mut amps = vec![Complex64::default(); 1 << n_qubits];
        for b in fixed_weight_masks(n_qubits, budget) {
            amps[b as usize] = amp;
        }
        Ok(Self { n_qubits, amps })
    }

    /// `|+>^n`.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        check_sim_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self {
            n_qubits,
            amps: vec![amp; dim],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        check_dims(self.n_qubits, other.n_qubits)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Total probability on strings of the given Hamming weight.
    pub fn weight_mass(&self, weight: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(b, _)| b.count_ones() as usize == weight)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Runs `f` on a copy, leaving `self` untouched.
    pub fn applied(&self, f: impl FnOnce(&mut Self) -> Result<()>) -> Result<Self> {
        let mut out = self.clone();
        f(&mut out)?;
        Ok(out)
    }

    /// `amp[x] *= exp(−i·γ·E[x])`.
    pub fn apply_diagonal_phase(&mut self, cost: &DiagonalCost, gamma: f64) -> Result<()> {
        check_dims(self.n_qubits, cost.n_qubits)?;
        for (a, &e) in self.amps.iter_mut().zip(&cost.energies) {
            let (s, c) = (gamma * e).sin_cos();
            *a *= Complex64::new(c, -s);
        }
        Ok(())
    }

    /// `exp(−iβ(X_i X_j + Y_i Y_j))`: a rotation by 2β inside the
    /// `{|01>, |10>}` block, identity on `|00>` and `|11>`.
    pub fn apply_xy_rotation(&mut self, i: usize, j: usize, beta: f64) -> Result<()> {
        if i == j || i >= self.n_qubits || j >= self.n_qubits {
            return Err(Error::InvalidParameter(format!("bad XY edge ({i}, {j})")));
        }
        let (s, c) = (2.0 * beta).sin_cos();
        let mis = Complex64::new(0.0, -s);
        let (bi, bj) = (1usize << i, 1usize << j);
        for b in 0..self.amps.len() {
            if b & bi == 0 && b & bj != 0 {
                let partner = b ^ bi ^ bj;
                let (u, v) = (self.amps[b], self.amps[partner]);
                self.amps[b] = u * c + v * mis;
                self.amps[partner] = v * c + u * mis;
            }
        }
        Ok(())
    }

    /// Product of edge rotations in the topology's ascending edge order.
    pub fn apply_xy_layer(&mut self, beta: f64, topology: Topology) -> Result<()> {
        for (i, j) in topology.edges(self.n_qubits) {
            self.apply_xy_rotation(i, j, beta)?;
        }
        Ok(())
    }

    /// `exp(−iβ Σ_q X_q)`.
    pub fn apply_transverse_layer(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        let mis = Complex64::new(0.0, -s);
        for q in 0..self.n_qubits {
            let bq = 1usize << q;
            for b in 0..self.amps.len() {
                if b & bq == 0 {
                    let (u, v) = (self.amps[b], self.amps[b | bq]);
                    self.amps[b] = u * c + v * mis;
                    self.amps[b | bq] = v * c + u * mis;
                }
            }
        }
    }

    /// `exp(−iθP) = cos θ·I − i sin θ·P` for a Hermitian string `P`.
    pub fn apply_pauli_exponential(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        check_dims(self.n_qubits, p.n_qubits())?;
        if !p.is_hermitian() {
            return Err(Error::NotHermitian(p.to_string()));
        }
        let (s, c) = theta.sin_cos();
        let mis = Complex64::new(0.0, -s);
        let x = p.x_bits() as usize;
        if x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                let (_, ph) = p.apply_to_basis(b as u64);
                *a *= c + mis * ph;
            }
            return Ok(());
        }
        let top = 1usize << (63 - (x as u64).leading_zeros());
        for b in 0..self.amps.len() {
            if b & top == 0 {
                let partner = b ^ x;
                let (_, ph_b) = p.apply_to_basis(b as u64);
                let (_, ph_p) = p.apply_to_basis(partner as u64);
                let (u, v) = (self.amps[b], self.amps[partner]);
                // (P ψ)[partner] = ph_b ψ[b], (P ψ)[b] = ph_p ψ[partner]
                self.amps[b] = u * c + mis * ph_p * v;
                self.amps[partner] = v * c + mis * ph_b * u;
            }
        }
        Ok(())
    }

    /// `exp(−iβ|F><F|)` with `|F>` the weight-`budget` Dicke state.
    pub fn apply_grover_mixer(&mut self, beta: f64, budget: usize) -> Result<()> {
        check_budget(self.n_qubits, budget)?;
        let amp = (binomial(self.n_qubits, budget) as f64).sqrt().recip();
        let overlap: Complex64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(b, _)| b.count_ones() as usize == budget)
            .map(|(_, a)| *a)
            .sum::<Complex64>()
            * amp;
        let (s, c) = beta.sin_cos();
        let shift = (Complex64::new(c, -s) - 1.0) * overlap * amp;
        for (b, a) in self.amps.iter_mut().enumerate() {
            if b.count_ones() as usize == budget {
                *a += shift;
            }
        }
        Ok(())
    }

    /// `exp(−iθG)` for a generator prepared by [`ExpKernel::new`].
    pub fn apply_kernel(&mut self, kernel: &ExpKernel, theta: f64) -> Result<()> {
        check_dims(self.n_qubits, kernel.n_qubits)?;
        if kernel.x == 0 {
            for &(b, f) in &kernel.entries {
                let (s, c) = (theta * f.re).sin_cos();
                self.amps[b as usize] *= Complex64::new(c, -s);
            }
            return Ok(());
        }
        let x = kernel.x as usize;
        // |f| is usually shared by all entries of a generator
        let (mut last_r, mut c, mut g) = (f64::NAN, 0.0, Complex64::default());
        for &(b, f) in &kernel.entries {
            let (b, partner) = (b as usize, b as usize ^ x);
            let r = f.norm();
            if r != last_r {
                let (s, cos) = (theta * r).sin_cos();
                (last_r, c, g) = (r, cos, Complex64::new(0.0, -s / r));
            }
            // G|b> = f|b^x>, G|b^x> = conj(f)|b>
            let (u, v) = (self.amps[b], self.amps[partner]);
            self.amps[b] = u * c + g * f.conj() * v;
            self.amps[partner] = v * c + g * f * u;
        }
        Ok(())
    }

    pub fn expectation(&self, cost: &DiagonalCost) -> Result<f64> {
        check_dims(self.n_qubits, cost.n_qubits)?;
        Ok(self
            .amps
            .iter()
            .zip(&cost.energies)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum())
    }

    /// Mean energy of the lowest-energy probability mass `alpha`, taken from
    /// the exact distribution; the boundary state contributes fractionally.
    pub fn cvar_expectation(&self, cost: &DiagonalCost, alpha: f64) -> Result<f64> {
        check_dims(self.n_qubits, cost.n_qubits)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("cvar alpha {alpha} not in (0, 1]")));
        }
        let mut mass = 0.0;
        let mut acc = 0.0;
        for &idx in &cost.ascending {
            let p = self.amps[idx as usize].norm_sqr();
            if p == 0.0 {
                continue;
            }
            let take = p.min(alpha - mass);
            acc += take * cost.energies[idx as usize];
            mass += take;
            if mass >= alpha {
                break;
            }
        }
        Ok(acc / alpha)
    }

    /// `<ψ|P|ψ>` for a Hermitian string.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<f64> {
        check_dims(self.n_qubits, p.n_qubits())?;
        let mut acc = Complex64::default();
        for (b, a) in self.amps.iter().enumerate() {
            let (target, ph) = p.apply_to_basis(b as u64);
            acc += self.amps[target as usize].conj() * ph * a;
        }
        Ok(acc.re)
    }

    /// Inverse-CDF sampling of basis indices; deterministic for a seed.
    pub fn sample(&self, shots: usize, seed: u64) -> Result<Vec<u64>> {
        if shots == 0 {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut total = 0.0;
        for a in &self.amps {
            total += a.norm_sqr();
            cdf.push(total);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Ok((0..shots)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u);
                idx.min(self.amps.len() - 1) as u64
            })
            .collect())
    }

    /// The `k` most probable basis states, one `bitstring probability amplitude` per line.
    pub fn dump_top(&self, k: usize) -> String {
        let mut idx: Vec<usize> = (0..self.amps.len()).collect();
        idx.sort_by(|&a, &b| {
            self.amps[b]
                .norm_sqr()
                .total_cmp(&self.amps[a].norm_sqr())
                .then(a.cmp(&b))
        });
        let mut out = String::new();
        for &b in idx.iter().take(k) {
            let a = self.amps[b];
            let _ = writeln!(
                out,
                "{} {:.6e} ({:+.6e}{:+.6e}i)",
                Bitstring::new(b as u64, self.n_qubits),
                a.norm_sqr(),
                a.re,
                a.im
            );
        }
        out
    }
}

/// Precomputed action of a Hermitian sum of Pauli words sharing one X mask.
/// Such a sum maps `|b>` to `f(b)|b^x>`, so its exponential is a set of
/// independent 2×2 rotations.
#[derive(Clone, Debug)]
pub struct ExpKernel {
    n_qubits: usize,
    x: u64,
    entries: Vec<(u32, Complex64)>,
}

impl ExpKernel {
    pub fn new(op: &PauliSum) -> Result<Self> {
        let n_qubits = op.n_qubits();
        check_sim_qubits(n_qubits)?;
        if !op.is_hermitian(1e-12) {
            return Err(Error::NotHermitian(op.to_string()));
        }
        let words: Vec<(PauliString, Complex64)> = op.terms().collect();
        let x = words.first().map_or(0, |(w, _)| w.x_bits());
        if words.iter().any(|(w, _)| w.x_bits() != x) {
            return Err(Error::InvalidParameter(format!(
                "words of {op} do not share one X mask"
            )));
        }
        let top = if x == 0 { 0 } else { 1u64 << (63 - x.leading_zeros()) };
        let mut entries = Vec::new();
        for b in 0..1u64 << n_qubits {
            if b & top != 0 {
                continue;
            }
            let f: Complex64 = words
                .iter()
                .map(|(w, c)| w.apply_to_basis(b).1 * c)
                .sum();
            if f.norm() > 1e-14 {
                entries.push((b as u32, f));
            }
        }
        Ok(Self {
            n_qubits,
            x,
            entries,
        })
    }
}

/// Counts per sampled basis index.
pub fn sample_counts(samples: &[u64]) -> BTreeMap<u64, usize> {
    let mut counts = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}
