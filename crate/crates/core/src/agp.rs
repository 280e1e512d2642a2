//! Counterdiabatic operator pools and the variational gauge-potential solve.
//!
//! The pool comes from the first-order commutator `i[H_M, H_C]`: its Pauli
//! words are grouped by support, each group becomes one Hermitian generator
//! such as `X_i Y_j − Y_i X_j` or `X_i Y_j Z_k − Y_i X_j Z_k`, and groups above
//! the weight cap are dropped.
//!
//! For `H(λ) = (1−λ)H_M + λH_C` and generators `O_k`, the coefficients solve
//! `M c = v` with
//!
//! ```text
//! M_kl = −Tr([O_k, H][O_l, H])
//! v_k  =  i·Tr(O_k [H, ∂_λH])
//! ```
//!
//! using raw traces (`2^n` times the normalized inner product). `M c = v` is
//! the stationarity condition of `S(c) = Tr[G²]` with `G = ∂_λH − i[A, H]`
//! and `A = Σ c_k O_k`; [`action`] evaluates exactly that functional.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::pauli::{PauliString, PauliSum};

pub const DEFAULT_MAX_WEIGHT: u32 = 3;
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-10;
/// Generic interpolation point used when probing nested commutators.
const PROBE_LAMBDA: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoolGenerator {
    /// Hermitian, traceless, unit-weight signed sum of Pauli words.
    #[serde(serialize_with = "serialize_sum")]
    pub operator: PauliSum,
    /// Largest Pauli weight among the generator's words.
    pub body: u32,
    /// Qubits carrying X or Y factors.
    pub xy_sites: Vec<usize>,
    /// Qubits carrying only Z factors.
    pub z_sites: Vec<usize>,
}

fn serialize_sum<S: serde::Serializer>(sum: &PauliSum, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&sum.to_string())
}

impl PoolGenerator {
    pub fn kind(&self) -> &'static str {
        match self.body {
            1 => "one_body",
            2 => "two_body",
            3 => "three_body",
            _ => "many_body",
        }
    }

    /// Words with their real weights.
    pub fn strings(&self) -> Vec<(PauliString, f64)> {
        self.operator.terms().map(|(s, c)| (s, c.re)).collect()
    }

    fn sort_key(&self) -> (u32, Vec<usize>, Vec<usize>) {
        (self.body, self.xy_sites.clone(), self.z_sites.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorPool {
    pub n_qubits: usize,
    pub generators: Vec<PoolGenerator>,
}

impl OperatorPool {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    /// An empty pool is legitimate (commuting inputs), callers check this flag.
    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

fn bit_positions(mask: u64) -> Vec<usize> {
    (0..64).filter(|q| mask >> q & 1 == 1).collect()
}

fn require_hermitian(name: &str, h: &PauliSum) -> Result<()> {
    if h.is_hermitian(HERMITIAN_TOL) {
        Ok(())
    } else {
        Err(Error::NotHermitian(name.to_string()))
    }
}

/// First-order pool: groups of `i[H_M, H_C]` up to `max_weight`.
pub fn generate_pool(h_c: &PauliSum, h_m: &PauliSum, max_weight: u32) -> Result<OperatorPool> {
    generate_pool_nested(h_c, h_m, max_weight, 1)
}

/// Pool from nested commutators up to `order`: order 1 is `i[H_M, H_C]`;
/// each further order wraps the previous one in two more commutators with
/// `H(λ)` at a generic λ. Orders above 1 are available but not tuned.
pub fn generate_pool_nested(
    h_c: &PauliSum,
    h_m: &PauliSum,
    max_weight: u32,
    order: usize,
) -> Result<OperatorPool> {
    check_dims(h_c.n_qubits(), h_m.n_qubits())?;
    if max_weight < 2 {
        return Err(Error::InvalidParameter(format!("max_weight {max_weight} < 2")));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("commutator order must be at least 1".into()));
    }
    require_hermitian("H_C", h_c)?;
    require_hermitian("H_M", h_m)?;
    let i = Complex64::new(0.0, 1.0);

    let mut level = h_m.commutator(h_c)?.scaled(i);
    let mut collected: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut absorb = |sum: &PauliSum| {
        for (s, c) in sum.terms() {
            collected.entry((s.x_bits(), s.z_bits())).or_insert(c.re);
        }
    };
    absorb(&level);
    if order > 1 {
        let h = h_m
            .scaled(Complex64::new(1.0 - PROBE_LAMBDA, 0.0))
            .plus(&h_c.scaled(Complex64::new(PROBE_LAMBDA, 0.0)))?;
        for _ in 1..order {
            level = h.commutator(&h.commutator(&level)?)?.scaled(Complex64::new(-1.0, 0.0));
            absorb(&level);
        }
    }

    // group words by (X/Y support, pure-Z support)
    let mut groups: BTreeMap<(u64, u64), Vec<(u64, u64, f64)>> = BTreeMap::new();
    for (&(x, z), &c) in &collected {
        groups.entry((x, z & !x)).or_default().push((x, z, c));
    }

    let n = h_c.n_qubits();
    let mut generators = Vec::new();
    for ((xy, zonly), mut words) in groups {
        let body = (xy | zonly).count_ones();
        if body > max_weight {
            continue;
        }
        // orient so the word with the largest z mask carries +1
        words.sort_by_key(|&(_, z, _)| std::cmp::Reverse(z));
        let flip = if words[0].2 < 0.0 { -1.0 } else { 1.0 };
        let mut op = PauliSum::zero(n)?;
        for &(x, z, c) in &words {
            let w = flip * c.signum();
            op.add_string(&PauliString::word(n, x, z), Complex64::new(w, 0.0))?;
        }
        generators.push(PoolGenerator {
            operator: op,
            body,
            xy_sites: bit_positions(xy),
            z_sites: bit_positions(zonly),
        });
    }
    generators.sort_by_key(|g| g.sort_key());
    Ok(OperatorPool {
        n_qubits: n,
        generators,
    })
}

/// `H(λ) = (1−λ)H_M + λH_C` and `∂_λH = H_C − H_M`.
pub fn interpolate(h_c: &PauliSum, h_m: &PauliSum, lambda: f64) -> Result<(PauliSum, PauliSum)> {
    let h = h_m
        .scaled(Complex64::new(1.0 - lambda, 0.0))
        .plus(&h_c.scaled(Complex64::new(lambda, 0.0)))?;
    let dh = h_c.minus(h_m)?;
    Ok((h, dh))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSystem {
    pub m: DMatrix<f64>,
    pub v: DVector<f64>,
}

fn raw_trace_scale(n: usize) -> f64 {
    2f64.powi(n as i32)
}

fn real_or_err(z: Complex64, scale: f64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-10 * scale.max(1.0) {
        Err(Error::NotHermitian(format!(
            "{what} has imaginary part {} (real part {})",
            z.im, z.re
        )))
    } else {
        Ok(z.re)
    }
}

/// Assembles `M` and `v` symbolically through Pauli orthogonality.
pub fn build_action_system(
    h_lambda: &PauliSum,
    dh_dlambda: &PauliSum,
    pool: &OperatorPool,
) -> Result<ActionSystem> {
    let n = h_lambda.n_qubits();
    check_dims(n, dh_dlambda.n_qubits())?;
    check_dims(n, pool.n_qubits)?;
    require_hermitian("H(λ)", h_lambda)?;
    require_hermitian("∂H", dh_dlambda)?;
    let scale = raw_trace_scale(n);
    let k = pool.len();

    let comms: Vec<PauliSum> = pool
        .generators
        .iter()
        .map(|g| g.operator.commutator(h_lambda))
        .collect::<Result<_>>()?;
    let daggers: Vec<PauliSum> = comms.iter().map(PauliSum::dagger).collect();
    let mut m = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            // Tr(X Y) = 2^n <X†, Y>
            let tr = daggers[a].hs_inner(&comms[b])? * scale;
            let val = real_or_err(-tr, tr.norm(), "M entry")?;
            m[(a, b)] = val;
            m[(b, a)] = val;
        }
    }

    let hd = h_lambda.commutator(dh_dlambda)?;
    let mut v = DVector::zeros(k);
    for (a, g) in pool.generators.iter().enumerate() {
        let tr = g.operator.dagger().hs_inner(&hd)? * scale;
        v[a] = real_or_err(Complex64::new(0.0, 1.0) * tr, tr.norm(), "v entry")?;
    }
    Ok(ActionSystem { m, v })
}

/// `Tr[(∂_λH − i[A, H])²]` for `A = Σ c_k O_k`, computed symbolically.
pub fn action(
    h_lambda: &PauliSum,
    dh_dlambda: &PauliSum,
    pool: &OperatorPool,
    coefficients: &[f64],
) -> Result<f64> {
    check_dims(pool.len(), coefficients.len())?;
    let n = h_lambda.n_qubits();
    let mut a = PauliSum::zero(n)?;
    for (g, &c) in pool.generators.iter().zip(coefficients) {
        a = a.plus(&g.operator.scaled(Complex64::new(c, 0.0)))?;
    }
    let g = dh_dlambda.minus(&a.commutator(h_lambda)?.scaled(Complex64::new(0.0, 1.0)))?;
    Ok(g.hs_inner(&g)?.re * raw_trace_scale(n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgpSolve {
    pub lambda: Option<f64>,
    #[serde(skip)]
    pub m: DMatrix<f64>,
    #[serde(skip)]
    pub v: DVector<f64>,
    pub coefficients: Vec<f64>,
    /// `‖M c − v‖₂` against the unregularized `M`.
    pub residual: f64,
    /// Diagonal shift added before solving (0 when none was needed).
    pub regularization: f64,
    pub degenerate: bool,
}

/// Solves the symmetric system through its eigendecomposition, adding the
/// shift `tol·trace(M)/k` when the smallest eigenvalue is below `tol·‖M‖₂`.
pub fn solve_coefficients(m: &DMatrix<f64>, v: &DVector<f64>, tol: f64) -> Result<AgpSolve> {
    let k = m.nrows();
    check_dims(k, m.ncols())?;
    check_dims(k, v.len())?;
    if k == 0 {
        return Ok(AgpSolve {
            lambda: None,
            m: m.clone(),
            v: v.clone(),
            coefficients: Vec::new(),
            residual: 0.0,
            regularization: 0.0,
            degenerate: false,
        });
    }
    let max_abs = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if (m - m.transpose()).iter().any(|d| d.abs() > 1e-10 * max_abs.max(1.0)) {
        return Err(Error::InvalidParameter("M is not symmetric".into()));
    }

    let eig = m.clone().symmetric_eigen();
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min_eig = eig.eigenvalues.min();
    let regularization = if norm == 0.0 {
        0.0
    } else if min_eig < tol * norm {
        tol * m.trace() / k as f64
    } else {
        0.0
    };

    let mut c = DVector::zeros(k);
    if norm > 0.0 {
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            let denom = lam.max(0.0) + regularization;
            if denom <= 0.0 {
                continue;
            }
            let u = eig.eigenvectors.column(idx);
            c += u * (u.dot(v) / denom);
        }
    }
    let residual = (m * &c - v).norm();
    let degenerate = norm == 0.0 || residual > 1e-6 * v.norm().max(f64::MIN_POSITIVE);
    Ok(AgpSolve {
        lambda: None,
        m: m.clone(),
        v: v.clone(),
        coefficients: c.iter().copied().collect(),
        residual,
        regularization,
        degenerate: degenerate && v.norm() > 0.0,
    })
}

/// One solve per λ in `grid`.
pub fn agp_schedule(
    h_c: &PauliSum,
    h_m: &PauliSum,
    pool: &OperatorPool,
    grid: &[f64],
) -> Result<Vec<AgpSolve>> {
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    grid.iter()
        .map(|&lambda| {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidParameter(format!("λ = {lambda} outside [0, 1]")));
            }
            let (h, dh) = interpolate(h_c, h_m, lambda)?;
            let sys = build_action_system(&h, &dh, pool)?;
            let mut solve = solve_coefficients(&sys.m, &sys.v, DEFAULT_SOLVE_TOL)?;
            solve.lambda = Some(lambda);
            Ok(solve)
        })
        .collect()
}

/// JSON view of a pool and its coefficient schedule.
pub fn export_json(pool: &OperatorPool, schedule: &[AgpSolve]) -> serde_json::Value {
    serde_json::json!({
        "n_qubits": pool.n_qubits,
        "generators": pool.generators.iter().map(|g| serde_json::json!({
            "operator": g.operator.to_string(),
            "kind": g.kind(),
            "xy_sites": g.xy_sites,
            "z_sites": g.z_sites,
        })).collect::<Vec<_>>(),
        "schedule": schedule,
    })
}
