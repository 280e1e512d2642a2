//! Python module `cdqaoa`: instances, Pauli sums, gauge-potential pools and
//! single QAOA runs.

use cdqaoa_core::agp::{agp_schedule, generate_pool};
use cdqaoa_core::pauli::PauliSum;
use cdqaoa_core::portfolio::{exact_extrema, random_instance, to_ising, PortfolioInstance};
use cdqaoa_core::qaoa::{self, build_ansatz, gate_cost, xy_mixer_hamiltonian, AnsatzConfig, Method};
use cdqaoa_core::statevector::Topology;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let json = py.import("json")?;
    json.call_method1("loads", (value.to_string(),))
}

#[pyclass(name = "Instance", module = "cdqaoa")]
#[derive(Clone)]
struct PyInstance {
    inner: PortfolioInstance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (mu, sigma, budget, risk_aversion = 0.5))]
    fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, budget: usize, risk_aversion: f64) -> PyResult<Self> {
        let inner = PortfolioInstance::new(mu, sigma, risk_aversion, budget).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n_assets, budget, risk_aversion = 0.5))]
    fn random(seed: u64, n_assets: usize, budget: usize, risk_aversion: f64) -> PyResult<Self> {
        let inner = random_instance(seed, n_assets, budget, risk_aversion).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PortfolioInstance::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn n_assets(&self) -> usize {
        self.inner.n_assets
    }

    #[getter]
    fn budget(&self) -> usize {
        self.inner.budget
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.clone()
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.inner.sigma.clone()
    }

    /// Classical cost of a bitstring written asset 0 first, e.g. "1010".
    fn cost(&self, bits: &str) -> PyResult<f64> {
        let b = cdqaoa_core::portfolio::Bitstring::parse(bits).map_err(err)?;
        if b.n != self.inner.n_assets {
            return Err(PyValueError::new_err("bitstring length differs from n_assets"));
        }
        Ok(self.inner.cost(b.bits))
    }

    /// Exact minimum and maximum over budget-feasible portfolios.
    fn extrema<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let ising = to_ising(&self.inner).map_err(err)?;
        let ex = exact_extrema(&ising, self.inner.n_assets, self.inner.budget).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("e_min", ex.e_min)?;
        d.set_item("e_max", ex.e_max)?;
        d.set_item("argmin", ex.argmin.to_string())?;
        d.set_item("argmax", ex.argmax.to_string())?;
        d.set_item("scanned", ex.scanned)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Instance(n_assets={}, budget={})", self.inner.n_assets, self.inner.budget)
    }
}

#[pyclass(name = "PauliSum", module = "cdqaoa")]
#[derive(Clone)]
struct PyPauliSum {
    inner: PauliSum,
}

#[pymethods]
impl PyPauliSum {
    /// Parses e.g. `"+0.5·Z0 Z1 -1·X2"`; `*` is accepted in place of `·`.
    #[new]
    fn new(n_qubits: usize, text: &str) -> PyResult<Self> {
        let inner = PauliSum::parse(n_qubits, &text.replace('*', "·")).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn commutator(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.commutator(&other.inner).map_err(err)?,
        })
    }

    /// Normalized trace inner product Tr(A†B)/2^n as a complex number.
    fn hs_inner(&self, other: &Self) -> PyResult<(f64, f64)> {
        let z = self.inner.hs_inner(&other.inner).map_err(err)?;
        Ok((z.re, z.im))
    }

    fn is_hermitian(&self) -> bool {
        self.inner.is_hermitian(1e-12)
    }

    /// `(coefficient, word)` pairs, coefficients as `(re, im)`.
    fn terms(&self) -> Vec<((f64, f64), String)> {
        self.inner
            .terms()
            .map(|(s, c)| ((c.re, c.im), s.to_string()))
            .collect()
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.product(&other.inner).map_err(err)?,
        })
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.plus(&other.inner).map_err(err)?,
        })
    }

    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.minus(&other.inner).map_err(err)?,
        })
    }

    fn scaled(&self, re: f64, im: f64) -> Self {
        Self {
            inner: self.inner.scaled(Complex64::new(re, im)),
        }
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.minus(&other.inner).is_ok_and(|d| d.terms().all(|(_, c)| c.norm() < 1e-12))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PauliSum({}, \"{}\")", self.inner.n_qubits(), self.inner)
    }
}

fn topology(name: &str) -> PyResult<Topology> {
    name.parse().map_err(err)
}

/// Cost Hamiltonian of the instance as a Pauli sum (constant dropped).
#[pyfunction]
fn cost_hamiltonian(instance: &PyInstance) -> PyResult<PyPauliSum> {
    let inner = to_ising(&instance.inner)
        .and_then(|m| m.to_pauli_sum(false))
        .map_err(err)?;
    Ok(PyPauliSum { inner })
}

#[pyfunction]
#[pyo3(signature = (n_qubits, topology = "ring"))]
fn xy_mixer(n_qubits: usize, topology: &str) -> PyResult<PyPauliSum> {
    let inner = xy_mixer_hamiltonian(n_qubits, self::topology(topology)?).map_err(err)?;
    Ok(PyPauliSum { inner })
}

/// First-order gauge-potential pool generators and their solved coefficients
/// at each λ in `lambdas`.
#[pyfunction]
#[pyo3(signature = (instance, lambdas, topology = "ring", max_weight = 3))]
fn agp_pool<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    lambdas: Vec<f64>,
    topology: &str,
    max_weight: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let h_c = to_ising(&instance.inner)
        .and_then(|m| m.to_pauli_sum(false))
        .map_err(err)?;
    let h_m = xy_mixer_hamiltonian(instance.inner.n_assets, self::topology(topology)?).map_err(err)?;
    let pool = generate_pool(&h_c, &h_m, max_weight).map_err(err)?;
    let schedule = agp_schedule(&h_c, &h_m, &pool, &lambdas).map_err(err)?;
    let d = PyDict::new(py);
    let generators: Vec<PyPauliSum> = pool
        .generators
        .iter()
        .map(|g| PyPauliSum {
            inner: g.operator.clone(),
        })
        .collect();
    d.set_item("generators", generators)?;
    let coefficients: Vec<Vec<f64>> = schedule.iter().map(|s| s.coefficients.clone()).collect();
    d.set_item("coefficients", coefficients)?;
    Ok(d)
}

fn config(
    method: &str,
    p: usize,
    cvar_alpha: f64,
    topology: Option<&str>,
    restarts: usize,
    max_evals: Option<usize>,
    seed: u64,
) -> PyResult<AnsatzConfig> {
    let method: Method = method.parse().map_err(err)?;
    let mut cfg = AnsatzConfig::new(method, p);
    cfg.cvar_alpha = cvar_alpha;
    if let Some(t) = topology {
        cfg.topology = Some(self::topology(t)?);
    }
    cfg.restarts = restarts;
    cfg.max_evals = max_evals;
    cfg.seed = seed;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Builds and optimizes one ansatz; returns the run result as a dict.
#[pyfunction]
#[pyo3(signature = (instance, method, p, cvar_alpha = 0.25, topology = None, restarts = 3, max_evals = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    method: &str,
    p: usize,
    cvar_alpha: f64,
    topology: Option<&str>,
    restarts: usize,
    max_evals: Option<usize>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(method, p, cvar_alpha, topology, restarts, max_evals, seed)?;
    let inst = instance.inner.clone();
    let res = py.detach(move || qaoa::run(&cfg, &inst)).map_err(err)?;
    json_to_py(py, &serde_json::to_value(&res).map_err(err)?)
}

/// CNOT count, two-qubit count and model depth of an ansatz.
#[pyfunction]
#[pyo3(signature = (instance, method, p, topology = None))]
fn circuit_cost<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    method: &str,
    p: usize,
    topology: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(method, p, 1.0, topology, 1, None, 0)?;
    let prog = build_ansatz(&cfg, &instance.inner).map_err(err)?;
    json_to_py(py, &serde_json::to_value(gate_cost(&prog)).map_err(err)?)
}

#[pymodule]
fn cdqaoa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyPauliSum>()?;
    m.add_function(wrap_pyfunction!(cost_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(xy_mixer, m)?)?;
    m.add_function(wrap_pyfunction!(agp_pool, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_cost, m)?)?;
    Ok(())
}
