use std::f64::consts::PI;

use cdqaoa_core::portfolio::{random_instance, PortfolioInstance};
use cdqaoa_core::qaoa::{
    build_ansatz, evaluate, gate_cost, optimize, simulate, AnsatzConfig, CdMode, Gate, Method,
};
use cdqaoa_core::statevector::{sample_counts, QuantumState};

#[test]
fn optimizer_matches_grid_search_on_small_instance() {
    let inst = random_instance(21, 4, 2, 0.5).unwrap();
    let mut cfg = AnsatzConfig::new(Method::Xy, 1);
    cfg.restarts = 5;
    let prog = build_ansatz(&cfg, &inst).unwrap();
    let e = prog.cost().energies();
    let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (g_max, b_max) = (PI / scale, PI);

    let mut grid_min = f64::INFINITY;
    for i in 0..50 {
        for j in 0..50 {
            let x = [g_max * (2.0 * i as f64 / 50.0 - 1.0), b_max * j as f64 / 50.0];
            grid_min = grid_min.min(evaluate(&prog, &x, 1.0).unwrap());
        }
    }
    let res = optimize(&prog, &cfg).unwrap();
    let spread = prog.extrema.e_max - prog.extrema.e_min;
    assert!(
        res.best_objective <= grid_min + 1e-3 * spread,
        "optimizer {} vs grid {}",
        res.best_objective,
        grid_min
    );
    assert!((res.best_cvar - res.best_objective).abs() < 1e-12);
}

#[test]
fn two_asset_landscape_has_exact_optimum() {
    // a single Givens rotation moves all weight onto "10"
    let inst = PortfolioInstance::new(vec![1.0, 0.0], vec![vec![0.0; 2]; 2], 0.5, 1).unwrap();
    let prog = build_ansatz(&AnsatzConfig::new(Method::Xy, 1), &inst).unwrap();
    let mut best = (f64::INFINITY, [0.0; 2]);
    for i in 0..200 {
        for j in 0..200 {
            let x = [2.0 * PI * i as f64 / 200.0, PI * j as f64 / 200.0];
            let v = evaluate(&prog, &x, 1.0).unwrap();
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    assert!(best.0 < -0.99);
}

#[test]
fn sampling_frequency_of_plus_state() {
    let psi = QuantumState::plus(1).unwrap();
    let counts = sample_counts(&psi.sample(100_000, 9).unwrap());
    let f = counts[&0] as f64 / 1e5;
    assert!((f - 0.5).abs() < 0.01, "frequency {f}");
}

#[test]
fn cd_generators_keep_the_budget_but_single_words_leak() {
    let inst = random_instance(31, 6, 3, 0.5).unwrap();
    let mut cfg = AnsatzConfig::new(Method::XyCd, 1);
    cfg.cd_mode = Some(CdMode::EtaPerGenerator);
    let prog = build_ansatz(&cfg, &inst).unwrap();
    let pool = prog.pool.as_ref().unwrap();
    let three = pool.generators.iter().position(|g| g.body == 3).unwrap();
    let slot = prog
        .gates
        .iter()
        .find_map(|g| match *g {
            Gate::PauliExp { generator, slot, .. } if generator == three => Some(slot),
            _ => None,
        })
        .unwrap();
    let mut x = vec![0.0; prog.n_params()];
    x[slot] = 0.3;
    let psi = simulate(&prog, &x).unwrap();
    assert!(1.0 - psi.weight_mass(3) < 1e-12);

    let (word, _) = pool.generators[three].operator.terms().next().unwrap();
    let mut d = QuantumState::dicke(6, 3).unwrap();
    d.apply_pauli_exponential(&word, 0.3).unwrap();
    assert!(1.0 - d.weight_mass(3) > 1e-4);
}

#[test]
fn cost_model_orders_methods() {
    let inst = random_instance(41, 6, 3, 0.5).unwrap();
    for p in 1..=3 {
        let xy = gate_cost(&build_ansatz(&AnsatzConfig::new(Method::Xy, p), &inst).unwrap());
        let cd = gate_cost(&build_ansatz(&AnsatzConfig::new(Method::XyCd, p), &inst).unwrap());
        assert!(cd.cnot_count > xy.cnot_count);
        assert!(cd.two_qubit_count > xy.two_qubit_count);
        assert!(cd.depth > xy.depth);
    }
}
