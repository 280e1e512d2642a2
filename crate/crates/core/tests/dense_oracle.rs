//! Symbolic algebra and simulator checked against dense matrices on small systems.

use cdqaoa_core::agp::{action, build_action_system, generate_pool, interpolate, solve_coefficients};
use cdqaoa_core::dense::{expm_i, to_dense, CMatrix};
use cdqaoa_core::pauli::{Pauli, PauliString, PauliSum};
use cdqaoa_core::portfolio::{random_instance, to_ising};
use cdqaoa_core::qaoa::xy_mixer_hamiltonian;
use cdqaoa_core::statevector::{DiagonalCost, ExpKernel, QuantumState, Topology};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_string(rng: &mut ChaCha20Rng, n: usize) -> PauliString {
    let mask = (1u64 << n) - 1;
    PauliString::new(n, rng.random::<u64>() & mask, rng.random::<u64>() & mask, rng.random_range(0..4)).unwrap()
}

fn random_sum(rng: &mut ChaCha20Rng, n: usize, terms: usize, hermitian: bool) -> PauliSum {
    let mut s = PauliSum::zero(n).unwrap();
    for _ in 0..terms {
        let w = random_string(rng, n).hermitian_word();
        let coeff = if hermitian {
            c(rng.random_range(-1.0..1.0))
        } else {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        s.add_string(&w, coeff).unwrap();
    }
    s
}

fn dense_of(s: &PauliString) -> CMatrix {
    to_dense(&PauliSum::from_string(s, c(1.0))).unwrap()
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

#[test]
fn string_products_are_exact() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for trial in 0..1000 {
        let n = 1 + trial % 4;
        let (a, b) = (random_string(&mut rng, n), random_string(&mut rng, n));
        let got = dense_of(&a.multiply(&b).unwrap());
        let want = dense_of(&a) * dense_of(&b);
        assert_eq!(got, want, "{a} * {b}");
        assert_eq!(a.commutes_with(&b), max_diff(&want, &(dense_of(&b) * dense_of(&a))) == 0.0);
    }
}

#[test]
fn sum_commutators_and_inner_products() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for trial in 0..300 {
        let n = 1 + trial % 4;
        let a = random_sum(&mut rng, n, 5, false);
        let b = random_sum(&mut rng, n, 5, false);
        let (da, db) = (to_dense(&a).unwrap(), to_dense(&b).unwrap());
        let comm = to_dense(&a.commutator(&b).unwrap()).unwrap();
        assert!(max_diff(&comm, &(&da * &db - &db * &da)) < 1e-12);
        let prod = to_dense(&a.product(&b).unwrap()).unwrap();
        assert!(max_diff(&prod, &(&da * &db)) < 1e-12);
        let tr = (da.adjoint() * &db).trace() / (1u64 << n) as f64;
        assert!((a.hs_inner(&b).unwrap() - tr).norm() < 1e-12);
        assert!(max_diff(&to_dense(&a.dagger()).unwrap(), &da.adjoint()) < 1e-12);
    }
}

#[test]
fn action_system_matches_dense_traces() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for seed in 0..5 {
        let inst = random_instance(seed, 4, 2, 0.5).unwrap();
        let h_c = to_ising(&inst).unwrap().to_pauli_sum(false).unwrap();
        let h_m = xy_mixer_hamiltonian(4, Topology::Ring).unwrap();
        let pool = generate_pool(&h_c, &h_m, 3).unwrap();
        let lambda = rng.random_range(0.05..0.95);
        let (h, dh) = interpolate(&h_c, &h_m, lambda).unwrap();
        let sys = build_action_system(&h, &dh, &pool).unwrap();
        let (hd, dhd) = (to_dense(&h).unwrap(), to_dense(&dh).unwrap());
        let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;
        let ops: Vec<CMatrix> = pool.generators.iter().map(|g| to_dense(&g.operator).unwrap()).collect();
        for (k, ok) in ops.iter().enumerate() {
            let v = (Complex64::new(0.0, 1.0) * (ok * comm(&hd, &dhd)).trace()).re;
            assert!((sys.v[k] - v).abs() < 1e-9);
            for (l, ol) in ops.iter().enumerate() {
                let m = -(comm(ok, &hd) * comm(ol, &hd)).trace().re;
                assert!((sys.m[(k, l)] - m).abs() < 1e-9);
            }
        }
        // M is PSD
        let eig = sys.m.clone().symmetric_eigenvalues();
        assert!(eig.min() > -1e-8);

        // a common positive rescaling of M and v leaves the solve unchanged
        let sol = solve_coefficients(&sys.m, &sys.v, 1e-10).unwrap();
        let scaled = solve_coefficients(&(&sys.m * 7.5), &(&sys.v * 7.5), 1e-10).unwrap();
        for (a, b) in sol.coefficients.iter().zip(&scaled.coefficients) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }

        // the symbolic action equals the dense one, and c is its minimizer
        let mut a_dense = CMatrix::zeros(16, 16);
        for (o, cf) in ops.iter().zip(&sol.coefficients) {
            a_dense += o * c(*cf);
        }
        let g = &dhd - comm(&a_dense, &hd) * Complex64::new(0.0, 1.0);
        let s_dense = (&g * &g).trace().re;
        let s_sym = action(&h, &dh, &pool, &sol.coefficients).unwrap();
        assert!((s_dense - s_sym).abs() < 1e-8 * s_dense.abs().max(1.0));
        let k = pool.len();
        let grad = &sys.m * DVector::from_vec(sol.coefficients.clone()) - &sys.v;
        assert!(grad.norm() < 1e-8 * sys.v.norm().max(1.0), "k = {k}");
    }
}

#[test]
fn literal_plus_sign_action_is_minimized_at_negated_coefficients() {
    // Tr[(∂H + i[A,H])²] is the same functional evaluated at −A.
    let n = 3;
    let h_c = PauliSum::from_real_terms(
        n,
        &[(0.7, &[(0, Pauli::Z), (1, Pauli::Z)]), (0.3, &[(2, Pauli::Z)]), (-0.4, &[(1, Pauli::Z)])],
    )
    .unwrap();
    let h_m = xy_mixer_hamiltonian(n, Topology::Chain).unwrap();
    let pool = generate_pool(&h_c, &h_m, 3).unwrap();
    let (h, dh) = interpolate(&h_c, &h_m, 0.4).unwrap();
    let sys = build_action_system(&h, &dh, &pool).unwrap();
    let sol = solve_coefficients(&sys.m, &sys.v, 1e-10).unwrap();
    let plus_sign = |coeffs: &[f64]| {
        let mut a = PauliSum::zero(n).unwrap();
        for (g, &x) in pool.generators.iter().zip(coeffs) {
            a = a.plus(&g.operator.scaled(c(x))).unwrap();
        }
        let g = dh.plus(&a.commutator(&h).unwrap().scaled(Complex64::new(0.0, 1.0))).unwrap();
        g.hs_inner(&g).unwrap().re * 8.0
    };
    let neg: Vec<f64> = sol.coefficients.iter().map(|x| -x).collect();
    let at_neg = plus_sign(&neg);
    assert!((at_neg - action(&h, &dh, &pool, &sol.coefficients).unwrap()).abs() < 1e-10);
    assert!(plus_sign(&sol.coefficients) > at_neg);
}

#[test]
fn gates_match_matrix_exponentials() {
    let n = 4;
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let amps: Vec<Complex64> = (0..16)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let psi = QuantumState::from_amplitudes(n, amps).unwrap();
    let vec_of = |s: &QuantumState| DVector::from_column_slice(s.amplitudes());
    let check = |got: &QuantumState, h: &PauliSum, t: f64| {
        let want = expm_i(&to_dense(h).unwrap(), t) * vec_of(&psi);
        let diff = (vec_of(got) - want).norm();
        assert!(diff < 1e-12, "diff {diff} for {h}");
    };

    let xy = PauliSum::from_real_terms(n, &[(1.0, &[(1, Pauli::X), (3, Pauli::X)]), (1.0, &[(1, Pauli::Y), (3, Pauli::Y)])]).unwrap();
    check(&psi.applied(|s| s.apply_xy_rotation(1, 3, 0.41)).unwrap(), &xy, 0.41);

    let tx = cdqaoa_core::qaoa::transverse_mixer_hamiltonian(n).unwrap();
    check(&psi.applied(|s| { s.apply_transverse_layer(-0.9); Ok(()) }).unwrap(), &tx, -0.9);

    for _ in 0..20 {
        let w = random_string(&mut rng, n).hermitian_word();
        let theta = rng.random_range(-2.0..2.0);
        let h = PauliSum::from_string(&w, c(1.0));
        check(&psi.applied(|s| s.apply_pauli_exponential(&w, theta)).unwrap(), &h, theta);
    }

    let inst = random_instance(9, n, 2, 0.5).unwrap();
    let ising = to_ising(&inst).unwrap();
    let diag = DiagonalCost::from_ising(&ising).unwrap();
    let hc = ising.to_pauli_sum(true).unwrap();
    check(&psi.applied(|s| s.apply_diagonal_phase(&diag, 1.3)).unwrap(), &hc, 1.3);
    // diagonal energies agree with the operator and with the expectation
    let dense = to_dense(&hc).unwrap();
    for b in 0..16 {
        assert!((dense[(b, b)].re - diag.energies()[b]).abs() < 1e-12);
    }
    let e = (vec_of(&psi).adjoint() * &dense * vec_of(&psi))[(0, 0)].re;
    assert!((psi.expectation(&diag).unwrap() - e).abs() < 1e-12);

    // Grover mixer against exp(−iβ|F><F|)
    let f = vec_of(&QuantumState::dicke(n, 2).unwrap());
    let proj = &f * f.adjoint();
    let want = (proj * Complex64::new(0.0, -0.77)).exp() * vec_of(&psi);
    let got = psi.applied(|s| s.apply_grover_mixer(0.77, 2)).unwrap();
    assert!((vec_of(&got) - want).norm() < 1e-12);

    // fused kernel for a sum of commuting words with one X mask
    let gen = PauliSum::from_real_terms(
        n,
        &[
            (0.6, &[(0, Pauli::X), (2, Pauli::Y), (1, Pauli::Z)]),
            (-0.6, &[(0, Pauli::Y), (2, Pauli::X), (1, Pauli::Z)]),
            (0.25, &[(0, Pauli::X), (2, Pauli::Y), (3, Pauli::Z)]),
            (-0.25, &[(0, Pauli::Y), (2, Pauli::X), (3, Pauli::Z)]),
        ],
    )
    .unwrap();
    let k = ExpKernel::new(&gen).unwrap();
    check(&psi.applied(|s| s.apply_kernel(&k, 0.83)).unwrap(), &gen, 0.83);
}

#[test]
fn pauli_expectations_match_dense() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let n = 3;
    let amps: Vec<Complex64> = (0..8)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let psi = QuantumState::from_amplitudes(n, amps).unwrap();
    let v = DVector::from_column_slice(psi.amplitudes());
    for _ in 0..50 {
        let w = random_string(&mut rng, n).hermitian_word();
        let want = (v.adjoint() * dense_of(&w) * &v)[(0, 0)].re;
        assert!((psi.pauli_expectation(&w).unwrap() - want).abs() < 1e-12);
    }
}
