//! Dense matrix views of Pauli sums, for oracle checks on small systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliSum};

pub const DEFAULT_ORACLE_CAP: usize = 6;

pub type CMatrix = DMatrix<Complex64>;

fn letter_matrix(p: Pauli) -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match p {
        Pauli::I => [one, o, o, one],
        Pauli::X => [o, one, one, o],
        Pauli::Y => [o, -i, i, o],
        Pauli::Z => [one, o, o, -one],
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// Kronecker assembly `P_{n-1} ⊗ … ⊗ P_0`, so qubit 0 is the least
/// significant bit of the row/column index.
pub fn to_dense(sum: &PauliSum) -> Result<CMatrix> {
    to_dense_capped(sum, DEFAULT_ORACLE_CAP)
}

pub fn to_dense_capped(sum: &PauliSum, cap: usize) -> Result<CMatrix> {
    let n = sum.n_qubits();
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let dim = 1usize << n;
    let mut out = CMatrix::zeros(dim, dim);
    for (s, c) in sum.terms() {
        let mut m = letter_matrix(s.pauli_at(n - 1));
        for q in (0..n - 1).rev() {
            m = m.kronecker(&letter_matrix(s.pauli_at(q)));
        }
        out += m * c;
    }
    Ok(out)
}

/// `exp(-i·t·H)` for a dense matrix.
pub fn expm_i(h: &CMatrix, t: f64) -> CMatrix {
    (h * Complex64::new(0.0, -t)).exp()
}
