//! Pauli strings and complex-weighted Pauli sums over up to 64 qubits.
//!
//! A [`PauliString`] stores bit masks `x`, `z` and a phase power `k`, and
//! denotes the operator `i^k · X^x · Z^z` with every X factor written to the
//! left of every Z factor. On one qubit `Y = i·X·Z`, so masks `(1, 1)` with
//! phase 0 are `X·Z = -i·Y`.
//!
//! A [`PauliSum`] keys terms by `(x, z)` and weights the Hermitian Pauli word
//! `P(x, z)`, the tensor product of the letters I, X, Y, Z picked out by the
//! masks. Phases are folded into the coefficients, so a sum is Hermitian
//! exactly when all of its coefficients are real.
//!
//! Qubit `q` is bit `q` of each mask.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{check_dims, Error, Result};

pub const MAX_QUBITS: usize = 64;

/// Terms with magnitude below this are dropped after every sum-producing operation.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

pub(crate) fn qubit_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        Err(Error::QubitCount { n, max: MAX_QUBITS })
    } else {
        Ok(())
    }
}

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn new(n_qubits: usize, x: u64, z: u64, phase_power: u32) -> Result<Self> {
        check_qubits(n_qubits)?;
        let m = qubit_mask(n_qubits);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::InvalidParameter(format!(
                "mask has bits beyond qubit {}",
                n_qubits - 1
            )));
        }
        Ok(Self {
            n_qubits,
            x,
            z,
            phase: (phase_power % 4) as u8,
        })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 0, 0, 0)
    }

    /// The Hermitian word with the given letters; qubits not listed carry I.
    pub fn from_letters(n_qubits: usize, letters: &[(usize, Pauli)]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let (mut x, mut z) = (0u64, 0u64);
        for &(q, p) in letters {
            if q >= n_qubits {
                return Err(Error::InvalidParameter(format!(
                    "qubit {q} out of range for {n_qubits} qubits"
                )));
            }
            let bit = 1u64 << q;
            if (x | z) & bit != 0 {
                return Err(Error::InvalidParameter(format!("qubit {q} listed twice")));
            }
            let (xb, zb) = p.bits();
            if xb {
                x |= bit;
            }
            if zb {
                z |= bit;
            }
        }
        Ok(Self::word(n_qubits, x, z))
    }

    /// The Hermitian word `P(x, z)`; masks must already fit in `n_qubits`.
    pub(crate) fn word(n_qubits: usize, x: u64, z: u64) -> Self {
        Self {
            n_qubits,
            x,
            z,
            phase: ((x & z).count_ones() % 4) as u8,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn phase_power(&self) -> u32 {
        self.phase as u32
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn pauli_at(&self, q: usize) -> Pauli {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    /// The same masks with the phase that makes the string Hermitian.
    pub fn hermitian_word(&self) -> Self {
        Self::word(self.n_qubits, self.x, self.z)
    }

    /// `c` such that `self == c · P(x, z)`.
    pub fn word_coefficient(&self) -> Complex64 {
        let y = (self.x & self.z).count_ones() % 4;
        i_pow(self.phase as u32 + 4 - y)
    }

    pub fn is_hermitian(&self) -> bool {
        let y = (self.x & self.z).count_ones() % 4;
        (self.phase as u32 + 4 - y).is_multiple_of(2)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Group product `self · other` with the phase from moving Z factors of
    /// `self` past X factors of `other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let swaps = (self.z & other.x).count_ones();
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8,
        })
    }

    /// Action on a computational basis state: `self |b> = c |b'>`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (u64, Complex64) {
        let sign = 2 * ((self.z & b).count_ones() % 2);
        (b ^ self.x, i_pow(self.phase as u32 + sign))
    }

    fn fmt_letters(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.x | self.z == 0 {
            return write!(f, "I");
        }
        let mut first = true;
        for q in 0..self.n_qubits {
            let p = self.pauli_at(q);
            if p != Pauli::I {
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}{}", p.letter(), q)?;
                first = false;
            }
        }
        Ok(())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.phase as u32 + 4 - (self.x & self.z).count_ones() % 4) % 4 {
            0 => {}
            1 => write!(f, "i·")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i·")?,
        }
        self.fmt_letters(f)
    }
}

/// Complex-weighted sum of Hermitian Pauli words on a fixed number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<(u64, u64), Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(Self {
            n_qubits,
            terms: BTreeMap::new(),
        })
    }

    pub fn from_string(s: &PauliString, coeff: Complex64) -> Self {
        let mut out = Self {
            n_qubits: s.n_qubits,
            terms: BTreeMap::new(),
        };
        out.add_string(s, coeff)
            .expect("string and sum share qubit count");
        out
    }

    /// Sum of real multiples of Hermitian words given as letter lists.
    pub fn from_real_terms(n_qubits: usize, terms: &[(f64, &[(usize, Pauli)])]) -> Result<Self> {
        let mut out = Self::zero(n_qubits)?;
        for &(c, letters) in terms {
            let s = PauliString::from_letters(n_qubits, letters)?;
            out.add_string(&s, Complex64::new(c, 0.0))?;
        }
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending `(x, z)` key order.
    pub fn terms(&self) -> impl Iterator<Item = (PauliString, Complex64)> + '_ {
        self.terms
            .iter()
            .map(move |(&(x, z), &c)| (PauliString::word(self.n_qubits, x, z), c))
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex64 {
        self.terms
            .get(&(s.x, s.z))
            .copied()
            .unwrap_or_default()
    }

    /// Adds `coeff · s`, folding the string phase into the coefficient.
    pub fn add_string(&mut self, s: &PauliString, coeff: Complex64) -> Result<()> {
        check_dims(self.n_qubits, s.n_qubits)?;
        self.accumulate(s.x, s.z, coeff * s.word_coefficient());
        self.prune(PRUNE_TOL);
        Ok(())
    }

    fn accumulate(&mut self, x: u64, z: u64, c: Complex64) {
        *self.terms.entry((x, z)).or_default() += c;
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    pub fn plus(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            out.accumulate(x, z, c);
        }
        out.prune(PRUNE_TOL);
        Ok(out)
    }

    pub fn minus(&self, other: &PauliSum) -> Result<PauliSum> {
        self.plus(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> PauliSum {
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(&k, &v)| (k, v * c)).collect(),
        };
        out.prune(PRUNE_TOL);
        out
    }

    pub fn dagger(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(&k, v)| (k, v.conj())).collect(),
        }
    }

    /// Operator product `self · other`.
    pub fn product(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = PauliSum::zero(self.n_qubits)?;
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                let ab = a.multiply(&b)?;
                out.accumulate(ab.x, ab.z, ca * cb * ab.word_coefficient());
            }
        }
        out.prune(PRUNE_TOL);
        Ok(out)
    }

    /// `self·other − other·self`. Word pairs either commute and drop out, or
    /// anticommute and contribute twice their product.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = PauliSum::zero(self.n_qubits)?;
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                if a.commutes_with(&b) {
                    continue;
                }
                let ab = a.multiply(&b)?;
                out.accumulate(ab.x, ab.z, 2.0 * ca * cb * ab.word_coefficient());
            }
        }
        out.prune(PRUNE_TOL);
        Ok(out)
    }

    /// Normalized Hilbert–Schmidt inner product `Tr(self† · other) / 2^n`.
    pub fn hs_inner(&self, other: &PauliSum) -> Result<Complex64> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let (small, large, flip) = if self.terms.len() <= other.terms.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::default();
        for (k, &a) in &small.terms {
            if let Some(&b) = large.terms.get(k) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    pub fn trace_normalized(&self) -> Complex64 {
        self.terms.get(&(0, 0)).copied().unwrap_or_default()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn max_weight(&self) -> u32 {
        self.terms
            .keys()
            .map(|&(x, z)| (x | z).count_ones())
            .max()
            .unwrap_or(0)
    }

    /// Real parts of the coefficients, dropping terms that vanish.
    pub fn real_part(&self) -> PauliSum {
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(&k, c)| (k, Complex64::new(c.re, 0.0)))
                .collect(),
        };
        out.prune(PRUNE_TOL);
        out
    }

    /// Parses the textual form produced by `Display`, e.g.
    /// `+0.5·Z0 Z1 -0.25·X0 Y2 Z3` or `+(0.5-1i)·Y1`.
    pub fn parse(n_qubits: usize, text: &str) -> Result<PauliSum> {
        let mut out = PauliSum::zero(n_qubits)?;
        let text = text.replace('−', "-");
        let trimmed = text.trim();
        if trimmed == "0" || trimmed.is_empty() {
            return Ok(out);
        }
        for term in split_terms(trimmed) {
            let (coeff_txt, word_txt) = term
                .split_once('·')
                .ok_or_else(|| Error::Parse(format!("term `{term}` lacks `·`")))?;
            let coeff = parse_coefficient(coeff_txt.trim())?;
            let letters = parse_word(word_txt.trim())?;
            let s = PauliString::from_letters(n_qubits, &letters)?;
            out.add_string(&s, coeff)?;
        }
        Ok(out)
    }
}

fn split_terms(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut starts = vec![0usize];
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if depth == 0 && i > 0 => {
                let prev = bytes[i - 1];
                if prev != b'e' && prev != b'E' {
                    starts.push(i);
                }
            }
            _ => {}
        }
    }
    starts.push(text.len());
    starts
        .windows(2)
        .map(|w| text[w[0]..w[1]].trim())
        .filter(|t| !t.is_empty())
        .collect()
}

fn parse_coefficient(txt: &str) -> Result<Complex64> {
    let (sign, body) = match txt.as_bytes().first() {
        Some(b'+') => (1.0, &txt[1..]),
        Some(b'-') => (-1.0, &txt[1..]),
        _ => (1.0, txt),
    };
    let body = body.trim();
    let bad = || Error::Parse(format!("bad coefficient `{txt}`"));
    let c = if let Some(inner) = body.strip_prefix('(').and_then(|b| b.strip_suffix(')')) {
        let inner = inner.trim();
        let im_txt = inner.strip_suffix('i').ok_or_else(bad)?;
        // split at the last sign that is not part of an exponent
        let split = im_txt
            .char_indices()
            .filter(|&(i, ch)| {
                (ch == '+' || ch == '-')
                    && i > 0
                    && !matches!(im_txt.as_bytes()[i - 1], b'e' | b'E')
            })
            .map(|(i, _)| i)
            .last()
            .ok_or_else(bad)?;
        let re: f64 = im_txt[..split].trim().parse().map_err(|_| bad())?;
        let im: f64 = im_txt[split..].trim().parse().map_err(|_| bad())?;
        Complex64::new(re, im)
    } else {
        Complex64::new(body.parse::<f64>().map_err(|_| bad())?, 0.0)
    };
    Ok(c * sign)
}

fn parse_word(txt: &str) -> Result<Vec<(usize, Pauli)>> {
    if txt == "I" {
        return Ok(Vec::new());
    }
    txt.split_whitespace()
        .map(|tok| {
            let mut chars = tok.chars();
            let p = match chars.next() {
                Some('X') => Pauli::X,
                Some('Y') => Pauli::Y,
                Some('Z') => Pauli::Z,
                _ => return Err(Error::Parse(format!("bad Pauli factor `{tok}`"))),
            };
            let q: usize = chars
                .as_str()
                .parse()
                .map_err(|_| Error::Parse(format!("bad qubit index in `{tok}`")))?;
            Ok((q, p))
        })
        .collect()
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (s, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if c.im == 0.0 {
                if c.re.is_sign_negative() {
                    write!(f, "-{}", -c.re)?;
                } else {
                    write!(f, "+{}", c.re)?;
                }
            } else {
                let im_sign = if c.im.is_sign_negative() { '-' } else { '+' };
                write!(f, "+({}{}{}i)", c.re, im_sign, c.im.abs())?;
            }
            write!(f, "·")?;
            s.fmt_letters(f)?;
        }
        Ok(())
    }
}
