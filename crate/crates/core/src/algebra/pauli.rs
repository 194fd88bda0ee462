use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{kron, CMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let data = match self {
            Pauli::I => vec![one, o, o, one],
            Pauli::X => vec![o, one, one, o],
            Pauli::Y => vec![o, -i, i, o],
            Pauli::Z => vec![one, o, o, -one],
        };
        CMatrix::from_vec(data).expect("2x2")
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidPauli(other)),
        }
    }
}

/// Tensor product of single-qubit Paulis with a real coefficient.
/// Factor 0 is qubit 1 (the leftmost Kronecker factor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PauliRepr", into = "PauliRepr")]
pub struct PauliString {
    factors: Vec<Pauli>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct PauliRepr {
    label: String,
    #[serde(default = "one")]
    coeff: f64,
}

fn one() -> f64 {
    1.0
}

impl From<PauliString> for PauliRepr {
    fn from(p: PauliString) -> Self {
        PauliRepr {
            label: p.label(),
            coeff: p.coeff,
        }
    }
}

impl TryFrom<PauliRepr> for PauliString {
    type Error = Error;

    fn try_from(r: PauliRepr) -> Result<Self> {
        Ok(r.label.parse::<PauliString>()?.with_coeff(r.coeff))
    }
}

impl PauliString {
    pub fn new(factors: Vec<Pauli>, coeff: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidProblem("empty Pauli string".into()));
        }
        Ok(PauliString { factors, coeff })
    }

    /// Single-qubit `p` acting on `qubit` (0-based) of an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut factors = vec![Pauli::I; n];
        factors[qubit] = p;
        PauliString { factors, coeff: 1.0 }
    }

    pub fn with_coeff(mut self, coeff: f64) -> Self {
        self.coeff = coeff;
        self
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&p| p == Pauli::I)
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|p| p.label()).collect()
    }

    pub fn matrix(&self) -> CMatrix {
        let mut m = self.factors[0].matrix();
        for p in &self.factors[1..] {
            m = kron(&m, &p.matrix());
        }
        m.scale_real(self.coeff)
    }

    /// All `4^n − 1` non-identity strings with unit coefficient, ordered with
    /// qubit 1 as the most significant digit over I < X < Y < Z.
    pub fn all_non_identity(n: usize) -> Vec<PauliString> {
        let total = 4usize.pow(n as u32);
        (1..total)
            .map(|mut idx| {
                let mut factors = vec![Pauli::I; n];
                for q in (0..n).rev() {
                    factors[q] = Pauli::ALL[idx % 4];
                    idx /= 4;
                }
                PauliString { factors, coeff: 1.0 }
            })
            .collect()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(Pauli::try_from)
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(factors, 1.0)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeff == 1.0 {
            write!(f, "{}", self.label())
        } else {
            write!(f, "{}*{}", self.coeff, self.label())
        }
    }
}

/// Matrix of `coeff * P` for a Pauli string label such as `"XZ"`.
pub fn pauli_string_matrix(s: &PauliString) -> CMatrix {
    s.matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_is_diagonal() {
        let z = "Z".parse::<PauliString>().unwrap().matrix();
        assert_eq!(z, CMatrix::diag(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
    }

    #[test]
    fn xx_is_antidiagonal() {
        let xx = "XX".parse::<PauliString>().unwrap().matrix();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r + c == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx[(r, c)], C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn scaled_identity() {
        let m = "I".parse::<PauliString>().unwrap().with_coeff(3.0).matrix();
        assert_eq!(m, CMatrix::identity(2).scale_real(3.0));
    }

    #[test]
    fn rejects_bad_labels() {
        assert_eq!("XQ".parse::<PauliString>(), Err(Error::InvalidPauli('Q')));
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn enumeration_counts_and_hermiticity() {
        let all = PauliString::all_non_identity(2);
        assert_eq!(all.len(), 15);
        assert_eq!(all[0].label(), "IX");
        assert_eq!(all[14].label(), "ZZ");
        assert!(all.iter().all(|p| p.matrix().is_hermitian(0.0)));
    }

    #[test]
    fn qubit_one_is_leftmost_factor() {
        let x1 = PauliString::single(2, 0, Pauli::X).matrix();
        assert_eq!(x1, kron(&Pauli::X.matrix(), &CMatrix::identity(2)));
    }
}
