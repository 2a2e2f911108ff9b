//! Standard gates and named states.

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{c, Ket, Operator, Tensor, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    CZ,
    /// `exp(i Z beta / 2)`
    ZRotation(f64),
    /// `exp(i X beta / 2) = H exp(i Z beta / 2) H`
    XRotation(f64),
}

impl Gate {
    pub fn matrix(&self) -> Operator {
        let z0 = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let rows: Vec<C64> = match *self {
            Gate::X => vec![z0, one, one, z0],
            Gate::Y => vec![z0, c(0.0, -1.0), c(0.0, 1.0), z0],
            Gate::Z => vec![one, z0, z0, -one],
            Gate::H => {
                let s = c(FRAC_1_SQRT_2, 0.0);
                vec![s, s, s, -s]
            }
            Gate::CZ => {
                return Operator::diagonal(&[one, one, one, -one]).expect("4x4 diagonal");
            }
            Gate::ZRotation(beta) => {
                let (s, co) = (beta / 2.0).sin_cos();
                vec![c(co, s), z0, z0, c(co, -s)]
            }
            Gate::XRotation(beta) => {
                let (s, co) = (beta / 2.0).sin_cos();
                vec![c(co, 0.0), c(0.0, s), c(0.0, s), c(co, 0.0)]
            }
        };
        Operator::from_rows(2, &rows).expect("2x2 gate")
    }
}

impl FromStr for Gate {
    type Err = Error;

    /// Parses `X`, `Y`, `Z`, `H`, `CZ`, `Rz(beta)` and `Rx(beta)` (beta in radians).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "X" => return Ok(Gate::X),
            "Y" => return Ok(Gate::Y),
            "Z" => return Ok(Gate::Z),
            "H" => return Ok(Gate::H),
            "CZ" => return Ok(Gate::CZ),
            _ => {}
        }
        let parse_arg = |prefix: &str| -> Option<f64> {
            let lower = t.to_ascii_lowercase();
            let rest = lower.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            rest.trim().parse().ok()
        };
        if let Some(beta) = parse_arg("rz") {
            return Ok(Gate::ZRotation(beta));
        }
        if let Some(beta) = parse_arg("rx") {
            return Ok(Gate::XRotation(beta));
        }
        Err(Error::UnknownGate(s.to_string()))
    }
}

pub fn gate(name: &str) -> Result<Operator> {
    Ok(name.parse::<Gate>()?.matrix())
}

pub fn z_rotation(beta: f64) -> Operator {
    Gate::ZRotation(beta).matrix()
}

pub fn x_rotation(beta: f64) -> Operator {
    Gate::XRotation(beta).matrix()
}

fn ket2(a: C64, b: C64) -> Ket {
    Ket::new(vec![a, b]).expect("nonzero qubit amplitudes")
}

pub fn zero() -> Ket {
    ket2(c(1.0, 0.0), c(0.0, 0.0))
}

pub fn one() -> Ket {
    ket2(c(0.0, 0.0), c(1.0, 0.0))
}

pub fn plus() -> Ket {
    ket2(c(1.0, 0.0), c(1.0, 0.0))
}

pub fn minus() -> Ket {
    ket2(c(1.0, 0.0), c(-1.0, 0.0))
}

/// Equatorial measurement basis vector `(|0> + sign e^{i alpha} |1>) / sqrt 2`.
pub fn alpha(angle: f64, positive: bool) -> Ket {
    let sign = if positive { 1.0 } else { -1.0 };
    ket2(c(1.0, 0.0), C64::from_polar(sign, angle))
}

/// `cos(phi/2)|0> - i e^{i gamma} sin(phi/2)|1>`
pub fn chi(phi: f64, gamma: f64) -> Ket {
    let (s, co) = (phi / 2.0).sin_cos();
    ket2(c(co, 0.0), c(0.0, -1.0) * C64::from_polar(s, gamma))
}

/// `cos(phi/2)|H> + e^{i theta} sin(phi/2)|V>`, polar angle `phi`, azimuth `theta`.
pub fn psi(phi: f64, theta: f64) -> Ket {
    let (s, co) = (phi / 2.0).sin_cos();
    ket2(c(co, 0.0), C64::from_polar(s, theta))
}

pub fn phi_plus() -> Ket {
    Ket::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).expect("bell state")
}

pub fn phi_minus() -> Ket {
    Ket::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).expect("bell state")
}

/// Diagonal CZ between qubits `a` and `b` (1-based) of an `n_qubits` register.
pub fn controlled_z(n_qubits: usize, a: usize, b: usize) -> Result<Operator> {
    for q in [a, b] {
        if q == 0 || q > n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
    }
    if a == b {
        return Err(Error::InvalidParameter(format!("CZ needs two distinct qubits, got {a} twice")));
    }
    let bit = |idx: usize, q: usize| (idx >> (n_qubits - q)) & 1;
    let diag: Vec<C64> = (0..1usize << n_qubits)
        .map(|idx| if bit(idx, a) & bit(idx, b) == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) })
        .collect();
    Operator::diagonal(&diag)
}

/// `|+>^n`
pub fn plus_register(n_qubits: usize) -> Ket {
    let mut state = plus();
    for _ in 1..n_qubits {
        state = state.tensor(&plus());
    }
    state
}

/// CZ along the chain `1-2-...-n` applied to `|+>^n`, for `n` in {2, 3}.
pub fn linear_cluster(n: usize) -> Result<Ket> {
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedQubits(n));
    }
    let mut state = plus_register(n);
    for left in 1..n {
        state = controlled_z(n, left, left + 1)?.apply(&state)?;
    }
    Ok(state)
}
