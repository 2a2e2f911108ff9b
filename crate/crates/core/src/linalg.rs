//! Dense complex vectors and matrices over qubit registers.
//!
//! Qubit 1 is the most significant bit of a basis index: `|q1 q2 ... qn>` has
//! index `q1 * 2^(n-1) + ... + qn`. [`Tensor::tensor`] keeps this ordering,
//! the left operand becoming the leading qubit.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default absolute tolerance for scalar and matrix comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Tolerance used when validating physical states (Hermiticity, trace, positivity).
pub const STATE_TOLERANCE: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn approx_eq(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Kronecker product of two operands of the same kind.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(DVector<C64>);

impl Ket {
    /// Builds a ket from raw amplitudes and normalizes it.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: DVector<C64>) -> Result<Self> {
        qubits_for_dim(v.len())?;
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Ket(v.unscale(norm)))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        qubits_for_dim(dim)?;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: index });
        }
        let mut v = DVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Ok(Ket(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Ket) -> C64 {
        self.0.dotc(&other.0)
    }

    /// `|<self|other>|^2`
    pub fn overlap(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// True when `|<self|other>| >= 1 - tol`.
    pub fn equals_up_to_phase(&self, other: &Ket, tol: f64) -> bool {
        self.dim() == other.dim() && self.inner(other).norm() >= 1.0 - tol
    }

    pub fn projector(&self) -> Operator {
        Operator(&self.0 * self.0.adjoint())
    }

    pub fn conjugate(&self) -> Ket {
        Ket(self.0.map(|z| z.conj()))
    }
}

impl Tensor for Ket {
    fn tensor(&self, other: &Ket) -> Ket {
        Ket(self.0.kronecker(&other.0))
    }
}

/// Square complex matrix acting on a qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        qubits_for_dim(m.nrows())?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Operator(m))
    }

    /// Row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let v: Vec<C64> = entries.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_rows(dim, &v)
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_row_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.0.nrows().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    /// Complex conjugate of every entry, without transposition.
    pub fn conjugate(&self) -> Operator {
        Operator(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator(self.0.map(|z| z * factor))
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        Operator(self.0.map(|z| z * factor))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Applies the operator to a ket and renormalizes the result.
    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if ket.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: ket.dim() });
        }
        Ket::from_vector(&self.0 * &ket.0)
    }

    /// `self * inner * self^dagger`
    pub fn sandwich(&self, inner: &Operator) -> Operator {
        Operator(&self.0 * &inner.0 * self.0.adjoint())
    }

    /// `<bra| self |ket>`
    pub fn expectation(&self, ket: &Ket) -> C64 {
        ket.0.dotc(&(&self.0 * &ket.0))
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// `(A + A^dagger) / 2`
    pub fn hermitian_part(&self) -> Operator {
        Operator((&self.0 + self.0.adjoint()).unscale(2.0))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_distance(&self, other: &Operator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.0 - &other.0).norm()
    }

    pub fn approx_eq(&self, other: &Operator, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Eigen-decomposition of the Hermitian part. Eigenvalues ascending,
    /// eigenvectors as matching columns.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = self.hermitian_part().0.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors =
            DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        (values, vectors)
    }

    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.hermitian_part().0.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues_hermitian()[0]
    }

    /// Lifts a single-qubit operator onto `target` (1-based) of an `n_qubits` register.
    pub fn embed(single: &Operator, target: usize, n_qubits: usize) -> Result<Operator> {
        if single.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: single.dim() });
        }
        if target == 0 || target > n_qubits {
            return Err(Error::QubitOutOfRange { index: target, n_qubits });
        }
        let id = Operator::identity(2);
        let mut acc: Option<Operator> = None;
        for q in 1..=n_qubits {
            let factor = if q == target { single } else { &id };
            acc = Some(match acc {
                None => factor.clone(),
                Some(a) => a.tensor(factor),
            });
        }
        Ok(acc.expect("n_qubits >= 1"))
    }

    /// Traces out qubit `traced` (1-based) of the register.
    pub fn partial_trace(&self, traced: usize) -> Result<Operator> {
        let n = self.n_qubits();
        if n < 2 {
            return Err(Error::UnsupportedQubits(n));
        }
        if traced == 0 || traced > n {
            return Err(Error::QubitOutOfRange { index: traced, n_qubits: n });
        }
        let shift = n - traced;
        let low_mask = (1usize << shift) - 1;
        let insert = |i: usize, b: usize| ((i & !low_mask) << 1) | (b << shift) | (i & low_mask);
        let out_dim = self.dim() / 2;
        let mut out = DMatrix::zeros(out_dim, out_dim);
        for i in 0..out_dim {
            for j in 0..out_dim {
                out[(i, j)] = self.0[(insert(i, 0), insert(j, 0))] + self.0[(insert(i, 1), insert(j, 1))];
            }
        }
        Ok(Operator(out))
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Operator) -> Operator {
        Operator(self.0.kronecker(&other.0))
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let z = self.0[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity within [`STATE_TOLERANCE`].
    pub fn new(op: Operator) -> Result<Self> {
        let dev = op.hermiticity_deviation();
        if dev > STATE_TOLERANCE {
            return Err(Error::NotHermitian(dev));
        }
        let tr = op.trace();
        if (tr - c(1.0, 0.0)).norm() > STATE_TOLERANCE {
            return Err(Error::BadTrace(tr.re));
        }
        let min = op.min_eigenvalue();
        if min < -STATE_TOLERANCE {
            return Err(Error::NotPositive(min));
        }
        Ok(DensityMatrix(op.hermitian_part()))
    }

    /// Divides by the trace, then validates.
    pub fn normalized(op: Operator) -> Result<Self> {
        let tr = op.trace();
        if tr.norm() < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Self::new(op.scale(tr.inv()))
    }

    pub fn from_ket(ket: &Ket) -> Self {
        DensityMatrix(ket.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        qubits_for_dim(dim)?;
        Ok(DensityMatrix(Operator::identity(dim).scale_real(1.0 / dim as f64)))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0.get(row, col)
    }

    /// `U rho U^dagger`; the result stays a valid state for unitary `U`.
    pub fn conjugate_by(&self, unitary: &Operator) -> DensityMatrix {
        DensityMatrix(unitary.sandwich(&self.0).hermitian_part())
    }

    /// Mixture `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("mixture weight {weight}")));
        }
        Ok(DensityMatrix(&self.0.scale_real(weight) + &other.0.scale_real(1.0 - weight)))
    }

    pub fn approx_eq(&self, other: &DensityMatrix, tol: f64) -> bool {
        self.0.approx_eq(&other.0, tol)
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.tensor(&other.0))
    }
}

/// Reduces a two-qubit state by tracing out `traced_qubit` (1 or 2).
pub fn partial_trace(rho: &DensityMatrix, traced_qubit: usize) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(DensityMatrix(rho.0.partial_trace(traced_qubit)?))
}

/// Principal square root of a Hermitian positive semidefinite operator.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero; anything more negative is
/// rejected as non-physical.
pub fn psd_sqrt(m: &Operator) -> Result<Operator> {
    let dev = m.hermiticity_deviation();
    if dev > STATE_TOLERANCE {
        return Err(Error::NotHermitian(dev));
    }
    let (values, vectors) = m.eigh();
    if values[0] < -STATE_TOLERANCE {
        return Err(Error::NotPositive(values[0]));
    }
    let roots: Vec<C64> = values.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    let root = &vectors * d * vectors.adjoint();
    Ok(Operator(root).hermitian_part())
}

/// Entrywise complex conjugate in the computational basis.
pub fn conjugate_entrywise(m: &Operator) -> Operator {
    m.conjugate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Gate};

    #[test]
    fn basis_tensor_bookkeeping() {
        let k = Ket::basis(2, 0).unwrap().tensor(&Ket::basis(2, 1).unwrap());
        assert_eq!(k, Ket::basis(4, 1).unwrap());
    }

    #[test]
    fn x_on_first_qubit_flips_leading_bit() {
        let op = Gate::X.matrix().tensor(&Operator::identity(2));
        let out = op.apply(&Ket::basis(4, 0).unwrap()).unwrap();
        assert!(out.equals_up_to_phase(&Ket::basis(4, 2).unwrap(), 1e-14));
        assert!((out.amplitudes()[2] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zz_fixes_phi_plus() {
        let zz = Gate::Z.matrix().tensor(&Gate::Z.matrix());
        let phi = catalog::phi_plus();
        let out = zz.apply(&phi).unwrap();
        assert!(out.as_vector().iter().zip(phi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn partial_trace_examples() {
        let bell = DensityMatrix::from_ket(&catalog::phi_plus());
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(partial_trace(&bell, 1).unwrap().approx_eq(&mixed, 1e-14));

        let zero = DensityMatrix::from_ket(&Ket::basis(2, 0).unwrap());
        let plus = DensityMatrix::from_ket(&catalog::plus());
        assert!(partial_trace(&zero.tensor(&plus), 2).unwrap().approx_eq(&zero, 1e-14));

        let quarter = DensityMatrix::maximally_mixed(4).unwrap();
        assert!(partial_trace(&quarter, 1).unwrap().approx_eq(&mixed, 1e-14));
    }

    #[test]
    fn partial_trace_rejects_wrong_dimension() {
        let one = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(partial_trace(&one, 1), Err(Error::DimensionMismatch { .. })));
        let bell = DensityMatrix::from_ket(&catalog::phi_plus());
        assert!(matches!(partial_trace(&bell, 3), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn partial_trace_three_qubits_middle() {
        let a = DensityMatrix::from_ket(&Ket::basis(2, 1).unwrap());
        let b = DensityMatrix::from_ket(&catalog::plus());
        let cc = DensityMatrix::from_ket(&catalog::psi(0.7, 0.3));
        let abc = a.tensor(&b).tensor(&cc);
        let reduced = abc.operator().partial_trace(2).unwrap();
        assert!(reduced.approx_eq(a.tensor(&cc).operator(), 1e-14));
    }

    #[test]
    fn psd_sqrt_examples() {
        let d = Operator::from_real_rows(2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
        let expect = Operator::from_real_rows(2, &[2.0, 0.0, 0.0, 3.0]).unwrap();
        assert!(psd_sqrt(&d).unwrap().approx_eq(&expect, 1e-12));

        let id = Operator::identity(2);
        assert!(psd_sqrt(&id).unwrap().approx_eq(&id, 1e-12));

        let p = catalog::plus().projector();
        assert!(psd_sqrt(&p).unwrap().approx_eq(&p, 1e-12));
    }

    #[test]
    fn psd_sqrt_errors() {
        let nonherm = Operator::from_real_rows(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(psd_sqrt(&nonherm), Err(Error::NotHermitian(_))));
        let negative = Operator::from_real_rows(2, &[1.0, 0.0, 0.0, -0.1]).unwrap();
        assert!(matches!(psd_sqrt(&negative), Err(Error::NotPositive(_))));
        let tiny = Operator::from_real_rows(2, &[1.0, 0.0, 0.0, -1e-12]).unwrap();
        let root = psd_sqrt(&tiny).unwrap();
        assert!(root.get(1, 1).norm() < 1e-15);
    }

    #[test]
    fn conjugation_examples() {
        let y_plus = catalog::psi(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2).projector();
        let y_minus = catalog::psi(std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2).projector();
        assert!(conjugate_entrywise(&y_plus).approx_eq(&y_minus, 1e-15));

        let real = Operator::from_real_rows(2, &[0.3, -1.0, 2.0, 5.0]).unwrap();
        assert_eq!(conjugate_entrywise(&real), real);

        let m = Operator::from_rows(2, &[c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-2.0, 0.0)]).unwrap();
        assert_eq!(conjugate_entrywise(&conjugate_entrywise(&m)), m);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(DensityMatrix::new(Operator::identity(2)), Err(Error::BadTrace(_))));
        let neg = Operator::from_real_rows(2, &[1.2, 0.0, 0.0, -0.2]).unwrap();
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive(_))));
        let nonherm = Operator::from_rows(2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!(matches!(DensityMatrix::new(nonherm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn invalid_dimensions() {
        assert!(matches!(Ket::new(vec![c(1.0, 0.0); 3]), Err(Error::InvalidDimension(3))));
        assert!(matches!(Ket::new(vec![c(0.0, 0.0); 2]), Err(Error::ZeroNorm)));
        assert!(matches!(Operator::from_rows(1, &[c(1.0, 0.0)]), Err(Error::InvalidDimension(1))));
    }
}
