//! Hermitian operators and their orthonormal real embedding.
//!
//! Operators on `C^d` are embedded in `R^{d²}` using the basis
//! `{I/√d} ∪ {normalised generalised Gell-Mann matrices}`, which is orthonormal
//! under `Tr(AB)`. Real symmetric operators use the subset of that basis
//! without the antisymmetric (imaginary) elements, giving `R^{d(d+1)/2}`.
//! In both cases coordinate dot products equal trace inner products.
//!
//! Coordinate order: identity, then for each pair `j < k` the symmetric
//! element followed (complex case only) by the antisymmetric element, then
//! the diagonal elements `l = 1..d`.

use nalgebra::{Complex, DMatrix, DVector};
use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Tolerances};

/// Which family of self-adjoint operators is embedded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Complex,
    Real,
}

impl Field {
    pub fn embedding_dim(self, d: usize) -> usize {
        match self {
            Field::Complex => d * d,
            Field::Real => d * (d + 1) / 2,
        }
    }
}

/// A `d × d` Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator<T: Scalar> {
    matrix: DMatrix<Complex<T>>,
}

impl<T: Scalar> HermitianOperator<T> {
    /// Wraps `matrix`, checking that it equals its conjugate transpose.
    pub fn new(matrix: DMatrix<Complex<T>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let residual = (&matrix - matrix.adjoint()).norm();
        let tol = Tolerances::<T>::default().hermitian * matrix.norm().max(T::one());
        if residual > tol {
            return Err(Error::NotHermitian(residual.as_f64()));
        }
        // exact symmetrisation so downstream eigen-solvers see a Hermitian input
        let half = Complex::new(T::lit(0.5), T::zero());
        let matrix = (&matrix + matrix.adjoint()) * half;
        Ok(HermitianOperator { matrix })
    }

    pub fn from_real(matrix: DMatrix<T>) -> Result<Self> {
        Self::new(matrix.map(|x| Complex::new(x, T::zero())))
    }

    pub fn from_parts(re: DMatrix<T>, im: DMatrix<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::DimensionMismatch {
                expected: re.len(),
                found: im.len(),
            });
        }
        Self::new(DMatrix::from_fn(re.nrows(), re.ncols(), |r, c| {
            Complex::new(re[(r, c)], im[(r, c)])
        }))
    }

    pub fn identity(d: usize) -> Self {
        HermitianOperator {
            matrix: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        HermitianOperator {
            matrix: DMatrix::zeros(d, d),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) vector ψ.
    pub fn outer(psi: &DVector<Complex<T>>) -> Self {
        HermitianOperator {
            matrix: psi * psi.adjoint(),
        }
    }

    /// Projector onto the normalised vector ψ.
    pub fn pure(psi: &DVector<Complex<T>>) -> Self {
        let n = psi.norm();
        Self::outer(&psi.map(|z| z.unscale(n)))
    }

    /// Computational-basis projector `|i⟩⟨i|`.
    pub fn basis_projector(d: usize, i: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(i, i)] = Complex::one();
        HermitianOperator { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn real_part(&self) -> DMatrix<T> {
        self.matrix.map(|z| z.re)
    }

    pub fn imag_part(&self) -> DMatrix<T> {
        self.matrix.map(|z| z.im)
    }

    pub fn trace(&self) -> T {
        self.matrix
            .diagonal()
            .iter()
            .fold(T::zero(), |a, z| a + z.re)
    }

    /// `Re Tr(self · other)`.
    pub fn trace_product(&self, other: &Self) -> T {
        let mut acc = T::zero();
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                acc += (self.matrix[(i, j)] * other.matrix[(j, i)]).re;
            }
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianOperator {
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        HermitianOperator {
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn scale(&self, a: T) -> Self {
        HermitianOperator {
            matrix: self.matrix.map(|z| z.scale(a)),
        }
    }

    /// `p · self · p` for a Hermitian `p`.
    pub fn conjugate_by(&self, p: &Self) -> Self {
        HermitianOperator {
            matrix: &p.matrix * &self.matrix * &p.matrix,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        let mut ev: Vec<T> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    /// Eigenpairs sorted by descending eigenvalue; eigenvectors are columns.
    pub fn eigen_descending(&self) -> (Vec<T>, DMatrix<Complex<T>>) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    /// Frobenius norm of `self² − self`.
    pub fn idempotence_residual(&self) -> T {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    pub fn max_imag(&self) -> T {
        self.matrix.iter().fold(T::zero(), |a, z| a.max(z.im.abs()))
    }
}

/// Coordinates of `a` in the orthonormal basis for `field`.
pub fn embed<T: Scalar>(a: &DMatrix<Complex<T>>, field: Field) -> DVector<T> {
    let d = a.nrows();
    let m = field.embedding_dim(d);
    let mut x = DVector::zeros(m);
    let sqrt2 = T::lit(2.0).sqrt();
    let sqrtd = T::from_usize(d).expect("dimension fits").sqrt();

    x[0] = (0..d).fold(T::zero(), |s, j| s + a[(j, j)].re) / sqrtd;
    let mut idx = 1;
    for j in 0..d {
        for k in (j + 1)..d {
            x[idx] = (a[(j, k)].re + a[(k, j)].re) / sqrt2;
            idx += 1;
            if field == Field::Complex {
                x[idx] = (a[(k, j)].im - a[(j, k)].im) / sqrt2;
                idx += 1;
            }
        }
    }
    for l in 1..d {
        let lt = T::from_usize(l).expect("index fits");
        let c = T::one() / (lt * (lt + T::one())).sqrt();
        let head = (0..l).fold(T::zero(), |s, j| s + a[(j, j)].re);
        x[idx] = c * (head - lt * a[(l, l)].re);
        idx += 1;
    }
    debug_assert_eq!(idx, m);
    x
}

/// Inverse of [`embed`]; `x` must have length `field.embedding_dim(d)`.
pub fn unembed<T: Scalar>(x: &DVector<T>, d: usize, field: Field) -> DMatrix<Complex<T>> {
    let mut a = DMatrix::<Complex<T>>::zeros(d, d);
    let sqrt2 = T::lit(2.0).sqrt();
    let sqrtd = T::from_usize(d).expect("dimension fits").sqrt();

    for j in 0..d {
        a[(j, j)].re += x[0] / sqrtd;
    }
    let mut idx = 1;
    for j in 0..d {
        for k in (j + 1)..d {
            let s = x[idx] / sqrt2;
            a[(j, k)].re += s;
            a[(k, j)].re += s;
            idx += 1;
            if field == Field::Complex {
                let t = x[idx] / sqrt2;
                a[(j, k)].im -= t;
                a[(k, j)].im += t;
                idx += 1;
            }
        }
    }
    for l in 1..d {
        let lt = T::from_usize(l).expect("index fits");
        let c = T::one() / (lt * (lt + T::one())).sqrt();
        for j in 0..l {
            a[(j, j)].re += c * x[idx];
        }
        a[(l, l)].re -= lt * c * x[idx];
        idx += 1;
    }
    a
}

/// The `k`-th orthonormal basis operator.
pub fn basis_element<T: Scalar>(k: usize, d: usize, field: Field) -> HermitianOperator<T> {
    let mut e = DVector::zeros(field.embedding_dim(d));
    e[k] = T::one();
    HermitianOperator {
        matrix: unembed(&e, d, field),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(d: usize, vals: &[f64]) -> DMatrix<Complex<f64>> {
        let g = DMatrix::from_fn(d, d, |r, c| {
            Complex::new(
                vals[(r * d + c) % vals.len()],
                vals[(r * d + c + 7) % vals.len()],
            )
        });
        (&g + g.adjoint()) * Complex::new(0.5, 0.0)
    }

    #[test]
    fn basis_is_orthonormal_under_trace() {
        for (d, field) in [
            (3, Field::Complex),
            (4, Field::Complex),
            (3, Field::Real),
            (2, Field::Real),
        ] {
            let m = field.embedding_dim(d);
            for i in 0..m {
                let bi = basis_element::<f64>(i, d, field);
                assert!((&bi.matrix - bi.matrix.adjoint()).norm() < 1e-15);
                for j in 0..m {
                    let bj = basis_element::<f64>(j, d, field);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (bi.trace_product(&bj) - expected).abs() < 1e-14,
                        "d={d} i={i} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn identity_embeds_on_first_coordinate() {
        let x = embed(&DMatrix::<Complex<f64>>::identity(3, 3), Field::Complex);
        assert!((x[0] - 3f64.sqrt()).abs() < 1e-15);
        assert!(x.rows(1, 8).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::<Complex<f64>>::zeros(2, 2);
        m[(0, 1)] = Complex::new(1.0, 0.0);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian(_))
        ));
    }

    proptest! {
        #[test]
        fn embedding_round_trips(vals in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let a = random_hermitian(4, &vals);
            let x = embed(&a, Field::Complex);
            let back = unembed(&x, 4, Field::Complex);
            prop_assert!((back - &a).norm() < 1e-13);
        }

        #[test]
        fn dot_product_is_trace_product(vals in proptest::collection::vec(-1.0f64..1.0, 18)) {
            let a = random_hermitian(3, &vals[..9]);
            let b = random_hermitian(3, &vals[9..]);
            let dot = embed(&a, Field::Complex).dot(&embed(&b, Field::Complex));
            let tr = (&a * &b).trace().re;
            prop_assert!((dot - tr).abs() < 1e-12);
        }

        #[test]
        fn real_embedding_round_trips(vals in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let g = DMatrix::from_fn(3, 3, |r, c| vals[r * 3 + c]);
            let s = (&g + g.transpose()).map(|v| Complex::new(v, 0.0));
            let x = embed(&s, Field::Real);
            prop_assert_eq!(x.len(), 6);
            prop_assert!((unembed(&x, 3, Field::Real) - s).norm() < 1e-13);
        }
    }
}
