//! Banded LU with partial pivoting (LAPACK `gbtf2` layout), for real or
//! complex matrices, solving against complex right-hand sides.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Entry type of a band matrix over the real field `T`.
pub trait BandScalar<T: Real>:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn zero() -> Self;
    fn from_real(x: T) -> Self;
    fn modulus(self) -> T;
    fn mul_c(self, z: Complex<T>) -> Complex<T>;
    fn div_c(z: Complex<T>, s: Self) -> Complex<T>;
}

impl<T: Real> BandScalar<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn from_real(x: T) -> Self {
        x
    }
    fn modulus(self) -> T {
        self.abs()
    }
    #[inline]
    fn mul_c(self, z: Complex<T>) -> Complex<T> {
        Complex::new(z.re * self, z.im * self)
    }
    #[inline]
    fn div_c(z: Complex<T>, s: Self) -> Complex<T> {
        Complex::new(z.re / s, z.im / s)
    }
}

impl<T: Real> BandScalar<T> for Complex<T> {
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn from_real(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn mul_c(self, z: Complex<T>) -> Complex<T> {
        self * z
    }
    #[inline]
    fn div_c(z: Complex<T>, s: Self) -> Complex<T> {
        z / s
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored
/// column-major with `kl` extra rows reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix<S> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<S>,
}

impl<S: Copy> BandMatrix<S> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }
}

impl<S> BandMatrix<S> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

impl<S: Copy> BandMatrix<S> {
    pub fn new<T: Real>(n: usize, kl: usize, ku: usize) -> Self
    where
        S: BandScalar<T>,
    {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![S::zero(); ldab * n],
        }
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> Option<S> {
        self.in_band(i, j).then(|| self.ab[self.idx(i, j)])
    }

    /// In-place LU factorization with row interchanges.
    pub fn factor<T: Real>(mut self) -> Result<BandLu<S>>
    where
        S: BandScalar<T>,
    {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let ldab = self.ldab;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.ab[col].modulus();
            for r in 1..=km {
                let m = self.ab[col + r].modulus();
                if m > best {
                    best = m;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if !(best > T::zero()) {
                return Err(Error::SingularShift {
                    re: f64::NAN,
                    im: f64::NAN,
                    pivot: j,
                });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = self.ab[col];
                for r in 1..=km {
                    self.ab[col + r] = self.ab[col + r] / piv;
                }
                for c in j + 1..=ju {
                    let u = self.ab[self.idx(j, c)];
                    if u.modulus() == T::zero() {
                        continue;
                    }
                    let dst = self.idx(j + 1, c);
                    for r in 0..km {
                        let l = self.ab[col + 1 + r];
                        self.ab[dst + r] = self.ab[dst + r] - l * u;
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu<S> {
    m: BandMatrix<S>,
    ipiv: Vec<usize>,
}

impl<S: Copy> BandLu<S> {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place<T: Real>(&self, b: &mut [Complex<T>])
    where
        S: BandScalar<T>,
    {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let kv = kl + ku;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj.re == T::zero() && bj.im == T::zero() {
                continue;
            }
            let km = kl.min(n - 1 - j);
            let col = j * m.ldab + kv;
            for r in 1..=km {
                b[j + r] -= m.ab[col + r].mul_c(bj);
            }
        }
        for j in (0..n).rev() {
            let col = j * m.ldab + kv;
            b[j] = S::div_c(b[j], m.ab[col]);
            let bj = b[j];
            if bj.re == T::zero() && bj.im == T::zero() {
                continue;
            }
            let top = j.saturating_sub(kv);
            let base = j * m.ldab + kv - j;
            for i in top..j {
                b[i] -= m.ab[base + i].mul_c(bj);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::DenseMatrix;

    type C = Complex<f64>;

    fn entry(i: usize, j: usize) -> f64 {
        // deliberately small diagonal so pivoting is exercised
        ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 0.1 } else { 0.0 }
    }

    #[test]
    fn real_band_matches_dense_solve() {
        let (n, kl, ku) = (12, 2, 3);
        let mut band = BandMatrix::<f64>::new::<f64>(n, kl, ku);
        let dense = DenseMatrix::from_fn(n, |i, j| {
            if i + ku >= j && j + kl >= i {
                C::new(entry(i, j), 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        for i in 0..n {
            for j in 0..n {
                if band.in_band(i, j) {
                    band.set(i, j, entry(i, j));
                }
            }
        }
        let lu = band.factor::<f64>().unwrap();
        let rhs: Vec<C> = (0..n).map(|i| C::new(i as f64, 1.0 - i as f64 * 0.5)).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let back = dense.matvec(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn complex_band_matches_dense_solve() {
        let (n, kl, ku) = (9, 3, 1);
        let val = |i: usize, j: usize| C::new(entry(i, j), (i as f64 - j as f64) * 0.3);
        let mut band = BandMatrix::<C>::new::<f64>(n, kl, ku);
        for i in 0..n {
            for j in 0..n {
                if band.in_band(i, j) {
                    band.set(i, j, val(i, j));
                }
            }
        }
        let dense = DenseMatrix::from_fn(n, |i, j| band.get(i, j).unwrap_or(C::new(0.0, 0.0)));
        let lu = band.factor::<f64>().unwrap();
        let rhs: Vec<C> = (0..n).map(|i| C::new(1.0, i as f64)).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        for (a, b) in dense.matvec(&x).iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn singular_band_reports_pivot() {
        let mut band = BandMatrix::<f64>::new::<f64>(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(2, 2, 1.0);
        match band.factor::<f64>() {
            Err(Error::SingularShift { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }
}
