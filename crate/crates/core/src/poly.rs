//! Dense univariate polynomials with complex coefficients, stored ascending.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectra::{cluster_values, matrix_eigenvalues};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    #[serde(with = "crate::wire::complex_vec")]
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs
            .last()
            .is_some_and(|c| *c == Complex64::new(0.0, 0.0))
        {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `Π (z − r)`.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Self::constant(Complex64::new(1.0, 0.0));
        for &r in roots {
            p = &p * &Self::new(vec![-r, Complex64::new(1.0, 0.0)]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Drops leading coefficients with modulus at most `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let mut c = self.coeffs.clone();
        while c.last().is_some_and(|x| x.norm() <= tol) {
            c.pop();
        }
        Self { coeffs: c }
    }

    /// Finite roots from companion-matrix eigenvalues, each refined by one Newton step.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            None | Some(0) => return Ok(Vec::new()),
            Some(n) => n,
        };
        let lead = self.coeffs[n];
        let mut companion = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let raw = matrix_eigenvalues(&companion, false)?;
        let dp = self.derivative();
        Ok(raw
            .into_iter()
            .map(|r| {
                let d = dp.eval(r);
                let step = self.eval(r) / d;
                if d.norm() > 0.0 && step.is_finite() {
                    r - step
                } else {
                    r
                }
            })
            .collect())
    }
}

/// Roots grouped by single-linkage clustering at `radius`, each cluster
/// reported by its mean and size.
pub fn cluster_roots(roots: &[Complex64], radius: f64) -> Vec<(Complex64, usize)> {
    cluster_values(roots, radius)
        .into_iter()
        .map(|idx| {
            let sum: Complex64 = idx.iter().map(|&i| roots[i]).sum();
            (sum / idx.len() as f64, idx.len())
        })
        .collect()
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(zero)
                        + o.coeffs.get(i).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn arithmetic() {
        let p = Poly::from_real(&[1., 1.]);
        let q = &p * &p;
        assert_eq!(q, Poly::from_real(&[1., 2., 1.]));
        assert_eq!((&q - &q).degree(), None);
        assert_eq!(q.eval(c(2., 0.)), c(9., 0.));
        assert_eq!(q.derivative(), Poly::from_real(&[2., 2.]));
    }

    #[test]
    fn planted_roots() {
        let planted = [c(0.3, -1.2), c(-2., 0.5), c(1.5, 1.5), c(0., 0.)];
        let mut roots = Poly::from_roots(&planted).roots().unwrap();
        for p in planted {
            let (i, d) = roots
                .iter()
                .enumerate()
                .map(|(i, r)| (i, (r - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-8, "{p} missed by {d}");
            roots.remove(i);
        }
    }

    #[test]
    fn double_root_clusters() {
        let planted = [c(1., 1.), c(1., 1.), c(-0.5, 2.)];
        let roots = Poly::from_roots(&planted).roots().unwrap();
        let clusters = cluster_roots(&roots, 1e-8 * 2.1);
        assert_eq!(clusters.len(), 2);
        let double = clusters.iter().find(|(_, m)| *m == 2).unwrap();
        assert!((double.0 - c(1., 1.)).norm() < 1e-8);
    }
}
