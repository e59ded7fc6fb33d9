//! A one-parameter family of parabolic connections `∇^u` and Higgs fields
//! `Φ^u` on the projective line with four marked points `0, 1, m, ∞`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::spectra::sort_eigenvalues;

pub type Mat2 = Matrix2<Complex64>;

/// Minimum distance from a pole at which a one-form may be evaluated.
pub const POLE_TOL: f64 = 1e-12;
/// Relative spread allowed across samples of `z(z−1)(z−m)·det Φ`.
pub const CONSTANCY_TOL: f64 = 1e-9;
/// Relative eigenvalue separation below which a 2×2 residue counts as having a double eigenvalue.
pub const DEFECTIVE_TOL: f64 = 1e-6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyModelPoint {
    #[serde(with = "crate::wire::complex")]
    pub m: Complex64,
    #[serde(with = "crate::wire::complex")]
    pub u: Complex64,
    #[serde(with = "crate::wire::complex")]
    pub b: Complex64,
}

impl ToyModelPoint {
    pub fn new(m: Complex64, u: Complex64, b: Complex64) -> Result<Self> {
        if !(m.is_finite() && u.is_finite() && b.is_finite()) {
            return Err(Error::Invalid("toy-model parameters must be finite".into()));
        }
        if m == real(0.0) || m == real(1.0) {
            return Err(Error::DegenerateMarkedPoint(m));
        }
        Ok(Self { m, u, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Pole {
    Finite(#[serde(with = "crate::wire::complex")] Complex64),
    Infinity,
}

/// `Σ_p R_p dz/(z − p)` over finite poles; the residue at infinity is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMatrixOneForm {
    poles: Vec<(Complex64, Mat2)>,
}

impl RationalMatrixOneForm {
    pub fn new(poles: Vec<(Complex64, Mat2)>) -> Self {
        Self { poles }
    }

    pub fn finite_poles(&self) -> &[(Complex64, Mat2)] {
        &self.poles
    }

    fn finite_sum(&self) -> Mat2 {
        self.poles.iter().fold(Mat2::zeros(), |acc, (_, r)| acc + r)
    }

    pub fn residue_at_infinity(&self) -> Mat2 {
        -self.finite_sum()
    }

    /// All residues, the one at infinity last.
    pub fn residues(&self) -> Vec<(Pole, Mat2)> {
        let mut out: Vec<(Pole, Mat2)> = self
            .poles
            .iter()
            .map(|&(p, r)| (Pole::Finite(p), r))
            .collect();
        out.push((Pole::Infinity, self.residue_at_infinity()));
        out
    }

    pub fn residue_sum(&self) -> Mat2 {
        let s = self.finite_sum();
        s + (-s)
    }

    pub fn evaluate(&self, z: Complex64) -> Result<Mat2> {
        let mut acc = Mat2::zeros();
        for (p, r) in &self.poles {
            let d = z - p;
            if d.norm() <= POLE_TOL {
                return Err(Error::OnPole(z));
            }
            acc += r.map(|x| x / d);
        }
        Ok(acc)
    }
}

/// Residues of `∇^u` at `0, 1, m`.
pub fn connection_matrices(u: Complex64) -> [Mat2; 3] {
    let q = 0.25;
    [
        Mat2::new(real(-q), real(0.0), real(-q), real(q)),
        Mat2::new(real(0.0), real(q), real(q), real(0.0)),
        Mat2::new(real(-q), u * (2.0 * q), real(0.0), real(q)),
    ]
}

/// Residues of `Φ^u` at `0, 1, m`.
pub fn higgs_matrices(u: Complex64) -> [Mat2; 3] {
    let one = real(1.0);
    let zero = real(0.0);
    [
        Mat2::new(zero, zero, one - u, zero),
        Mat2::new(u, -u, u, -u),
        Mat2::new(-u, u * u, -one, u),
    ]
}

fn form_at(point: &ToyModelPoint, residues: [Mat2; 3]) -> RationalMatrixOneForm {
    let [r0, r1, rm] = residues;
    RationalMatrixOneForm::new(vec![(real(0.0), r0), (real(1.0), r1), (point.m, rm)])
}

pub fn connection_form(point: &ToyModelPoint) -> RationalMatrixOneForm {
    form_at(point, connection_matrices(point.u))
}

/// `Φ^u` without the base scale `B`.
pub fn higgs_form(point: &ToyModelPoint) -> RationalMatrixOneForm {
    form_at(point, higgs_matrices(point.u))
}

pub fn det2(a: &Mat2) -> Complex64 {
    a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
}

pub fn is_nilpotent(a: &Mat2, tol: f64) -> bool {
    (a * a).norm() <= tol
}

/// Eigenvalues of a 2×2 matrix from its characteristic polynomial, sorted.
pub fn eigenvalues2(a: &Mat2) -> [Complex64; 2] {
    let half_tr = (a[(0, 0)] + a[(1, 1)]) / 2.0;
    let root = (half_tr * half_tr - det2(a)).sqrt();
    let mut v = [half_tr - root, half_tr + root];
    sort_eigenvalues(&mut v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitchinCoordinate {
    #[serde(with = "crate::wire::complex")]
    pub value: Complex64,
    /// Largest sample deviation from `value`, relative to the natural size of the samples.
    pub spread: f64,
}

/// Sample points well outside the marked points, fixed for reproducibility.
fn sample_points(m: Complex64) -> [Complex64; 5] {
    let r = m.norm().max(1.0);
    let mut out = [real(0.0); 5];
    for (j, z) in out.iter_mut().enumerate() {
        let jf = j as f64;
        *z = Complex64::from_polar(r * (1.6 + 0.35 * jf), 0.7 + 1.3 * jf);
    }
    out
}

/// `c = z(z−1)(z−m)·det(B·Φ^u(z))`, checked to be independent of `z`.
pub fn hitchin_coordinate(point: &ToyModelPoint) -> Result<HitchinCoordinate> {
    let phi = higgs_form(point);
    let b2 = point.b * point.b;
    let mut samples = Vec::with_capacity(5);
    for z in sample_points(point.m) {
        let d = z * (z - 1.0) * (z - point.m);
        samples.push(d * det2(&phi.evaluate(z)?) * b2);
    }
    let value = samples.iter().sum::<Complex64>() / samples.len() as f64;
    let u = point.u.norm();
    let natural = b2.norm() * (1.0 + u).powi(3) * (1.0 + point.m.norm());
    let scale = samples.iter().map(|s| s.norm()).fold(natural, f64::max);
    let spread = if scale == 0.0 {
        0.0
    } else {
        samples
            .iter()
            .map(|s| (s - value).norm())
            .fold(0.0, f64::max)
            / scale
    };
    if spread > CONSTANCY_TOL {
        return Err(Error::NotConstant(spread));
    }
    Ok(HitchinCoordinate { value, spread })
}

/// `exp(2πi λ)` over the eigenvalues `λ` of a diagonalizable residue.
pub fn local_monodromy_eigenvalues(residue: &Mat2) -> Result<[Complex64; 2]> {
    let [l0, l1] = eigenvalues2(residue);
    let scale = residue.norm().max(f64::MIN_POSITIVE);
    if (l0 - l1).norm() <= DEFECTIVE_TOL * scale {
        let shifted = residue - Mat2::identity() * ((l0 + l1) / 2.0);
        if shifted.norm() > DEFECTIVE_TOL * scale {
            return Err(Error::NotDiagonalizable);
        }
    }
    let two_pi_i = c(0.0, 2.0 * PI);
    let mut out = [(two_pi_i * l0).exp(), (two_pi_i * l1).exp()];
    sort_eigenvalues(&mut out);
    Ok(out)
}

/// `[[0, P], [1, 0]]`, the normal form on the smallest stratum.
pub fn small_stratum_form(p: &Poly) -> Result<[[Poly; 2]; 2]> {
    if let Some(d) = p.degree() {
        if d > 4 {
            return Err(Error::PolynomialDegree {
                degree: d,
                bound: 4,
            });
        }
    }
    Ok([
        [Poly::zero(), p.clone()],
        [Poly::constant(real(1.0)), Poly::zero()],
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardConstants {
    pub weights: [f64; 2],
    #[serde(with = "crate::wire::matrix")]
    pub residue: nalgebra::DMatrix<Complex64>,
    #[serde(with = "crate::wire::complex_vec")]
    pub monodromy: Vec<Complex64>,
}

/// Parabolic data at a branch point of a double cover, in the adapted frame.
pub fn parabolic_pushforward_constants() -> PushforwardConstants {
    let residue =
        nalgebra::DMatrix::from_row_slice(2, 2, &[real(0.0), real(0.0), real(0.0), real(0.5)]);
    PushforwardConstants {
        weights: [0.0, 0.5],
        residue,
        monodromy: vec![real(1.0), real(-1.0)],
    }
}
