//! Spectral double covers of the projective line cut out by rank-2 twisted
//! Higgs fields: characteristic polynomial, branch locus and genus.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::higgs_toy::{higgs_matrices, ToyModelPoint};
use crate::poly::{cluster_roots, Poly};

/// Coefficients below this fraction of the entry scale squared count as zero.
pub const ZERO_COEFF_TOL: f64 = 1e-12;
/// Roots closer than this fraction of `max(1, |root|)` are merged.
pub const ROOT_CLUSTER_TOL: f64 = 1e-6;

pub type PolyMatrix = [[Poly; 2]; 2];

pub fn feasibility(g: usize, k: i64) -> bool {
    k >= 0 && k <= g as i64 + 1
}

/// Degree bounds for the four entries, or `None` when `k` is infeasible.
pub fn degree_bounds(g: usize, k: i64) -> Option<[[usize; 2]; 2]> {
    if !feasibility(g, k) {
        return None;
    }
    let g1 = g + 1;
    let k = k as usize;
    Some([[g1, 2 * (g1 - k)], [2 * k, g1]])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rank2TwistedHiggs {
    g: usize,
    k: i64,
    entries: PolyMatrix,
}

impl Rank2TwistedHiggs {
    pub fn new(g: usize, k: i64, entries: PolyMatrix) -> Result<Self> {
        let bounds = degree_bounds(g, k).ok_or(Error::Infeasible { g, k })?;
        for (row, (es, bs)) in entries.iter().zip(bounds).enumerate() {
            for (col, (e, bound)) in es.iter().zip(bs).enumerate() {
                if let Some(degree) = e.degree() {
                    if degree > bound {
                        return Err(Error::DegreeBound {
                            row,
                            col,
                            degree,
                            bound,
                        });
                    }
                }
            }
        }
        Ok(Self { g, k, entries })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn entries(&self) -> &PolyMatrix {
        &self.entries
    }

    pub fn entry_scale(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(Poly::scale)
            .fold(0.0, f64::max)
    }

    pub fn evaluate(&self, z: Complex64) -> [[Complex64; 2]; 2] {
        let e = &self.entries;
        [
            [e[0][0].eval(z), e[0][1].eval(z)],
            [e[1][0].eval(z), e[1][1].eval(z)],
        ]
    }
}

/// `(a1, a2)` = (trace, determinant), so `det(φ − λ) = λ² − a1 λ + a2`.
pub fn char_poly(phi: &Rank2TwistedHiggs) -> (Poly, Poly) {
    let e = &phi.entries;
    let a1 = &e[0][0] + &e[1][1];
    let a2 = &(&e[0][0] * &e[1][1]) - &(&e[0][1] * &e[1][0]);
    (a1, a2)
}

/// `‖φ² − a1 φ + a2‖` at `z`, relative to `max(1, ‖φ‖²)`.
pub fn cayley_hamilton_residual(phi: &Rank2TwistedHiggs, z: Complex64) -> f64 {
    let (a1, a2) = char_poly(phi);
    let (t, d) = (a1.eval(z), a2.eval(z));
    let p = phi.evaluate(z);
    let mut worst = 0.0f64;
    let mut norm2 = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            let sq = p[r][0] * p[0][c] + p[r][1] * p[1][c];
            let id = if r == c { d } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((sq - t * p[r][c] + id).norm());
            norm2 += p[r][c].norm_sqr();
        }
    }
    worst / norm2.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Finite(#[serde(with = "crate::wire::complex")] Complex64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub point: Point,
    pub multiplicity: usize,
}

/// Zeros of the discriminant as a section of `O(2g+2)`, infinity last.
pub fn branch_points(discriminant: &Poly, g: usize) -> Result<Vec<BranchPoint>> {
    let scale = discriminant.scale();
    let disc = discriminant.trimmed(ZERO_COEFF_TOL * scale);
    let n = match disc.degree() {
        None => return Err(Error::ZeroDiscriminant),
        Some(n) => n,
    };
    let total = 2 * g + 2;
    if n > total {
        return Err(Error::PolynomialDegree {
            degree: n,
            bound: total,
        });
    }
    let roots = disc.roots()?;
    let radius = ROOT_CLUSTER_TOL * roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let mut out: Vec<BranchPoint> = cluster_roots(&roots, radius)
        .into_iter()
        .map(|(p, multiplicity)| BranchPoint {
            point: Point::Finite(p),
            multiplicity,
        })
        .collect();
    out.push(BranchPoint {
        point: Point::Infinity,
        multiplicity: total - n,
    });
    Ok(out)
}

/// Riemann–Hurwitz for a double cover of the line with simple branching.
pub fn genus_from_branching(points: &[BranchPoint]) -> Result<usize> {
    if points.iter().any(|b| b.multiplicity > 1) {
        return Err(Error::SingularCurve);
    }
    let count = points.iter().filter(|b| b.multiplicity == 1).count();
    if count % 2 != 0 {
        return Err(Error::OddBranchCount(count));
    }
    Ok((count / 2).saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCurveInfo {
    pub a1: Poly,
    pub a2: Poly,
    pub discriminant: Poly,
    pub branch_points: Vec<BranchPoint>,
    pub smooth: bool,
    pub genus: Option<usize>,
    pub diagnostic: Option<String>,
}

/// Full spectral analysis; singular covers come back as reports, not errors.
pub fn analyze(phi: &Rank2TwistedHiggs) -> Result<SpectralCurveInfo> {
    let (a1, a2) = char_poly(phi);
    let four = Poly::constant(Complex64::new(4.0, 0.0));
    let raw = &(&a1 * &a1) - &(&four * &a2);
    let entry = phi.entry_scale();
    let discriminant = raw.trimmed(ZERO_COEFF_TOL * entry * entry);
    let mut info = SpectralCurveInfo {
        a1,
        a2,
        discriminant,
        branch_points: Vec::new(),
        smooth: false,
        genus: None,
        diagnostic: None,
    };
    if info.discriminant.is_zero() {
        info.diagnostic = Some(Error::ZeroDiscriminant.to_string());
        return Ok(info);
    }
    info.branch_points = branch_points(&info.discriminant, phi.g)?;
    match genus_from_branching(&info.branch_points) {
        Ok(g) => {
            info.smooth = true;
            info.genus = Some(g);
        }
        Err(Error::SingularCurve) => {
            info.diagnostic = Some(Error::SingularCurve.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(info)
}

pub fn genus(info: &SpectralCurveInfo) -> Result<usize> {
    info.genus.ok_or(Error::SingularCurve)
}

/// Entries of `z(z−1)(z−m)·B·Φ^u(z)`, a twisted field with `g = 1`, `k = 1`.
pub fn toy_to_twisted(point: &ToyModelPoint) -> Result<Rank2TwistedHiggs> {
    let one = Complex64::new(1.0, 0.0);
    let lin = |p: Complex64| Poly::new(vec![-p, one]);
    let (z0, z1, zm) = (lin(Complex64::new(0.0, 0.0)), lin(one), lin(point.m));
    // cofactor of each marked point in z(z−1)(z−m)
    let cof = [&z1 * &zm, &z0 * &zm, &z0 * &z1];
    let residues = higgs_matrices(point.u);
    let mut entries: PolyMatrix = Default::default();
    for (r, row) in entries.iter_mut().enumerate() {
        for (c, e) in row.iter_mut().enumerate() {
            let mut acc = Poly::zero();
            for (res, q) in residues.iter().zip(&cof) {
                acc = &acc + &q.scaled(res[(r, c)] * point.b);
            }
            *e = acc;
        }
    }
    Rank2TwistedHiggs::new(1, 1, entries)
}
