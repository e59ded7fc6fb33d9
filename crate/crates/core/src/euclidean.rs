//! Closed-form band theory of Euclidean (genus one) crystals `C / <1, τ>`.
//!
//! Momenta pair with lattice vectors through the real dot product
//! `k·γ = k_x γ_x + k_y γ_y`, so the reciprocal lattice is the set of `k`
//! with `k·γ ∈ Z` for all `γ`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Relative tolerance for treating two empty-lattice energies as one level.
pub const LEVEL_TIE_TOL: f64 = 1e-12;
const THETA_TERM_CUTOFF: f64 = 1e-15;
const THETA_MAX_TERMS: usize = 1_000_000;

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EuclideanLattice {
    #[serde(with = "crate::wire::complex")]
    tau: Complex64,
}

impl EuclideanLattice {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.is_finite() {
            return Err(Error::BadTau(tau));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// `(γ_1, γ_2) = ((1, 0), (Re τ, Im τ))`.
    pub fn basis(&self) -> [Vec2; 2] {
        [[1.0, 0.0], [self.tau.re, self.tau.im]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReciprocalLattice {
    pub w1: Vec2,
    pub w2: Vec2,
    /// Whether `<1, τ/|τ|²>`, read as real vectors, spans the same lattice.
    pub conjugate_formula_agrees: bool,
}

impl ReciprocalLattice {
    pub fn point(&self, a: f64, b: f64) -> Vec2 {
        [
            a * self.w1[0] + b * self.w2[0],
            a * self.w1[1] + b * self.w2[1],
        ]
    }
}

/// Dual basis with `w_i · γ_j = δ_ij`, from the 2×2 linear system.
pub fn reciprocal(lattice: &EuclideanLattice) -> Result<ReciprocalLattice> {
    let [_, [a, b]] = lattice.basis();
    if !(b > 0.0) || !a.is_finite() {
        return Err(Error::BadTau(lattice.tau));
    }
    let w1 = [1.0, -a / b];
    let w2 = [0.0, 1.0 / b];

    // coordinates of 1 and τ/|τ|² in the (w1, w2) basis are (v·γ1, v·γ2)
    let t2 = lattice.tau.norm_sqr();
    let v2 = [a / t2, b / t2];
    let coords = [[1.0, a], [dot(v2, [1.0, 0.0]), dot(v2, [a, b])]];
    let is_int = |x: f64| (x - x.round()).abs() <= 1e-12 * x.abs().max(1.0);
    let det = coords[0][0] * coords[1][1] - coords[0][1] * coords[1][0];
    let agrees = coords.iter().flatten().all(|&x| is_int(x)) && (det.abs() - 1.0).abs() <= 1e-12;
    if !agrees {
        log::warn!(
            "complex-number dual <1, tau/|tau|^2> differs from the pairing dual for tau = {}",
            lattice.tau
        );
    }
    Ok(ReciprocalLattice {
        w1,
        w2,
        conjugate_formula_agrees: agrees,
    })
}

/// Coordinates of `k` in the dual basis, i.e. `(k·γ_1, k·γ_2)`.
pub fn dual_coordinates(k: Vec2, lattice: &EuclideanLattice) -> Vec2 {
    let [g1, g2] = lattice.basis();
    [dot(k, g1), dot(k, g2)]
}

/// Representative of `k` whose dual coordinates lie in `[0, 1)²`.
pub fn fold(k: Vec2, lattice: &EuclideanLattice) -> Result<Vec2> {
    let rec = reciprocal(lattice)?;
    let [c1, c2] = dual_coordinates(k, lattice);
    let g = rec.point(c1.floor(), c2.floor());
    Ok([k[0] - g[0], k[1] - g[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmptyLatticeBands {
    /// The `n_bands` lowest values of `‖k − G‖²`, ascending.
    pub energies: Vec<f64>,
    /// Distinct levels among `energies`; multiplicities count every tied `G`,
    /// including ties beyond the requested band count.
    pub levels: Vec<Level>,
}

/// Free-particle bands `E = ‖k − G‖²` over reciprocal vectors `G`.
pub fn empty_lattice_bands(
    lattice: &EuclideanLattice,
    k: Vec2,
    n_bands: usize,
) -> Result<EmptyLatticeBands> {
    if n_bands == 0 {
        return Err(Error::Invalid("n_bands must be at least 1".into()));
    }
    let rec = reciprocal(lattice)?;
    let energy = |a: i64, b: i64| {
        let g = rec.point(a as f64, b as f64);
        let d = [k[0] - g[0], k[1] - g[1]];
        dot(d, d)
    };
    let [c1, c2] = dual_coordinates(k, lattice);
    let (a0, b0) = (c1.round() as i64, c2.round() as i64);

    // n-th smallest over a block around k bounds the search radius
    let mut half = 2i64;
    while ((2 * half + 1) * (2 * half + 1)) < n_bands as i64 {
        half += 1;
    }
    let mut block: Vec<f64> = Vec::new();
    for a in a0 - half..=a0 + half {
        for b in b0 - half..=b0 + half {
            block.push(energy(a, b));
        }
    }
    block.sort_by(f64::total_cmp);
    let bound = block[n_bands - 1];
    let window = bound + LEVEL_TIE_TOL * bound.max(1.0);

    // (k − G)·γ_j = c_j − (a, b)_j, and |(k − G)·γ_j| ≤ ‖k − G‖ ‖γ_j‖
    let r = window.sqrt();
    let [g1, g2] = lattice.basis();
    let span = |c: f64, g: Vec2| {
        let reach = r * dot(g, g).sqrt();
        ((c - reach).floor() as i64, (c + reach).ceil() as i64)
    };
    let (alo, ahi) = span(c1, g1);
    let (blo, bhi) = span(c2, g2);
    let mut all: Vec<f64> = Vec::new();
    for a in alo..=ahi {
        for b in blo..=bhi {
            let e = energy(a, b);
            if e <= window {
                all.push(e);
            }
        }
    }
    all.sort_by(f64::total_cmp);

    let mut levels: Vec<Level> = Vec::new();
    for &e in &all {
        match levels.last_mut() {
            Some(l) if (e - l.energy).abs() <= LEVEL_TIE_TOL * l.energy.abs().max(1.0) => {
                l.multiplicity += 1
            }
            _ => levels.push(Level {
                energy: e,
                multiplicity: 1,
            }),
        }
    }
    let energies: Vec<f64> = all.iter().take(n_bands).copied().collect();
    let last = *energies.last().expect("n_bands >= 1");
    levels.retain(|l| l.energy <= last + LEVEL_TIE_TOL * last.abs().max(1.0));
    Ok(EmptyLatticeBands { energies, levels })
}

/// The four half-lattice momenta `{0, w1/2, w2/2, (w1+w2)/2}`, folded.
pub fn two_torsion_points(lattice: &EuclideanLattice) -> Result<[Vec2; 4]> {
    let rec = reciprocal(lattice)?;
    let mut out = [[0.0; 2]; 4];
    for (slot, (a, b)) in out
        .iter_mut()
        .zip([(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)])
    {
        *slot = fold(rec.point(a, b), lattice)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexDispersion {
    /// `k_x² + k_y²`.
    #[serde(with = "crate::wire::complex")]
    pub energy: Complex64,
    /// `(‖k_r‖² − ‖k_i‖²) + 2i (k_r · k_i)`.
    #[serde(with = "crate::wire::complex")]
    pub split_energy: Complex64,
    pub discrepancy: f64,
    pub agree: bool,
}

pub const DISPERSION_TOL: f64 = 1e-14;

/// Free-particle dispersion at complex momentum, evaluated two ways.
pub fn complex_dispersion(kx: Complex64, ky: Complex64) -> ComplexDispersion {
    let energy = kx * kx + ky * ky;
    let kr = [kx.re, ky.re];
    let ki = [kx.im, ky.im];
    let split_energy = Complex64::new(dot(kr, kr) - dot(ki, ki), 2.0 * dot(kr, ki));
    let scale = (dot(kr, kr) + dot(ki, ki)).max(1.0);
    let discrepancy = (energy - split_energy).norm() / scale;
    ComplexDispersion {
        energy,
        split_energy,
        discrepancy,
        agree: discrepancy <= DISPERSION_TOL,
    }
}

/// `λ(τ) = θ_2(q)^4 / θ_3(q)^4` with nome `q = e^{iπτ}`.
pub fn modular_lambda(tau: Complex64) -> Result<Complex64> {
    if !(tau.im > 0.0) || !tau.is_finite() {
        return Err(Error::BadTau(tau));
    }
    let i_pi = Complex64::new(0.0, std::f64::consts::PI);
    let q = (i_pi * tau).exp();

    // θ_2 = 2 q^{1/4} Σ_{n≥0} q^{n(n+1)},  θ_3 = 1 + 2 Σ_{n≥1} q^{n²}
    let mut s2 = Complex64::new(0.0, 0.0);
    let mut s3 = Complex64::new(1.0, 0.0);
    let mut converged = false;
    for n in 0..THETA_MAX_TERMS {
        let nf = n as f64;
        let t2 = (i_pi * tau * (nf * (nf + 1.0))).exp();
        let t3 = if n == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            (i_pi * tau * (nf * nf)).exp() * 2.0
        };
        s2 += t2;
        s3 += t3;
        if n > 0 && t2.norm() < THETA_TERM_CUTOFF && t3.norm() < THETA_TERM_CUTOFF {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SeriesDivergence(THETA_MAX_TERMS));
    }
    // θ_2^4 = 16 q Σ^4
    let m = q * 16.0 * s2.powu(4) / s3.powu(4);
    if !m.is_finite() || m == Complex64::new(0.0, 0.0) || m == Complex64::new(1.0, 0.0) {
        return Err(Error::DegenerateMarkedPoint(m));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lat(re: f64, im: f64) -> EuclideanLattice {
        EuclideanLattice::new(c(re, im)).unwrap()
    }

    #[test]
    fn reciprocal_examples() {
        let r = reciprocal(&lat(0., 1.)).unwrap();
        assert_eq!((r.w1, r.w2), ([1., 0.], [0., 1.]));
        assert!(r.conjugate_formula_agrees);

        let r = reciprocal(&lat(0., 2.)).unwrap();
        assert_eq!((r.w1, r.w2), ([1., 0.], [0., 0.5]));
        assert!(r.conjugate_formula_agrees);

        let r = reciprocal(&lat(0.3, 1.1)).unwrap();
        assert!(!r.conjugate_formula_agrees);

        assert!(matches!(
            EuclideanLattice::new(c(1., -1.)),
            Err(Error::BadTau(_))
        ));
    }

    #[test]
    fn dual_basis_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let l = lat(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let r = reciprocal(&l).unwrap();
            let [g1, g2] = l.basis();
            for (w, row) in [(r.w1, [1.0, 0.0]), (r.w2, [0.0, 1.0])] {
                assert!((dot(w, g1) - row[0]).abs() < 1e-12);
                assert!((dot(w, g2) - row[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_lattice_examples() {
        let sq = lat(0., 1.);
        let b = empty_lattice_bands(&sq, [0., 0.], 5).unwrap();
        assert_eq!(b.energies, vec![0., 1., 1., 1., 1.]);
        assert_eq!(
            b.levels,
            vec![
                Level {
                    energy: 0.,
                    multiplicity: 1
                },
                Level {
                    energy: 1.,
                    multiplicity: 4
                }
            ]
        );

        let b = empty_lattice_bands(&sq, [0.5, 0.], 1).unwrap();
        assert_eq!(
            b.levels[0],
            Level {
                energy: 0.25,
                multiplicity: 2
            }
        );

        let b = empty_lattice_bands(&sq, [0.5, 0.5], 1).unwrap();
        assert_eq!(
            b.levels[0],
            Level {
                energy: 0.5,
                multiplicity: 4
            }
        );

        assert!(empty_lattice_bands(&sq, [0., 0.], 0).is_err());
    }

    /// Brute force over a wide box of reciprocal vectors.
    fn brute_bands(l: &EuclideanLattice, k: Vec2, n: usize) -> Vec<f64> {
        let r = reciprocal(l).unwrap();
        let mut all = Vec::new();
        for a in -40..=40 {
            for b in -40..=40 {
                let g = r.point(a as f64, b as f64);
                let d = [k[0] - g[0], k[1] - g[1]];
                all.push(dot(d, d));
            }
        }
        all.sort_by(f64::total_cmp);
        all.truncate(n);
        all
    }

    #[test]
    fn search_radius_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let l = lat(rng.gen_range(-1.0..1.0), rng.gen_range(0.4..2.5));
            let k = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let n = rng.gen_range(1..40);
            let got = empty_lattice_bands(&l, k, n).unwrap().energies;
            let want = brute_bands(&l, k, n);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
        }
    }

    #[test]
    fn bands_invariant_under_fold_and_reversal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let l = lat(rng.gen_range(-1.0..1.0), rng.gen_range(0.4..2.5));
            let k = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let f = fold(k, &l).unwrap();
            let [c1, c2] = dual_coordinates(f, &l);
            assert!((0.0..1.0).contains(&c1) || (c1 - 1.0).abs() < 1e-12);
            assert!((0.0..1.0).contains(&c2) || (c2 - 1.0).abs() < 1e-12);
            let base = empty_lattice_bands(&l, k, 8).unwrap().energies;
            let folded = empty_lattice_bands(&l, f, 8).unwrap().energies;
            let reversed = empty_lattice_bands(&l, [-k[0], -k[1]], 8).unwrap().energies;
            for ((a, b), r) in base.iter().zip(&folded).zip(&reversed) {
                assert!((a - b).abs() < 1e-12 * a.max(1.0));
                assert!((a - r).abs() < 1e-12 * a.max(1.0));
            }
        }
    }

    #[test]
    fn fold_examples() {
        let sq = lat(0., 1.);
        let f = fold([1.25, 0.], &sq).unwrap();
        assert!((f[0] - 0.25).abs() < 1e-15 && f[1] == 0.);
        assert_eq!(fold([0.3, 0.7], &sq).unwrap(), [0.3, 0.7]);
    }

    #[test]
    fn two_torsion_examples() {
        let pts = two_torsion_points(&lat(0., 1.)).unwrap();
        assert_eq!(pts, [[0., 0.], [0.5, 0.], [0., 0.5], [0.5, 0.5]]);
        let pts = two_torsion_points(&lat(0., 2.)).unwrap();
        assert!(pts.contains(&[0., 0.25]));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let l = lat(rng.gen_range(-1.0..1.0), rng.gen_range(0.4..2.5));
            for k in two_torsion_points(&l).unwrap().iter().skip(1) {
                let b = empty_lattice_bands(&l, *k, 1).unwrap();
                assert!(b.levels[0].multiplicity >= 2);
            }
        }
    }

    #[test]
    fn dispersion_examples() {
        let d = complex_dispersion(c(3., 0.), c(4., 0.));
        assert_eq!(d.energy, c(25., 0.));
        let d = complex_dispersion(c(1., 0.), c(0., 1.));
        assert_eq!(d.energy, c(0., 0.));
        assert_eq!(d.split_energy, c(0., 0.));
        let d = complex_dispersion(c(0., 1.), c(0., 0.));
        assert_eq!(d.energy, c(-1., 0.));
        assert!(d.agree);
    }

    #[test]
    fn lambda_at_square_lattice() {
        let m = modular_lambda(c(0., 1.)).unwrap();
        assert!((m - c(0.5, 0.)).norm() < 1e-12);
    }

    #[test]
    fn lambda_modular_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let tau = c(rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
            let m = modular_lambda(tau).unwrap();
            let shifted = modular_lambda(tau + 2.0).unwrap();
            let inverted = modular_lambda(-tau.inv()).unwrap();
            assert!((m - shifted).norm() < 1e-10);
            assert!((inverted - (1.0 - m)).norm() < 1e-10);
        }
    }

    #[test]
    fn lambda_guards() {
        assert!(modular_lambda(c(0., 0.)).is_err());
        assert!(matches!(
            modular_lambda(c(0., 400.)),
            Err(Error::DegenerateMarkedPoint(_))
        ));
    }
}
