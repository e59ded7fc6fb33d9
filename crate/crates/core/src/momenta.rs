//! Crystal momenta: characters `Γ → C*` and matrix representations `Γ → GL(n, C)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::surface_group::{evaluate_with_inverses, invert_all, SurfaceGroup};
use crate::wire;

/// Relator residual tolerance (Frobenius norm).
pub const TOL_RELATOR: f64 = 1e-9;
/// Unitarity tolerance, for characters and for representation matrices.
pub const TOL_UNITARY: f64 = 1e-9;
/// Singular values below this fraction of the largest count toward the commutant.
pub const COMMUTANT_CUTOFF: f64 = 1e-8;

/// An abelian crystal momentum: one nonzero complex value per generator.
///
/// The entrywise inverses are computed once at construction and carried along,
/// so that [`AbelianMomentum::adjoint`] can produce a momentum whose Bloch
/// Hamiltonian is the exact conjugate transpose of the original.
#[derive(Debug, Clone, PartialEq)]
pub struct AbelianMomentum {
    chi: Vec<Complex64>,
    chi_inv: Vec<Complex64>,
}

impl AbelianMomentum {
    pub fn new(chi: Vec<Complex64>) -> Result<Self> {
        if chi.is_empty() || !chi.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "a character needs an even, nonzero number of entries, got {}",
                chi.len()
            )));
        }
        if let Some(i) = chi.iter().position(|z| *z == Complex64::new(0.0, 0.0)) {
            return Err(Error::ZeroCharacter(i));
        }
        if chi.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        let chi_inv = chi.iter().map(|z| z.inv()).collect();
        Ok(Self { chi, chi_inv })
    }

    pub fn trivial(genus: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self {
            chi: vec![one; 2 * genus],
            chi_inv: vec![one; 2 * genus],
        }
    }

    /// Unitary character with `chi[i] = exp(i * phases[i])`.
    pub fn from_phases(phases: &[f64]) -> Result<Self> {
        Self::new(
            phases
                .iter()
                .map(|&t| Complex64::from_polar(1.0, t))
                .collect(),
        )
    }

    /// Character with `chi[i] = exp(log_moduli[i] + i * phases[i])`.
    pub fn from_log_polar(log_moduli: &[f64], phases: &[f64]) -> Result<Self> {
        if log_moduli.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                expected: phases.len(),
                found: log_moduli.len(),
            });
        }
        Self::new(
            log_moduli
                .iter()
                .zip(phases)
                .map(|(&r, &t)| Complex64::from_polar(r.exp(), t))
                .collect(),
        )
    }

    pub fn genus(&self) -> usize {
        self.chi.len() / 2
    }

    pub fn values(&self) -> &[Complex64] {
        &self.chi
    }

    pub fn inverse_values(&self) -> &[Complex64] {
        &self.chi_inv
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.chi.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
    }

    /// The entrywise conjugate-inverse `conj(chi)^{-1}`.
    pub fn adjoint(&self) -> Self {
        Self {
            chi: self.chi_inv.iter().map(|z| z.conj()).collect(),
            chi_inv: self.chi.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Entrywise product, the group law of `(C*)^{2g}`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.chi.len() != other.chi.len() {
            return Err(Error::GenusMismatch {
                expected: self.genus(),
                found: other.genus(),
            });
        }
        Self::new(
            self.chi
                .iter()
                .zip(&other.chi)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Value on a homology class given by its exponent vector.
    pub fn monomial(&self, exponents: &[i64]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (i, &e) in exponents.iter().enumerate() {
            let base = if e < 0 { self.chi_inv[i] } else { self.chi[i] };
            for _ in 0..e.unsigned_abs() {
                acc *= base;
            }
        }
        acc
    }

    /// Polar split into a unitary character and positive moduli.
    pub fn split_complex(&self) -> (AbelianMomentum, Vec<f64>) {
        let moduli: Vec<f64> = self.chi.iter().map(|z| z.norm()).collect();
        let phases = self
            .chi
            .iter()
            .zip(&moduli)
            .map(|(z, r)| z / r)
            .collect::<Vec<_>>();
        let chi_inv = phases.iter().map(|z: &Complex64| z.conj()).collect();
        (
            AbelianMomentum {
                chi: phases,
                chi_inv,
            },
            moduli,
        )
    }

    /// Inverse of [`split_complex`](Self::split_complex).
    pub fn from_parts(phases: &AbelianMomentum, moduli: &[f64]) -> Result<Self> {
        if moduli.len() != phases.chi.len() {
            return Err(Error::DimensionMismatch {
                expected: phases.chi.len(),
                found: moduli.len(),
            });
        }
        if moduli.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Invalid("moduli must be positive and finite".into()));
        }
        Self::new(phases.chi.iter().zip(moduli).map(|(p, r)| p * r).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct AbelianWire {
    #[serde(with = "wire::complex_vec")]
    chi: Vec<Complex64>,
}

impl Serialize for AbelianMomentum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AbelianWire {
            chi: self.chi.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AbelianMomentum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = AbelianWire::deserialize(d)?;
        AbelianMomentum::new(w.chi).map_err(serde::de::Error::custom)
    }
}

/// Bloch character of the Euclidean lattice `<1, tau>` at a (possibly complex)
/// momentum `(kx, ky)`: `chi(gamma) = exp(2 pi i (kx gamma_x + ky gamma_y))`.
pub fn euclidean_character(
    kx: Complex64,
    ky: Complex64,
    tau: Complex64,
) -> Result<AbelianMomentum> {
    if !(tau.im > 0.0) {
        return Err(Error::BadTau(tau));
    }
    let i2pi = Complex64::new(0.0, 2.0 * PI);
    let along_one = kx;
    let along_tau = kx * tau.re + ky * tau.im;
    AbelianMomentum::new(vec![(i2pi * along_one).exp(), (i2pi * along_tau).exp()])
}

/// A matrix representation of the surface group, one invertible matrix per generator.
#[derive(Debug, Clone, PartialEq)]
pub struct NonabelianMomentum {
    rho: Vec<DMatrix<Complex64>>,
    inverses: Vec<DMatrix<Complex64>>,
}

impl NonabelianMomentum {
    /// Wraps arbitrary generator matrices. The relator is not checked here;
    /// use [`validate`].
    pub fn from_matrices(rho: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if rho.is_empty() || !rho.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "a representation needs an even, nonzero number of matrices, got {}",
                rho.len()
            )));
        }
        let n = rho[0].nrows();
        if n == 0 {
            return Err(Error::Invalid(
                "representation rank must be at least 1".into(),
            ));
        }
        for m in &rho {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
            if m.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let inverses = invert_all(&rho)?;
        Ok(Self { rho, inverses })
    }

    /// Generator matrices with inverses already known exactly, e.g. monomial matrices.
    pub(crate) fn with_inverses(
        rho: Vec<DMatrix<Complex64>>,
        inverses: Vec<DMatrix<Complex64>>,
    ) -> Self {
        Self { rho, inverses }
    }

    pub fn from_abelian(chi: &AbelianMomentum) -> Self {
        let wrap = |z: &Complex64| DMatrix::from_element(1, 1, *z);
        Self {
            rho: chi.chi.iter().map(wrap).collect(),
            inverses: chi.chi_inv.iter().map(wrap).collect(),
        }
    }

    /// Diagonal embedding of several characters of the same genus.
    pub fn diagonal(chis: &[AbelianMomentum]) -> Result<Self> {
        let first = chis
            .first()
            .ok_or_else(|| Error::Invalid("no characters given".into()))?;
        let mut acc = Self::from_abelian(first);
        for chi in &chis[1..] {
            acc = direct_sum(&acc, &Self::from_abelian(chi))?;
        }
        Ok(acc)
    }

    pub fn trivial(genus: usize, rank: usize) -> Self {
        let id = DMatrix::<Complex64>::identity(rank, rank);
        Self {
            rho: vec![id.clone(); 2 * genus],
            inverses: vec![id; 2 * genus],
        }
    }

    pub fn genus(&self) -> usize {
        self.rho.len() / 2
    }

    pub fn rank(&self) -> usize {
        self.rho[0].nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.rho
    }

    pub fn inverse_matrices(&self) -> &[DMatrix<Complex64>] {
        &self.inverses
    }
}

#[derive(Serialize, Deserialize)]
struct NonabelianWire {
    #[serde(with = "wire::matrix_vec")]
    rho: Vec<DMatrix<Complex64>>,
}

impl Serialize for NonabelianMomentum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NonabelianWire {
            rho: self.rho.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NonabelianMomentum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = NonabelianWire::deserialize(d)?;
        NonabelianMomentum::from_matrices(w.rho).map_err(serde::de::Error::custom)
    }
}

/// Blockwise direct sum `rho_1 ⊕ rho_2`.
pub fn direct_sum(m1: &NonabelianMomentum, m2: &NonabelianMomentum) -> Result<NonabelianMomentum> {
    if m1.genus() != m2.genus() {
        return Err(Error::GenusMismatch {
            expected: m1.genus(),
            found: m2.genus(),
        });
    }
    let block = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| {
        let (n1, n2) = (a.nrows(), b.nrows());
        let mut out = DMatrix::zeros(n1 + n2, n1 + n2);
        out.view_mut((0, 0), (n1, n1)).copy_from(a);
        out.view_mut((n1, n1), (n2, n2)).copy_from(b);
        out
    };
    Ok(NonabelianMomentum {
        rho: m1
            .rho
            .iter()
            .zip(&m2.rho)
            .map(|(a, b)| block(a, b))
            .collect(),
        inverses: m1
            .inverses
            .iter()
            .zip(&m2.inverses)
            .map(|(a, b)| block(a, b))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `‖rho(relator) − I‖_F`.
    pub relator_residual: f64,
    /// `max_i ‖rho_i rho_i^† − I‖_F`.
    pub unitary_residual: f64,
    /// Dimension of `{X : [X, rho(gamma_i)] = 0 for all i}`.
    pub commutant_dimension: usize,
    pub relator_ok: bool,
    pub unitary: bool,
    pub irreducible: bool,
}

pub fn validate(
    m: &NonabelianMomentum,
    group: &SurfaceGroup,
    tol: f64,
) -> Result<ValidationReport> {
    if m.genus() != group.genus() {
        return Err(Error::GenusMismatch {
            expected: group.genus(),
            found: m.genus(),
        });
    }
    let n = m.rank();
    let id = DMatrix::<Complex64>::identity(n, n);
    let r = evaluate_with_inverses(&group.relator(), &m.rho, &m.inverses)?;
    let relator_residual = (r - &id).norm();
    let unitary_residual = m
        .rho
        .iter()
        .map(|a| (a * a.adjoint() - &id).norm())
        .fold(0.0, f64::max);
    let commutant_dimension = commutant_dimension(&m.rho);
    Ok(ValidationReport {
        relator_residual,
        unitary_residual,
        commutant_dimension,
        relator_ok: relator_residual <= tol,
        unitary: unitary_residual <= tol,
        irreducible: commutant_dimension == 1,
    })
}

/// Nullity of the stacked linear system `X A_i − A_i X = 0` in `vec(X)`.
pub fn commutant_dimension(mats: &[DMatrix<Complex64>]) -> usize {
    let n = mats[0].nrows();
    let nn = n * n;
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut system = DMatrix::<Complex64>::zeros(mats.len() * nn, nn);
    for (k, a) in mats.iter().enumerate() {
        // column-major vec: vec(XA) = (A^T ⊗ I) vec X, vec(AX) = (I ⊗ A) vec X
        let block = a.transpose().kronecker(&id) - id.kronecker(a);
        system.view_mut((k * nn, 0), (nn, nn)).copy_from(&block);
    }
    let sv: DVector<f64> = system.svd(false, false).singular_values;
    let largest = sv.max();
    if largest == 0.0 {
        return nn;
    }
    let cutoff = COMMUTANT_CUTOFF * largest;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    nn - rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn euclidean_character_examples() {
        let tau = c(0.3, 1.7);
        let chi = euclidean_character(c(0., 0.), c(0., 0.), tau).unwrap();
        assert_eq!(chi.values(), &[c(1., 0.), c(1., 0.)]);

        // a dual-lattice point: k·1 = 1 and k·tau = -2
        let kx = 1.0;
        let ky = (-2.0 - kx * tau.re) / tau.im;
        let chi = euclidean_character(c(kx, 0.), c(ky, 0.), tau).unwrap();
        for z in chi.values() {
            assert!((z - c(1., 0.)).norm() < 1e-12);
        }

        let chi = euclidean_character(c(0.5, 0.), c(0., 0.), c(0., 1.)).unwrap();
        assert!((chi.values()[0] - c(-1., 0.)).norm() < 1e-15);
        assert!((chi.values()[1] - c(1., 0.)).norm() < 1e-15);

        assert!(matches!(
            euclidean_character(c(0., 0.), c(0., 0.), c(1., 0.)),
            Err(Error::BadTau(_))
        ));
    }

    #[test]
    fn complex_momentum_is_not_unitary() {
        let chi = euclidean_character(c(0., 0.2), c(0., 0.), c(0., 1.)).unwrap();
        assert!(!chi.is_unitary(TOL_UNITARY));
        assert!((chi.values()[0].norm() - (-0.4 * PI).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_entry_rejected() {
        assert!(matches!(
            AbelianMomentum::new(vec![c(1., 0.), c(0., 0.)]),
            Err(Error::ZeroCharacter(1))
        ));
    }

    #[test]
    fn split_examples() {
        let chi = AbelianMomentum::new(vec![c(-1., 0.), c(1., 0.)]).unwrap();
        let (ph, r) = chi.split_complex();
        assert_eq!(ph.values(), chi.values());
        assert_eq!(r, vec![1., 1.]);

        let chi = AbelianMomentum::new(vec![c(0., 2.), c(1., 0.)]).unwrap();
        let (ph, r) = chi.split_complex();
        assert_eq!(ph.values(), &[c(0., 1.), c(1., 0.)]);
        assert_eq!(r, vec![2., 1.]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v: Vec<_> = (0..4)
                .map(|_| c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                .collect();
            let chi = AbelianMomentum::new(v).unwrap();
            let (ph, r) = chi.split_complex();
            assert!(ph.is_unitary(1e-15));
            let back = AbelianMomentum::from_parts(&ph, &r).unwrap();
            for (a, b) in back.values().iter().zip(chi.values()) {
                assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn unitary_characters_fixed_by_adjoint() {
        let chi = AbelianMomentum::from_phases(&[0.1, 2.0, -1.3, 3.0]).unwrap();
        for (a, b) in chi.adjoint().values().iter().zip(chi.values()) {
            assert!((a - b).norm() < 1e-15);
        }
        let chi = AbelianMomentum::new(vec![c(2., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]).unwrap();
        assert_eq!(
            chi.adjoint().values(),
            &[c(0.5, 0.), c(1., 0.), c(1., 0.), c(1., 0.)]
        );
    }

    #[test]
    fn validate_rank_one_and_trivial() {
        let g2 = SurfaceGroup::new(2).unwrap();
        let chi = AbelianMomentum::from_phases(&[0.4, 1.0, 2.0, -0.7]).unwrap();
        let rep = NonabelianMomentum::from_abelian(&chi);
        let rep_report = validate(&rep, &g2, TOL_RELATOR).unwrap();
        assert!(rep_report.relator_residual < 1e-15);
        assert!(rep_report.irreducible && rep_report.unitary);

        let triv = NonabelianMomentum::trivial(2, 2);
        let report = validate(&triv, &g2, TOL_RELATOR).unwrap();
        assert_eq!(report.relator_residual, 0.0);
        assert_eq!(report.commutant_dimension, 4);
        assert!(!report.irreducible);
    }

    #[test]
    fn direct_sum_commutants() {
        let g1 = SurfaceGroup::new(1).unwrap();
        let a = AbelianMomentum::from_phases(&[0.3, 1.1]).unwrap();
        let b = AbelianMomentum::from_phases(&[-2.0, 0.5]).unwrap();
        let ra = NonabelianMomentum::from_abelian(&a);
        let rb = NonabelianMomentum::from_abelian(&b);
        let sum = direct_sum(&ra, &rb).unwrap();
        assert_eq!(sum.rank(), 2);
        assert_eq!(
            validate(&sum, &g1, TOL_RELATOR)
                .unwrap()
                .commutant_dimension,
            2
        );
        let twice = direct_sum(&ra, &ra).unwrap();
        assert_eq!(
            validate(&twice, &g1, TOL_RELATOR)
                .unwrap()
                .commutant_dimension,
            4
        );

        let t = NonabelianMomentum::from_abelian(&AbelianMomentum::trivial(1));
        let tt = direct_sum(&t, &t).unwrap();
        assert!(tt.matrices().iter().all(|m| *m == DMatrix::identity(2, 2)));

        let g2rep = NonabelianMomentum::trivial(2, 1);
        assert!(matches!(
            direct_sum(&t, &g2rep),
            Err(Error::GenusMismatch { .. })
        ));
    }

    #[test]
    fn random_matrices_fail_relator() {
        let g1 = SurfaceGroup::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rnd = || {
            DMatrix::from_fn(2, 2, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let rep = NonabelianMomentum::from_matrices(vec![rnd(), rnd()]).unwrap();
        let report = validate(&rep, &g1, TOL_RELATOR).unwrap();
        assert!(!report.relator_ok);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = NonabelianMomentum::from_matrices(vec![
            DMatrix::identity(2, 2),
            DMatrix::identity(3, 3),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn json_uses_pairs() {
        let chi = AbelianMomentum::new(vec![c(1., 2.), c(-0.5, 0.)]).unwrap();
        let s = serde_json::to_string(&chi).unwrap();
        assert_eq!(s, r#"{"chi":[[1.0,2.0],[-0.5,0.0]]}"#);
        let back: AbelianMomentum = serde_json::from_str(&s).unwrap();
        assert_eq!(back, chi);
        let rep = NonabelianMomentum::trivial(1, 1);
        assert_eq!(
            serde_json::to_string(&rep).unwrap(),
            r#"{"rho":[[[[1.0,0.0]]],[[[1.0,0.0]]]]}"#
        );
    }
}
