//! Tight-binding crystals and their Bloch Hamiltonians.
//!
//! A model carries an on-site matrix `M` and one hopping matrix `J_γ` per
//! generator; hopping backwards along `γ` uses `J_γ^†`. At an abelian momentum
//! `χ` the Bloch Hamiltonian is
//!
//! ```text
//! H_χ = M + Σ_γ χ(γ) J_γ + χ(γ)^{-1} J_γ^†
//! ```
//!
//! and at a rank-`n` representation `ρ` it is the `nd × nd` matrix
//! `M ⊗ I_n + Σ_γ J_γ ⊗ ρ(γ) + J_γ^† ⊗ ρ(γ)^{-1}`, with the cell-state index
//! as the outer (slow) Kronecker factor.
//!
//! Supercell models built from covers may also carry hops along arbitrary
//! homology classes ([`LongHop`]); those contribute `χ^α K + χ^{-α} K^†`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momenta::{AbelianMomentum, NonabelianMomentum};
use crate::surface_group::SurfaceGroup;
use crate::wire;

/// Largest tolerated `‖M − M^†‖_F / 2`, relative to `max(1, ‖M‖_F)`.
pub const ONSITE_HERMITIAN_TOL: f64 = 1e-8;
/// Hermiticity test for assembled Hamiltonians, relative to `‖H‖_F`.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// A hop along the homology class with exponent vector `exponents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongHop {
    pub exponents: Vec<i64>,
    #[serde(with = "wire::matrix")]
    pub matrix: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingModel {
    group: SurfaceGroup,
    dim: usize,
    onsite: DMatrix<Complex64>,
    onsite_residual: f64,
    hops: Vec<DMatrix<Complex64>>,
    long_hops: Vec<LongHop>,
}

impl TightBindingModel {
    pub fn new(
        group: SurfaceGroup,
        onsite: DMatrix<Complex64>,
        hops: Vec<DMatrix<Complex64>>,
    ) -> Result<Self> {
        Self::with_long_hops(group, onsite, hops, Vec::new())
    }

    pub fn with_long_hops(
        group: SurfaceGroup,
        onsite: DMatrix<Complex64>,
        hops: Vec<DMatrix<Complex64>>,
        long_hops: Vec<LongHop>,
    ) -> Result<Self> {
        let dim = onsite.nrows();
        if dim == 0 {
            return Err(Error::Invalid("model dimension must be at least 1".into()));
        }
        check_square(&onsite, dim)?;
        if hops.len() != group.generator_count() {
            return Err(Error::DimensionMismatch {
                expected: group.generator_count(),
                found: hops.len(),
            });
        }
        for h in hops.iter().chain(long_hops.iter().map(|l| &l.matrix)) {
            check_square(h, dim)?;
        }
        for l in &long_hops {
            if l.exponents.len() != group.generator_count() {
                return Err(Error::DimensionMismatch {
                    expected: group.generator_count(),
                    found: l.exponents.len(),
                });
            }
        }
        let symmetric = (&onsite + onsite.adjoint()).unscale(2.0);
        let onsite_residual = (&onsite - &symmetric).norm() / onsite.norm().max(1.0);
        if !(onsite_residual <= ONSITE_HERMITIAN_TOL) {
            return Err(Error::NotHermitian(onsite_residual));
        }
        Ok(Self {
            group,
            dim,
            onsite: symmetric,
            onsite_residual,
            hops,
            long_hops,
        })
    }

    pub fn group(&self) -> SurfaceGroup {
        self.group
    }

    pub fn genus(&self) -> usize {
        self.group.genus()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn onsite(&self) -> &DMatrix<Complex64> {
        &self.onsite
    }

    /// Relative anti-Hermitian part removed from the input on-site matrix.
    pub fn onsite_residual(&self) -> f64 {
        self.onsite_residual
    }

    pub fn hops(&self) -> &[DMatrix<Complex64>] {
        &self.hops
    }

    pub fn long_hops(&self) -> &[LongHop] {
        &self.long_hops
    }

    /// Largest absolute exponent of each generator over all hops (at least 1).
    pub fn max_exponents(&self) -> Vec<usize> {
        let mut out = vec![1usize; self.group.generator_count()];
        for l in &self.long_hops {
            for (o, e) in out.iter_mut().zip(&l.exponents) {
                *o = (*o).max(e.unsigned_abs() as usize);
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: ModelWire = serde_json::from_str(text)?;
        w.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelWire::from(self))?)
    }
}

fn check_square(m: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if m.nrows() != dim {
                m.nrows()
            } else {
                m.ncols()
            },
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    hyperband_model: u32,
    genus: usize,
    dim: usize,
    #[serde(with = "wire::matrix")]
    onsite: DMatrix<Complex64>,
    #[serde(with = "wire::matrix_vec")]
    hops: Vec<DMatrix<Complex64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    long_hops: Vec<LongHop>,
}

impl From<&TightBindingModel> for ModelWire {
    fn from(m: &TightBindingModel) -> Self {
        Self {
            hyperband_model: MODEL_SCHEMA_VERSION,
            genus: m.genus(),
            dim: m.dim,
            onsite: m.onsite.clone(),
            hops: m.hops.clone(),
            long_hops: m.long_hops.clone(),
        }
    }
}

impl TryFrom<ModelWire> for TightBindingModel {
    type Error = Error;

    fn try_from(w: ModelWire) -> Result<Self> {
        if w.hyperband_model != MODEL_SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model schema version {}",
                w.hyperband_model
            )));
        }
        if w.onsite.nrows() != w.dim {
            return Err(Error::DimensionMismatch {
                expected: w.dim,
                found: w.onsite.nrows(),
            });
        }
        let group = SurfaceGroup::new(w.genus)?;
        TightBindingModel::with_long_hops(group, w.onsite, w.hops, w.long_hops)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrystalMomentum {
    Abelian(AbelianMomentum),
    Nonabelian(NonabelianMomentum),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochHamiltonian {
    pub matrix: DMatrix<Complex64>,
    pub momentum: CrystalMomentum,
    pub hermitian: bool,
}

impl BlochHamiltonian {
    fn new(matrix: DMatrix<Complex64>, momentum: CrystalMomentum) -> Self {
        let hermitian = is_hermitian(&matrix, HERMITIAN_TOL);
        Self {
            matrix,
            momentum,
            hermitian,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn is_hermitian(m: &DMatrix<Complex64>, tol: f64) -> bool {
    (m - m.adjoint()).norm() <= tol * m.norm()
}

/// `H_χ = M + Σ_γ χ(γ) J_γ + χ(γ)^{-1} J_γ^†`, summed generator by generator.
pub fn bloch_abelian(model: &TightBindingModel, chi: &AbelianMomentum) -> Result<BlochHamiltonian> {
    if chi.genus() != model.genus() {
        return Err(Error::GenusMismatch {
            expected: model.genus(),
            found: chi.genus(),
        });
    }
    let mut h = model.onsite.clone();
    for ((j, &z), &z_inv) in model
        .hops
        .iter()
        .zip(chi.values())
        .zip(chi.inverse_values())
    {
        add_hop(&mut h, j, z, z_inv);
    }
    for l in &model.long_hops {
        let neg: Vec<i64> = l.exponents.iter().map(|e| -e).collect();
        add_hop(
            &mut h,
            &l.matrix,
            chi.monomial(&l.exponents),
            chi.monomial(&neg),
        );
    }
    Ok(BlochHamiltonian::new(
        h,
        CrystalMomentum::Abelian(chi.clone()),
    ))
}

fn add_hop(h: &mut DMatrix<Complex64>, j: &DMatrix<Complex64>, z: Complex64, z_inv: Complex64) {
    // forward and backward parts are paired before accumulation so that the
    // adjoint momentum reproduces H^† bit for bit
    let d = h.nrows();
    for c in 0..d {
        for r in 0..d {
            h[(r, c)] += z * j[(r, c)] + z_inv * j[(c, r)].conj();
        }
    }
}

/// Bloch Hamiltonian at a matrix representation, ordered (cell state) ⊗ (representation).
pub fn bloch_nonabelian(
    model: &TightBindingModel,
    rho: &NonabelianMomentum,
) -> Result<BlochHamiltonian> {
    if rho.genus() != model.genus() {
        return Err(Error::GenusMismatch {
            expected: model.genus(),
            found: rho.genus(),
        });
    }
    let n = rho.rank();
    let mut h = model
        .onsite
        .kronecker(&DMatrix::<Complex64>::identity(n, n));
    for ((j, r), r_inv) in model
        .hops
        .iter()
        .zip(rho.matrices())
        .zip(rho.inverse_matrices())
    {
        h += j.kronecker(r) + j.adjoint().kronecker(r_inv);
    }
    for l in &model.long_hops {
        let fwd = ordered_power(rho, &l.exponents, false);
        let bwd = ordered_power(rho, &l.exponents, true);
        h += l.matrix.kronecker(&fwd) + l.matrix.adjoint().kronecker(&bwd);
    }
    Ok(BlochHamiltonian::new(
        h,
        CrystalMomentum::Nonabelian(rho.clone()),
    ))
}

/// `Π_i ρ_i^{α_i}` in generator order, or its inverse when `inverse` is set.
fn ordered_power(rho: &NonabelianMomentum, exponents: &[i64], inverse: bool) -> DMatrix<Complex64> {
    let n = rho.rank();
    let mut acc = DMatrix::<Complex64>::identity(n, n);
    let order: Vec<usize> = if inverse {
        (0..exponents.len()).rev().collect()
    } else {
        (0..exponents.len()).collect()
    };
    for i in order {
        let e = if inverse { -exponents[i] } else { exponents[i] };
        let base = if e < 0 {
            &rho.inverse_matrices()[i]
        } else {
            &rho.matrices()[i]
        };
        for _ in 0..e.unsigned_abs() {
            acc *= base;
        }
    }
    acc
}

/// The momentum whose Bloch Hamiltonian is the conjugate transpose of `H_χ`.
pub fn adjoint_momentum(chi: &AbelianMomentum) -> AbelianMomentum {
    chi.adjoint()
}
