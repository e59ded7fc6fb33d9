//! Seeded random fixtures for randomized checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::covers_quivers::UnbranchedCover;

use crate::momenta::AbelianMomentum;
use crate::surface_group::SurfaceGroup;
use crate::tight_binding::TightBindingModel;

pub fn complex_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    let a = complex_matrix(rng, n);
    (&a + a.adjoint()).unscale(2.0)
}

/// Model with a random Hermitian on-site matrix and dense random hops.
pub fn model<R: Rng>(rng: &mut R, genus: usize, dim: usize) -> TightBindingModel {
    let group = SurfaceGroup::new(genus).expect("genus >= 1");
    let onsite = hermitian(rng, dim);
    let hops = (0..group.generator_count())
        .map(|_| complex_matrix(rng, dim))
        .collect();
    TightBindingModel::new(group, onsite, hops).expect("random model is valid")
}

pub fn unitary_momentum<R: Rng>(rng: &mut R, genus: usize) -> AbelianMomentum {
    let phases: Vec<f64> = (0..2 * genus).map(|_| rng.gen_range(-PI..PI)).collect();
    AbelianMomentum::from_phases(&phases).expect("unit-modulus entries")
}

/// Momentum with log-moduli uniform in `[-spread, spread]` and uniform phases.
pub fn complex_momentum<R: Rng>(rng: &mut R, genus: usize, spread: f64) -> AbelianMomentum {
    let logs: Vec<f64> = (0..2 * genus)
        .map(|_| rng.gen_range(-spread..=spread))
        .collect();
    let phases: Vec<f64> = (0..2 * genus).map(|_| rng.gen_range(-PI..PI)).collect();
    AbelianMomentum::from_log_polar(&logs, &phases).expect("finite nonzero entries")
}

fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn compose(p: &[usize], q: &[usize]) -> Vec<usize> {
    p.iter().map(|&s| q[s]).collect()
}

/// Random `n`-sheeted cover. For genus ≥ 2 the first two handles carry
/// `(σ, τ, τ, σ)`, which need not commute; other handles use commuting
/// powers of one permutation.
pub fn cover<R: Rng>(rng: &mut R, genus: usize, n: usize) -> UnbranchedCover {
    let group = SurfaceGroup::new(genus).expect("genus >= 1");
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(2 * genus);
    let mut handle = 0;
    if genus >= 2 {
        let (s, t) = (random_perm(rng, n), random_perm(rng, n));
        perms.extend([s.clone(), t.clone(), t, s]);
        handle = 2;
    }
    while handle < genus {
        let s = random_perm(rng, n);
        let mut t: Vec<usize> = (0..n).collect();
        for _ in 0..rng.gen_range(0..n.max(1)) {
            t = compose(&t, &s);
        }
        perms.extend([s, t]);
        handle += 1;
    }
    UnbranchedCover::new(group, perms).expect("relator holds by construction")
}
