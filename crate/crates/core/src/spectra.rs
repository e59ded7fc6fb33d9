//! Eigenvalue sweeps over Brillouin tori, degeneracy detection and
//! Bloch-variety extraction.
//!
//! Eigenvalues are always sorted lexicographically by (real, imaginary) part.
//! Band index `n` at a grid point is simply the `n`-th entry in that order; no
//! continuation across grid points is attempted.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::momenta::AbelianMomentum;
use crate::tight_binding::{bloch_abelian, BlochHamiltonian, TightBindingModel};

const MAX_SWEEPS_PER_DIM: usize = 1000;
/// Relative residual allowed when reproducing `det(H_χ − E)` from the interpolated coefficients.
pub const VARIETY_RESIDUAL_TOL: f64 = 1e-8;
/// Coefficients below this fraction of the largest are treated as exact zeros.
pub const VARIETY_ZERO_CUTOFF: f64 = 1e-12;
/// Default clustering radius for degeneracies, as a fraction of the spectral radius.
pub const DEFAULT_GAP_FRACTION: f64 = 1e-6;

pub fn compare_eigenvalues(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub fn sort_eigenvalues(v: &mut [Complex64]) {
    v.sort_by(compare_eigenvalues);
}

/// Eigenvalues of a Bloch Hamiltonian with multiplicity, sorted by (Re, Im).
pub fn eigenvalues(h: &BlochHamiltonian) -> Result<Vec<Complex64>> {
    matrix_eigenvalues(&h.matrix, h.hermitian)
}

/// Dense eigenvalues; Hermitian input goes to the symmetric solver and comes back real.
pub fn matrix_eigenvalues(m: &DMatrix<Complex64>, hermitian: bool) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if m.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_iter = MAX_SWEEPS_PER_DIM * n;
    let mut out: Vec<Complex64> = if hermitian {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
            .ok_or(Error::NoConvergence(n))?;
        eig.eigenvalues
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect()
    } else {
        let schur =
            Schur::try_new(m.clone(), f64::EPSILON, max_iter).ok_or(Error::NoConvergence(n))?;
        let (_, t) = schur.unpack();
        (0..n).map(|i| t[(i, i)]).collect()
    };
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::NoConvergence(n));
    }
    sort_eigenvalues(&mut out);
    Ok(out)
}

/// Sampling of one character coordinate in (log-modulus, phase) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub log_modulus: (f64, f64),
    pub log_samples: usize,
    pub phase: (f64, f64),
    pub phase_samples: usize,
}

impl AxisSpec {
    /// The full circle `|χ| = 1` sampled at `2πj/n`, `j = 0..n`.
    pub fn circle(samples: usize) -> Self {
        Self {
            log_modulus: (0.0, 0.0),
            log_samples: 1,
            phase: (0.0, 2.0 * PI * (1.0 - 1.0 / samples.max(1) as f64)),
            phase_samples: samples,
        }
    }

    fn points(&self) -> Vec<(f64, f64)> {
        let logs = linspace(self.log_modulus, self.log_samples);
        let phases = linspace(self.phase, self.phase_samples);
        let mut out = Vec::with_capacity(logs.len() * phases.len());
        for &r in &logs {
            for &t in &phases {
                out.push((r, t));
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.log_samples * self.phase_samples
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A product grid over `(C*)^{2g}`, one axis per generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    /// Uniform phase grid on `U(1)^{2g}` with `samples[i]` points on axis `i`.
    pub fn torus(samples: &[usize]) -> Self {
        Self {
            axes: samples.iter().map(|&n| AxisSpec::circle(n)).collect(),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(AxisSpec::len).collect()
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.shape().iter().product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (first axis slowest).
    pub fn points(&self) -> Vec<GridPoint> {
        if self.is_empty() {
            return Vec::new();
        }
        let per_axis: Vec<Vec<(f64, f64)>> = self.axes.iter().map(AxisSpec::points).collect();
        let shape = self.shape();
        let total = self.len();
        (0..total)
            .map(|flat| {
                let mut rem = flat;
                let mut index = vec![0; shape.len()];
                for (axis, &n) in shape.iter().enumerate().rev() {
                    index[axis] = rem % n;
                    rem /= n;
                }
                let (log_moduli, phases) = index
                    .iter()
                    .enumerate()
                    .map(|(axis, &i)| per_axis[axis][i])
                    .unzip();
                GridPoint {
                    index,
                    log_moduli,
                    phases,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: Vec<usize>,
    pub log_moduli: Vec<f64>,
    pub phases: Vec<f64>,
}

impl GridPoint {
    pub fn momentum(&self) -> Result<AbelianMomentum> {
        AbelianMomentum::from_log_polar(&self.log_moduli, &self.phases)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMeta {
    pub model_sha256: String,
    pub grid_shape: Vec<usize>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub grid: Vec<GridPoint>,
    pub bands: Vec<Vec<Complex64>>,
    pub hermitian: Vec<bool>,
    pub meta: BandMeta,
}

impl BandStructure {
    pub fn spectral_radius(&self) -> f64 {
        self.bands
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|Im λ|` over Hermitian rows.
    pub fn max_hermitian_imag(&self) -> f64 {
        self.bands
            .iter()
            .zip(&self.hermitian)
            .filter(|(_, &h)| h)
            .flat_map(|(row, _)| row.iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max)
    }

    /// Smallest and largest real part over all bands.
    pub fn real_extremes(&self) -> (f64, f64) {
        self.bands
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
                (lo.min(z.re), hi.max(z.re))
            })
    }

    pub fn default_gap_tol(&self) -> f64 {
        DEFAULT_GAP_FRACTION * self.spectral_radius().max(f64::MIN_POSITIVE)
    }

    /// One row per (grid point, band) with log-modulus and phase columns per axis.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let axes = self.meta.grid_shape.len();
        writeln!(w, "# hyperband band structure")?;
        writeln!(w, "# model_sha256 = {}", self.meta.model_sha256)?;
        writeln!(
            w,
            "# grid_shape = {}",
            self.meta
                .grid_shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x")
        )?;
        writeln!(
            w,
            "# rows ordered by grid index (row-major, first axis slowest), then band index"
        )?;
        writeln!(
            w,
            "# bands sorted by (Re, Im) at each grid point; chi_i = exp(r_i + i theta_i)"
        )?;
        let mut header = vec!["grid_index".to_string(), "band_index".to_string()];
        for i in 0..axes {
            header.push(format!("r{i}"));
            header.push(format!("theta{i}"));
        }
        header.push("re".into());
        header.push("im".into());
        writeln!(w, "{}", header.join(","))?;
        for (gi, (point, row)) in self.grid.iter().zip(&self.bands).enumerate() {
            let coords: Vec<String> = point
                .log_moduli
                .iter()
                .zip(&point.phases)
                .flat_map(|(r, t)| [r.to_string(), t.to_string()])
                .collect();
            let coords = coords.join(",");
            for (bi, z) in row.iter().enumerate() {
                writeln!(w, "{gi},{bi},{coords},{},{}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

pub fn model_digest(model: &TightBindingModel) -> String {
    let json = model.to_json().unwrap_or_default();
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Spectra of `model` at every grid point. Rows come back in grid order
/// regardless of how the work was scheduled.
pub fn sweep(model: &TightBindingModel, grid: &GridSpec) -> Result<BandStructure> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.axes.len() != model.group().generator_count() {
        return Err(Error::DimensionMismatch {
            expected: model.group().generator_count(),
            found: grid.axes.len(),
        });
    }
    let points = grid.points();
    let rows: Vec<Result<(Vec<Complex64>, bool)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let eval = || -> Result<(Vec<Complex64>, bool)> {
                let h = bloch_abelian(model, &p.momentum()?)?;
                Ok((eigenvalues(&h)?, h.hermitian))
            };
            eval().map_err(|e| Error::at_grid_point(i, e))
        })
        .collect();
    let mut bands = Vec::with_capacity(rows.len());
    let mut hermitian = Vec::with_capacity(rows.len());
    for row in rows {
        let (b, h) = row?;
        bands.push(b);
        hermitian.push(h);
    }
    Ok(BandStructure {
        grid: points,
        bands,
        hermitian,
        meta: BandMeta {
            model_sha256: model_digest(model),
            grid_shape: grid.shape(),
            dim: model.dim(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub grid_index: usize,
    #[serde(with = "crate::wire::complex")]
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
}

/// Single-linkage clusters of eigenvalues within `gap_tol` (complex modulus),
/// grouped per grid point; clusters of size one are omitted.
pub fn detect_crossings(bs: &BandStructure, gap_tol: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (grid_index, row) in bs.bands.iter().enumerate() {
        for cluster in cluster_values(row, gap_tol) {
            if cluster.len() >= 2 {
                let mean =
                    cluster.iter().map(|&i| row[i]).sum::<Complex64>() / cluster.len() as f64;
                out.push(Crossing {
                    grid_index,
                    eigenvalue: mean,
                    multiplicity: cluster.len(),
                });
            }
        }
    }
    out
}

/// Single-linkage clustering; clusters are returned as sorted index lists,
/// ordered by their smallest index.
pub fn cluster_values(values: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if (values[a] - values[b]).norm() <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    clusters
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarietyTerm {
    pub alpha: Vec<i64>,
    pub j: usize,
    pub re: f64,
    pub im: f64,
}

impl VarietyTerm {
    pub fn coefficient(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Laurent coefficients of `det(H_χ − E) = Σ c(α, j) χ^α E^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochVariety {
    pub genus: usize,
    pub dim: usize,
    /// Exponent bound per character variable used for the interpolation.
    pub bounds: Vec<usize>,
    /// Nonzero terms, ordered by `j` then `alpha` lexicographically.
    pub terms: Vec<VarietyTerm>,
    /// Worst relative residual on the held-out check points.
    pub residual: f64,
}

impl BlochVariety {
    pub fn evaluate(&self, chi: &AbelianMomentum, energy: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coefficient() * chi.monomial(&t.alpha) * energy.powu(t.j as u32))
            .sum()
    }

    /// `Σ |c(α,j)| |χ^α| |E|^j`, the natural scale for residuals.
    pub fn term_scale(&self, chi: &AbelianMomentum, energy: Complex64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient().norm()
                    * chi.monomial(&t.alpha).norm()
                    * energy.norm().powi(t.j as i32)
            })
            .sum()
    }

    pub fn coefficient_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient().norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn coefficient(&self, alpha: &[i64], j: usize) -> Complex64 {
        self.terms
            .iter()
            .find(|t| t.j == j && t.alpha == alpha)
            .map_or(Complex64::new(0.0, 0.0), VarietyTerm::coefficient)
    }

    /// `|p(χ, E) − det(H_χ − E)|` relative to the term scale.
    pub fn relative_residual(
        &self,
        model: &TightBindingModel,
        chi: &AbelianMomentum,
        energy: Complex64,
    ) -> Result<f64> {
        let direct = char_det(model, chi, energy)?;
        let interp = self.evaluate(chi, energy);
        let scale = self.term_scale(chi, energy).max(direct.norm());
        let r = (interp - direct).norm() / scale.max(f64::MIN_POSITIVE);
        Ok(if r.is_finite() { r } else { f64::INFINITY })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `det(H_χ − E)` by LU factorization.
pub fn char_det(
    model: &TightBindingModel,
    chi: &AbelianMomentum,
    energy: Complex64,
) -> Result<Complex64> {
    let h = bloch_abelian(model, chi)?.matrix;
    let n = h.nrows();
    Ok((h - DMatrix::<Complex64>::identity(n, n) * energy).determinant())
}

/// Bloch variety with exponent bound `dim · (largest hop exponent)` per variable,
/// which covers every monomial the determinant can contain.
pub fn bloch_variety(model: &TightBindingModel) -> Result<BlochVariety> {
    let bounds: Vec<usize> = model
        .max_exponents()
        .iter()
        .map(|e| e * model.dim())
        .collect();
    bloch_variety_with_bounds(model, &bounds)
}

/// Interpolates the Laurent coefficients on a product of roots-of-unity grids:
/// `2b_i + 1` points per character variable and `N + 1` points in `E`.
/// Fails when the result does not reproduce the determinant at held-out points,
/// which happens when `bounds` is too small for the model.
pub fn bloch_variety_with_bounds(
    model: &TightBindingModel,
    bounds: &[usize],
) -> Result<BlochVariety> {
    let vars = model.group().generator_count();
    if bounds.len() != vars {
        return Err(Error::DimensionMismatch {
            expected: vars,
            found: bounds.len(),
        });
    }
    let n_e = model.dim() + 1;
    let mut shape: Vec<usize> = bounds.iter().map(|b| 2 * b + 1).collect();
    shape.push(n_e);
    let chi_points: usize = shape[..vars].iter().product();
    let roots = |n: usize, k: usize| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);

    // samples[flat] with E the fastest axis
    let blocks: Vec<Result<Vec<Complex64>>> = (0..chi_points)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut chi = vec![Complex64::new(0.0, 0.0); vars];
            for axis in (0..vars).rev() {
                let n = shape[axis];
                chi[axis] = roots(n, rem % n);
                rem /= n;
            }
            let chi = AbelianMomentum::new(chi)?;
            let h = bloch_abelian(model, &chi)?.matrix;
            let d = h.nrows();
            Ok((0..n_e)
                .map(|k| (&h - DMatrix::<Complex64>::identity(d, d) * roots(n_e, k)).determinant())
                .collect())
        })
        .collect();
    let mut data = Vec::with_capacity(chi_points * n_e);
    for b in blocks {
        data.extend(b?);
    }
    if data.iter().any(|z| !z.is_finite()) {
        return Err(Error::InterpolationResidual {
            residual: f64::INFINITY,
            threshold: VARIETY_RESIDUAL_TOL,
        });
    }

    fft_all_axes(&mut data, &shape);
    let total = data.len() as f64;
    let max_coeff = data.iter().map(|z| z.norm()).fold(0.0, f64::max) / total;
    let cutoff = VARIETY_ZERO_CUTOFF * max_coeff;

    let mut terms = Vec::new();
    for (flat, z) in data.iter().enumerate() {
        let c = z / total;
        if c.norm() <= cutoff {
            continue;
        }
        let mut rem = flat;
        let j = rem % n_e;
        rem /= n_e;
        let mut alpha = vec![0i64; vars];
        for axis in (0..vars).rev() {
            let n = shape[axis];
            let m = (rem % n) as i64;
            rem /= n;
            let b = bounds[axis] as i64;
            alpha[axis] = if m > b { m - n as i64 } else { m };
        }
        terms.push(VarietyTerm {
            alpha,
            j,
            re: c.re,
            im: c.im,
        });
    }
    terms.sort_by(|a, b| a.j.cmp(&b.j).then_with(|| a.alpha.cmp(&b.alpha)));

    let mut variety = BlochVariety {
        genus: model.genus(),
        dim: model.dim(),
        bounds: bounds.to_vec(),
        terms,
        residual: 0.0,
    };
    variety.residual = held_out_residual(&variety, model, 16, 0x5eed)?;
    if !(variety.residual <= VARIETY_RESIDUAL_TOL) {
        return Err(Error::InterpolationResidual {
            residual: variety.residual,
            threshold: VARIETY_RESIDUAL_TOL,
        });
    }
    Ok(variety)
}

/// Worst relative residual over `count` random off-grid `(χ, E)` pairs.
pub fn held_out_residual(
    variety: &BlochVariety,
    model: &TightBindingModel,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = model.group().generator_count();
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let logs: Vec<f64> = (0..vars).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let phases: Vec<f64> = (0..vars).map(|_| rng.gen_range(-PI..PI)).collect();
        let chi = AbelianMomentum::from_log_polar(&logs, &phases)?;
        let energy = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(-PI..PI));
        let r = variety.relative_residual(model, &chi, energy)?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// In-place forward DFT along every axis of a row-major tensor.
fn fft_all_axes(data: &mut [Complex64], shape: &[usize]) {
    let mut planner = FftPlanner::<f64>::new();
    let total = data.len();
    let mut stride = 1;
    for &n in shape.iter().rev() {
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let outer = total / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                fft.process(&mut line);
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
        stride *= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momenta::NonabelianMomentum;
    use crate::sampling;
    use crate::surface_group::SurfaceGroup;
    use crate::tight_binding::bloch_nonabelian;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_matrix(n: usize, v: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_iterator(n, n, v.iter().map(|&x| c(x, 0.0))).transpose()
    }

    fn single_site(genus: usize) -> TightBindingModel {
        let g = SurfaceGroup::new(genus).unwrap();
        TightBindingModel::new(
            g,
            real_matrix(1, &[0.0]),
            vec![real_matrix(1, &[1.0]); 2 * genus],
        )
        .unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let d = real_matrix(3, &[3., 0., 0., 0., 1., 0., 0., 0., 2.]);
        let e = matrix_eigenvalues(&d, true).unwrap();
        assert_eq!(e, vec![c(1., 0.), c(2., 0.), c(3., 0.)]);
        let e = matrix_eigenvalues(&d, false).unwrap();
        assert_eq!(e, vec![c(1., 0.), c(2., 0.), c(3., 0.)]);

        let x = real_matrix(2, &[0., 1., 1., 0.]);
        let e = matrix_eigenvalues(&x, true).unwrap();
        assert!((e[0] - c(-1., 0.)).norm() < 1e-15 && (e[1] - c(1., 0.)).norm() < 1e-15);

        let nil = real_matrix(2, &[0., 2., 0., 0.]);
        let e = matrix_eigenvalues(&nil, false).unwrap();
        assert!(e.iter().all(|z| z.norm() < 1e-15));

        let mut bad = x.clone();
        bad[(0, 0)] = c(f64::NAN, 0.);
        assert!(matches!(
            matrix_eigenvalues(&bad, false),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn general_solver_matches_characteristic_roots() {
        // upper triangular plus a rotation block: eigenvalues 2, ±i
        let m = real_matrix(3, &[2., 5., 1., 0., 0., -1., 0., 1., 0.]);
        let e = matrix_eigenvalues(&m, false).unwrap();
        let want = [c(0., -1.), c(0., 1.), c(2., 0.)];
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn euclidean_single_site_sweep() {
        let bs = sweep(&single_site(1), &GridSpec::torus(&[8, 8])).unwrap();
        assert_eq!(bs.bands.len(), 64);
        for (p, row) in bs.grid.iter().zip(&bs.bands) {
            let want = 2.0 * p.phases[0].cos() + 2.0 * p.phases[1].cos();
            assert!((row[0].re - want).abs() < 1e-12);
        }
        let (lo, hi) = bs.real_extremes();
        assert!((lo + 4.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        assert_eq!(bs.bands[0][0], c(4.0, 0.0));
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(matches!(
            sweep(&single_site(1), &GridSpec::torus(&[0, 4])),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn flat_band_without_hopping() {
        let g = SurfaceGroup::new(1).unwrap();
        let model =
            TightBindingModel::new(g, real_matrix(1, &[0.7]), vec![real_matrix(1, &[0.0]); 2])
                .unwrap();
        let bs = sweep(&model, &GridSpec::torus(&[5, 3])).unwrap();
        assert!(bs.bands.iter().all(|r| r[0] == c(0.7, 0.0)));
    }

    #[test]
    fn sweep_order_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = sampling::model(&mut rng, 1, 3);
        let grid = GridSpec::torus(&[7, 6]);
        let a = sweep(&model, &grid).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| sweep(&model, &grid).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn grid_error_carries_index() {
        let g = SurfaceGroup::new(1).unwrap();
        let model =
            TightBindingModel::new(g, real_matrix(1, &[0.0]), vec![real_matrix(1, &[1e300]); 2])
                .unwrap();
        let grid = GridSpec {
            axes: vec![
                AxisSpec {
                    log_modulus: (0.0, 800.0),
                    log_samples: 2,
                    phase: (0.0, 0.0),
                    phase_samples: 1,
                },
                AxisSpec::circle(1),
            ],
        };
        match sweep(&model, &grid) {
            Err(Error::AtGridPoint { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crossing_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = sampling::model(&mut rng, 1, 3);
        let bs = sweep(&model, &GridSpec::torus(&[3, 3])).unwrap();
        let min_gap = bs
            .bands
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[1] - w[0]).norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(detect_crossings(&bs, 0.5 * min_gap).is_empty());

        // trivial rank-2 representation doubles the spectrum
        let rho = NonabelianMomentum::trivial(1, 2);
        let h = bloch_nonabelian(&model, &rho).unwrap();
        let ev = eigenvalues(&h).unwrap();
        let fake = BandStructure {
            grid: vec![bs.grid[0].clone()],
            bands: vec![ev],
            hermitian: vec![true],
            meta: bs.meta.clone(),
        };
        let crossings = detect_crossings(&fake, fake.default_gap_tol());
        assert_eq!(crossings.len(), 3);
        assert!(crossings.iter().all(|x| x.multiplicity == 2));
    }

    #[test]
    fn variety_of_single_site_torus() {
        let v = bloch_variety(&single_site(1)).unwrap();
        assert_eq!(v.terms.len(), 5);
        let one = c(1.0, 0.0);
        for alpha in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            assert!((v.coefficient(&alpha, 0) - one).norm() < 1e-14);
        }
        assert!((v.coefficient(&[0, 0], 1) + one).norm() < 1e-14);
    }

    #[test]
    fn variety_of_onsite_only_model() {
        let g = SurfaceGroup::new(1).unwrap();
        let model =
            TightBindingModel::new(g, real_matrix(1, &[2.5]), vec![real_matrix(1, &[0.0]); 2])
                .unwrap();
        let v = bloch_variety(&model).unwrap();
        assert_eq!(v.terms.len(), 2);
        assert!((v.coefficient(&[0, 0], 0) - c(2.5, 0.0)).norm() < 1e-14);
        assert!((v.coefficient(&[0, 0], 1) + c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn variety_of_random_model_reproduces_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = sampling::model(&mut rng, 2, 2);
        let v = bloch_variety(&model).unwrap();
        assert!(v.residual <= 1e-8);
        assert!(held_out_residual(&v, &model, 50, 99).unwrap() <= 1e-8);
        let lead = v.coefficient(&[0, 0, 0, 0], 2);
        assert!((lead - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn undersized_bounds_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let model = sampling::model(&mut rng, 1, 2);
        let err = bloch_variety_with_bounds(&model, &[1, 1]).unwrap_err();
        assert!(matches!(err, Error::InterpolationResidual { .. }));
    }

    #[test]
    fn csv_layout() {
        let bs = sweep(&single_site(1), &GridSpec::torus(&[2, 2])).unwrap();
        let mut buf = Vec::new();
        bs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "grid_index,band_index,r0,theta0,r1,theta1,re,im");
        assert_eq!(data.len(), 5);
        assert_eq!(data[1], "0,0,0,0,0,0,4,0");
    }
}
