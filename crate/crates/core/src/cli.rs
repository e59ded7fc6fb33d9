//! Command-line front end. Every command writes data (CSV or JSON) to `--out`
//! or standard output; diagnostics go to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::covers_quivers::{
    pushforward_check, quiver_from_model, UnbranchedCover, PUSHFORWARD_TOL,
};
use crate::error::{Error, ErrorClass, Result};
use crate::euclidean::{self, EuclideanLattice};
use crate::higgs_toy::{self, ToyModelPoint};
use crate::poly::Poly;
use crate::sampling;
use crate::spectra::{self, AxisSpec, GridSpec, VARIETY_RESIDUAL_TOL};
use crate::spectral_curve::{self, Rank2TwistedHiggs};
use crate::tight_binding::TightBindingModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_GRID: usize = 16;
pub const DEFAULT_TRIALS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "hyperband",
    version,
    about = "Band theory of hyperbolic and Euclidean crystals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with option values; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    options: RunConfig,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sweep band energies over a momentum grid and write CSV.
    Bands,
    /// Interpolate the Laurent coefficients of det(H_chi − E).
    BlochVariety,
    /// Empty-lattice bands, two-torsion points and lambda(tau) for a flat torus.
    Euclidean,
    /// Residues, nilpotency and Hitchin coordinate of the four-point toy family.
    HiggsToy,
    /// Branch points and genus of a rank-2 spectral cover.
    SpectralCurve,
    /// Compare supercell and induced-representation spectra for a cover.
    CoverCheck,
    /// Export the quiver of a model as JSON.
    Quiver,
}

/// Options shared by all commands. Each may also come from the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Model JSON file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Cover JSON file ({sheets, perms}, one-indexed).
    #[arg(long, global = true)]
    pub cover: Option<PathBuf>,
    /// Phase samples per generator, `N` or `N,N,...`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Log-modulus range per generator: `R`, `LO:HI:N`, or a comma list of those.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Tolerance override for the command's main check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Lattice parameter `RE,IM`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Real momentum `KX,KY`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Complex momentum `KX_RE,KX_IM,KY_RE,KY_IM` for the dispersion check.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub complex_k: Option<String>,
    /// Number of empty-lattice bands.
    #[arg(long, global = true)]
    pub bands: Option<usize>,
    /// Toy-model parameter u (`RE` or `RE,IM`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Toy-model marked point m.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub m: Option<String>,
    /// Hitchin-base scale B.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Polynomial P for `[[0, P], [1, 0]]`, ascending coefficients separated by `;`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub poly: Option<String>,
    /// Atoms as one-indexed orbital lists, e.g. `1,2;3`.
    #[arg(long, global = true)]
    pub atoms: Option<String>,
    /// Random momenta per cover check.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Orbitals per cell of the random model used when `--model` is absent.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    /// Fills every unset field from `file`.
    pub fn merged_with(mut self, file: RunConfig) -> Self {
        merge_fields!(self, file; model, cover, grid, region, tol, seed, out, tau, k, complex_k,
            bands, u, m, b, poly, atoms, trials, dim);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Invalid(format!(
                    "tolerance must be positive, got {t}"
                )));
            }
        }
        for (name, v) in [
            ("bands", self.bands),
            ("trials", self.trials),
            ("dim", self.dim),
        ] {
            if v == Some(0) {
                return Err(Error::Invalid(format!("--{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| invalid(format!("not a number: {s:?}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

/// `RE` or `RE,IM`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    match parse_list(s)?.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(invalid(format!("expected RE or RE,IM, got {s:?}"))),
    }
}

fn parse_counts(s: &str, axes: usize) -> Result<Vec<usize>> {
    let counts: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad sample count {t:?}")))
        })
        .collect::<Result<_>>()?;
    broadcast(counts, axes, "grid")
}

fn broadcast<T: Clone>(v: Vec<T>, axes: usize, what: &str) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); axes]),
        n if n == axes => Ok(v),
        n => Err(invalid(format!(
            "{what} has {n} entries, model has {axes} generators"
        ))),
    }
}

/// Builds the sweep grid from `--grid` and `--region`.
pub fn parse_grid(grid: Option<&str>, region: Option<&str>, axes: usize) -> Result<GridSpec> {
    let counts = match grid {
        Some(s) => parse_counts(s, axes)?,
        None => vec![DEFAULT_GRID; axes],
    };
    if counts.contains(&0) {
        return Err(invalid("grid sample counts must be at least 1"));
    }
    let mut axes_spec: Vec<AxisSpec> = counts.iter().map(|&n| AxisSpec::circle(n)).collect();
    if let Some(region) = region {
        let items: Vec<&str> = region.split(',').collect();
        for (axis, item) in axes_spec.iter_mut().zip(broadcast(items, axes, "region")?) {
            let parts: Vec<&str> = item.split(':').collect();
            (axis.log_modulus, axis.log_samples) = match parts.as_slice() {
                [r] => {
                    let r = parse_f64(r)?;
                    ((r, r), 1)
                }
                [lo, hi, n] => {
                    let n = n
                        .trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| invalid(format!("bad region sample count in {item:?}")))?;
                    ((parse_f64(lo)?, parse_f64(hi)?), n)
                }
                _ => return Err(invalid(format!("bad region item {item:?}"))),
            };
        }
    }
    Ok(GridSpec { axes: axes_spec })
}

fn parse_atoms(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|atom| {
            atom.split(',')
                .map(|o| match o.trim().parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => Err(Error::BadPartition(format!("bad orbital {o:?}"))),
                })
                .collect()
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn load_model(cfg: &RunConfig) -> Result<TightBindingModel> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| invalid("--model is required"))?;
    TightBindingModel::from_json(&read_text(path)?)
}

fn required_complex(v: &Option<String>, flag: &str) -> Result<Complex64> {
    parse_complex(
        v.as_deref()
            .ok_or_else(|| invalid(format!("--{flag} is required")))?,
    )
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Where the data goes and where the human-readable summary goes.
struct Output {
    out: Option<PathBuf>,
}

impl Output {
    fn data(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, bytes)?,
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    /// Summary lines go to stdout when data went to a file, otherwise to stderr.
    fn summary(&self, line: &str) {
        if self.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn cmd_bands(cfg: &RunConfig, out: &Output) -> Result<()> {
    let model = load_model(cfg)?;
    let grid = parse_grid(
        cfg.grid.as_deref(),
        cfg.region.as_deref(),
        model.group().generator_count(),
    )?;
    let bs = spectra::sweep(&model, &grid)?;
    let mut csv = Vec::new();
    bs.write_csv(&mut csv)?;
    out.data(&csv)?;
    let gap = cfg.tol.map_or_else(
        || bs.default_gap_tol(),
        |t| t * bs.spectral_radius().max(1.0),
    );
    let crossings = spectra::detect_crossings(&bs, gap).len();
    let (lo, hi) = bs.real_extremes();
    out.summary(&format!(
        "{} grid points x {} bands; min {lo}; max {hi}; crossings {crossings}",
        bs.grid.len(),
        model.dim()
    ));
    Ok(())
}

fn cmd_bloch_variety(cfg: &RunConfig, out: &Output) -> Result<()> {
    let model = load_model(cfg)?;
    let variety = spectra::bloch_variety(&model)?;
    let tol = cfg.tol.unwrap_or(VARIETY_RESIDUAL_TOL);
    if !(variety.residual <= tol) {
        return Err(Error::InterpolationResidual {
            residual: variety.residual,
            threshold: tol,
        });
    }
    out.data((variety.to_json()? + "\n").as_bytes())?;
    out.summary(&format!(
        "{} nonzero coefficients; held-out residual {:.3e}",
        variety.terms.len(),
        variety.residual
    ));
    Ok(())
}

fn cmd_euclidean(cfg: &RunConfig, out: &Output) -> Result<()> {
    let tau = cfg
        .tau
        .as_deref()
        .map_or(Ok(Complex64::new(0.0, 1.0)), parse_complex)?;
    let lattice = EuclideanLattice::new(tau)?;
    let k = match cfg.k.as_deref() {
        None => [0.0, 0.0],
        Some(s) => match parse_list(s)?.as_slice() {
            [x, y] => [*x, *y],
            _ => return Err(invalid(format!("--k expects KX,KY, got {s:?}"))),
        },
    };
    let n = cfg.bands.unwrap_or(4);
    let reciprocal = euclidean::reciprocal(&lattice)?;
    let bands = euclidean::empty_lattice_bands(&lattice, k, n)?;
    let torsion = euclidean::two_torsion_points(&lattice)?;
    let torsion_levels = torsion
        .iter()
        .map(|&p| {
            let lowest = euclidean::empty_lattice_bands(&lattice, p, 1)?.levels[0];
            Ok(json!({"k": p, "energy": lowest.energy, "multiplicity": lowest.multiplicity}))
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = euclidean::modular_lambda(tau)?;
    let mut report = json!({
        "tau": [tau.re, tau.im],
        "reciprocal": reciprocal,
        "k": k,
        "folded_k": euclidean::fold(k, &lattice)?,
        "bands": bands,
        "two_torsion": torsion_levels,
        "lambda": [lambda.re, lambda.im],
    });
    if let Some(s) = cfg.complex_k.as_deref() {
        let v = parse_list(s)?;
        let [xr, xi, yr, yi] = v[..] else {
            return Err(invalid(format!(
                "--complex-k expects four numbers, got {s:?}"
            )));
        };
        let d = euclidean::complex_dispersion(Complex64::new(xr, xi), Complex64::new(yr, yi));
        report["dispersion"] = serde_json::to_value(d)?;
    }
    out.data(to_json(&report)?.as_bytes())?;
    let ground = &bands.levels[0];
    out.summary(&format!(
        "lowest level E = {} with degeneracy {}",
        ground.energy, ground.multiplicity
    ));
    Ok(())
}

fn toy_point(cfg: &RunConfig) -> Result<ToyModelPoint> {
    let b = cfg
        .b
        .as_deref()
        .map_or(Ok(Complex64::new(1.0, 0.0)), parse_complex)?;
    ToyModelPoint::new(
        required_complex(&cfg.m, "m")?,
        required_complex(&cfg.u, "u")?,
        b,
    )
}

fn pole_json(p: higgs_toy::Pole) -> serde_json::Value {
    match p {
        higgs_toy::Pole::Finite(z) => json!([z.re, z.im]),
        higgs_toy::Pole::Infinity => json!("infinity"),
    }
}

fn mat2_json(m: &higgs_toy::Mat2) -> serde_json::Value {
    json!([
        [[m[(0, 0)].re, m[(0, 0)].im], [m[(0, 1)].re, m[(0, 1)].im]],
        [[m[(1, 0)].re, m[(1, 0)].im], [m[(1, 1)].re, m[(1, 1)].im]]
    ])
}

fn pair_json(v: &[Complex64]) -> serde_json::Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn cmd_higgs_toy(cfg: &RunConfig, out: &Output) -> Result<()> {
    let point = toy_point(cfg)?;
    let scale = (1.0 + point.u.norm()).powi(4);
    let tol = cfg.tol.unwrap_or(1e-12) * scale;
    let mut connection = Vec::new();
    for (pole, r) in higgs_toy::connection_form(&point).residues() {
        connection.push(json!({
            "pole": pole_json(pole),
            "residue": mat2_json(&r),
            "eigenvalues": pair_json(&higgs_toy::eigenvalues2(&r)),
            "monodromy": pair_json(&higgs_toy::local_monodromy_eigenvalues(&r)?),
        }));
    }
    let mut higgs = Vec::new();
    for (pole, r) in higgs_toy::higgs_form(&point).residues() {
        higgs.push(json!({
            "pole": pole_json(pole),
            "residue": mat2_json(&r),
            "nilpotent": higgs_toy::is_nilpotent(&r, tol),
        }));
    }
    let hitchin = higgs_toy::hitchin_coordinate(&point)?;
    let report = json!({
        "point": point,
        "connection": connection,
        "higgs": higgs,
        "hitchin_coordinate": hitchin,
    });
    out.data(to_json(&report)?.as_bytes())?;
    out.summary(&format!(
        "hitchin coordinate {} (spread {:.1e})",
        hitchin.value, hitchin.spread
    ));
    Ok(())
}

fn cmd_spectral_curve(cfg: &RunConfig, out: &Output) -> Result<()> {
    let phi = match cfg.poly.as_deref() {
        Some(s) => {
            let coeffs = s
                .split(';')
                .map(parse_complex)
                .collect::<Result<Vec<_>>>()?;
            Rank2TwistedHiggs::new(1, 0, higgs_toy::small_stratum_form(&Poly::new(coeffs))?)?
        }
        None => spectral_curve::toy_to_twisted(&toy_point(cfg)?)?,
    };
    let info = spectral_curve::analyze(&phi)?;
    out.data(to_json(&info)?.as_bytes())?;
    match info.genus {
        Some(g) => out.summary(&format!("smooth spectral curve of genus {g}")),
        None => out.summary(&format!(
            "singular spectral curve: {}",
            info.diagnostic
                .as_deref()
                .unwrap_or("repeated branch point")
        )),
    }
    Ok(())
}

fn cmd_cover_check(cfg: &RunConfig, out: &Output) -> Result<()> {
    let path = cfg
        .cover
        .as_ref()
        .ok_or_else(|| invalid("--cover is required"))?;
    let cover = UnbranchedCover::from_json(&read_text(path)?)?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = match &cfg.model {
        Some(_) => load_model(cfg)?,
        None => sampling::model(&mut rng, cover.group().genus(), cfg.dim.unwrap_or(2)),
    };
    let tol = cfg.tol.unwrap_or(PUSHFORWARD_TOL);
    let mut trials = Vec::new();
    let mut worst = 0.0f64;
    let mut pass = true;
    for _ in 0..cfg.trials.unwrap_or(DEFAULT_TRIALS) {
        let chi = sampling::unitary_momentum(&mut rng, cover.cover_genus());
        let mut r = pushforward_check(&model, &cover, &chi)?;
        r.pass = r.distance <= tol * r.spectral_radius.max(1.0);
        worst = worst.max(r.distance);
        pass &= r.pass;
        trials.push(json!({"chi": chi, "report": r}));
    }
    let report = json!({
        "seed": seed,
        "sheets": cover.sheets(),
        "connected": cover.is_connected(),
        "cover_genus": cover.cover_genus(),
        "tolerance": tol,
        "max_distance": worst,
        "pass": pass,
        "trials": trials,
    });
    out.data(to_json(&report)?.as_bytes())?;
    let verdict = if pass { "PASS" } else { "FAIL" };
    out.summary(&format!(
        "{verdict}, max distance {worst:.3e} (tolerance {tol:.1e} relative)"
    ));
    if pass {
        Ok(())
    } else {
        Err(Error::CheckFailed(format!(
            "spectral distance {worst:.3e} above tolerance"
        )))
    }
}

fn cmd_quiver(cfg: &RunConfig, out: &Output) -> Result<()> {
    let model = load_model(cfg)?;
    let atoms = match cfg.atoms.as_deref() {
        Some(s) => parse_atoms(s)?,
        None => (0..model.dim()).map(|i| vec![i]).collect(),
    };
    let q = quiver_from_model(&model, &atoms)?;
    out.data((q.to_json()? + "\n").as_bytes())?;
    let k = q.counts();
    out.summary(&format!(
        "{} nodes, {} self-arrows, {} internal bonds, {} crossing bonds",
        k.nodes, k.self_arrows, k.internal_bonds, k.crossing_bonds
    ));
    Ok(())
}

fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let out = Output {
        out: cfg.out.clone(),
    };
    match command {
        Command::Bands => cmd_bands(cfg, &out),
        Command::BlochVariety => cmd_bloch_variety(cfg, &out),
        Command::Euclidean => cmd_euclidean(cfg, &out),
        Command::HiggsToy => cmd_higgs_toy(cfg, &out),
        Command::SpectralCurve => cmd_spectral_curve(cfg, &out),
        Command::CoverCheck => cmd_cover_check(cfg, &out),
        Command::Quiver => cmd_quiver(cfg, &out),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Input => EXIT_INPUT,
        ErrorClass::Numeric => EXIT_NUMERIC,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let cfg = match &cli.config {
        None => Ok(cli.options.clone()),
        Some(path) => read_text(path)
            .and_then(|text| Ok(serde_json::from_str::<RunConfig>(&text)?))
            .map(|file| cli.options.clone().merged_with(file)),
    };
    match cfg.and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2., 0.));
        assert_eq!(parse_complex("-1,0.5").unwrap(), Complex64::new(-1., 0.5));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid(Some("8"), None, 2).unwrap();
        assert_eq!(g.shape(), vec![8, 8]);
        let g = parse_grid(Some("4,6"), Some("-0.5:0.5:3,0"), 2).unwrap();
        assert_eq!(g.shape(), vec![12, 6]);
        assert_eq!(g.axes[0].log_modulus, (-0.5, 0.5));
        assert!(parse_grid(Some("4,4,4"), None, 2).is_err());
        assert!(parse_grid(Some("0"), None, 2).is_err());
        assert!(parse_grid(None, Some("1:2"), 2).is_err());
    }

    #[test]
    fn atoms_parsing() {
        assert_eq!(parse_atoms("1,2;3").unwrap(), vec![vec![0, 1], vec![2]]);
        assert!(parse_atoms("0").is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let flags = RunConfig {
            seed: Some(5),
            ..Default::default()
        };
        let file: RunConfig = serde_json::from_str(r#"{"seed": 9, "trials": 3}"#).unwrap();
        let merged = flags.merged_with(file);
        assert_eq!((merged.seed, merged.trials), (Some(5), Some(3)));
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }
}
