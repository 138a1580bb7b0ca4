//! NRHO fidelity study: configuration, orchestration over a time grid, and
//! CSV / JSON / sample-dump artifacts.
//!
//! One variational propagation of the reference trajectory supplies the
//! STM and STT at every grid time; Monte Carlo samples and unscented sigma
//! points are propagated through the full CR3BP flow to the same grid.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cr3bp::{nrho_reference, propagate_state, propagate_variations, Cr3bpParams};
use crate::error::{Error, Result};
use crate::mc::{propagate_samples_multi, sample_gaussian, SampleCloud};
use crate::metrics::{
    esmd, esmdole_2, esmdole_mc, max_directional_moment, mcr, sadl, smdm, wussadl, wussolc, wussos,
    FidelityReport, CSV_COLUMNS,
};
use crate::moments::{excess_kurtosis, sample_moments, standardized_moments, GaussianBelief, MomentSet};
use crate::ode::Tolerances;
use crate::teig::SolverOptions;
use crate::transforms::{sigma_points, statistical_linearization, taylor2_moments, ut_moments, QuadraticMap, UtParams};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const SAMPLE_HEADER: [&str; 6] = ["x", "y", "z", "vx", "vy", "vz"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Mean state `[x, y, z, vx, vy, vz]`, nondimensional.
    pub mean: Vec<f64>,
    /// Row-major 6 × 6 covariance.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub mu_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Grid times (nearest node is used) at which to dump the MC cloud.
    pub dump_samples: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_samples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantConfig {
    pub monte_carlo: bool,
    pub second_order: bool,
    pub unscented: bool,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            monte_carlo: true,
            second_order: true,
            unscented: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub initial: InitialConfig,
    pub dynamics: DynamicsConfig,
    pub grid: GridConfig,
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub unscented: UtParams,
    #[serde(default)]
    pub eigensolver: SolverOptions,
    #[serde(default)]
    pub integrator: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub variants: VariantConfig,
}

/// Reference NRHO, `Pₓ = 10⁻⁸ diag(1, 0, 1, 0, 0, 0) + 10⁻¹⁰ I₆`, one period
/// on 100 nodes, `N = 10⁴`.
pub fn default_config() -> StudyConfig {
    let r = nrho_reference::<f64>();
    let mut cov = vec![vec![0.0; 6]; 6];
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] = 1e-10;
    }
    cov[0][0] += 1e-8;
    cov[2][2] += 1e-8;
    StudyConfig {
        initial: InitialConfig {
            mean: r.x0.iter().copied().collect(),
            covariance: cov,
        },
        dynamics: DynamicsConfig { mu_star: r.params.mu },
        grid: GridConfig {
            t_start: 0.0,
            t_end: r.period,
            count: 100,
        },
        monte_carlo: MonteCarloConfig {
            samples: 10_000,
            seed: 20_240_601,
        },
        unscented: UtParams::default(),
        eigensolver: SolverOptions::default(),
        integrator: Tolerances::default(),
        output: OutputConfig::default(),
        variants: VariantConfig::default(),
    }
}

impl StudyConfig {
    /// Parses TOML; syntax and type errors carry line / column and the
    /// offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.initial.mean.len() != 6 {
            return bad("initial.mean", format!("expected 6 entries, found {}", self.initial.mean.len()));
        }
        if self.initial.covariance.len() != 6 || self.initial.covariance.iter().any(|r| r.len() != 6) {
            return bad("initial.covariance", "expected 6 rows of 6 entries".into());
        }
        if let Err(e) = self.belief() {
            return bad("initial.covariance", e.to_string());
        }
        if let Err(e) = Cr3bpParams::new(self.dynamics.mu_star) {
            return bad("dynamics.mu_star", e.to_string());
        }
        if self.grid.count < 2 {
            return bad("grid.count", format!("must be at least 2 (got {})", self.grid.count));
        }
        if !(self.grid.t_start >= 0.0) || !(self.grid.t_end > self.grid.t_start) {
            return bad(
                "grid",
                format!(
                    "need 0 <= t_start < t_end (got {} .. {})",
                    self.grid.t_start, self.grid.t_end
                ),
            );
        }
        if self.monte_carlo.samples < 2 {
            return bad(
                "monte_carlo.samples",
                format!("Monte Carlo needs at least 2 samples (got {})", self.monte_carlo.samples),
            );
        }
        if !(self.eigensolver.tol > 0.0) || self.eigensolver.max_iter == 0 || self.eigensolver.restarts == 0 {
            return bad("eigensolver", "tol must be positive, max_iter and restarts at least 1".into());
        }
        if !(self.integrator.rtol > 0.0) || !(self.integrator.atol > 0.0) {
            return bad("integrator", "rtol and atol must be positive".into());
        }
        let n = 6.0;
        let spread = self.unscented.alpha.powi(2) * (n + self.unscented.kappa_for(6));
        if !(spread > 0.0) {
            return bad("unscented", format!("n + lambda = {spread} must be positive"));
        }
        if !self.output.dump_samples.is_empty() && !self.variants.monte_carlo {
            return bad("output.dump_samples", "sample dumps need the Monte Carlo variant".into());
        }
        Ok(())
    }

    pub fn belief(&self) -> Result<GaussianBelief<f64>> {
        let cov = DMatrix::from_fn(6, 6, |i, j| self.initial.covariance[i][j]);
        GaussianBelief::new(DVector::from_column_slice(&self.initial.mean), cov)
    }

    pub fn params(&self) -> Result<Cr3bpParams<f64>> {
        Cr3bpParams::new(self.dynamics.mu_star)
    }

    /// Uniform grid including both end points.
    pub fn grid_times(&self) -> Vec<f64> {
        let g = &self.grid;
        let h = (g.t_end - g.t_start) / (g.count - 1) as f64;
        (0..g.count)
            .map(|k| if k + 1 == g.count { g.t_end } else { g.t_start + h * k as f64 })
            .collect()
    }
}

/// Decorrelates eigen-solve seeds by grid index and metric.
fn derive_seed(base: u64, index: usize, tag: u64) -> u64 {
    let mut z = base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

mod tag {
    pub const WUSSOS: u64 = 1;
    pub const SKEW_2: u64 = 2;
    pub const KURT_2: u64 = 3;
    pub const SKEW_MC: u64 = 4;
    pub const KURT_MC: u64 = 5;
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub variational: f64,
    pub unscented: f64,
    pub monte_carlo: f64,
    pub metrics: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResults {
    pub times: Vec<f64>,
    pub reports: Vec<FidelityReport<f64>>,
    /// Propagated MC clouds per grid time (empty when MC is disabled).
    pub clouds: Vec<SampleCloud<f64>>,
    pub phases: PhaseTimes,
}

/// Runs every enabled variant over the grid without touching the file system.
pub fn evaluate_study(cfg: &StudyConfig) -> Result<StudyResults> {
    cfg.validate()?;
    let start = Instant::now();
    let belief = cfg.belief()?;
    let params = cfg.params()?;
    let times = cfg.grid_times();
    let tol = cfg.integrator;
    let px = belief.cov.clone();
    let mut phases = PhaseTimes::default();

    let t0 = Instant::now();
    let variations = propagate_variations(belief.mean.as_slice(), &times, &params, &tol)?;
    phases.variational = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let ut_outputs = if cfg.variants.unscented {
        let sigma = sigma_points(&belief, &cfg.unscented)?;
        let per_point: Vec<Vec<DVector<f64>>> = sigma
            .points
            .par_iter()
            .map(|x| propagate_state(x.as_slice(), &times, &params, &tol))
            .collect::<Result<_>>()?;
        Some((sigma, per_point))
    } else {
        None
    };
    phases.unscented = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let (cloud0, clouds) = if cfg.variants.monte_carlo {
        let cloud0 = sample_gaussian(&belief, cfg.monte_carlo.samples, cfg.monte_carlo.seed)?;
        let clouds = propagate_samples_multi(&cloud0, |x| propagate_state(x.as_slice(), &times, &params, &tol))?;
        (Some(cloud0), clouds)
    } else {
        (None, Vec::new())
    };
    phases.monte_carlo = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let opts = cfg.eigensolver;
    let seed = cfg.monte_carlo.seed;
    let reports: Vec<FidelityReport<f64>> = (0..times.len())
        .into_par_iter()
        .map(|k| -> Result<FidelityReport<f64>> {
            let v = &variations[k];
            let map = QuadraticMap::new(v.x.clone(), v.stm.clone(), v.stt.clone())?;
            let mu_lin = &map.value;
            let p_lin = crate::linalg::symmetrize_matrix(&(&map.jac * &px * map.jac.transpose()));
            let mut r = FidelityReport::empty(times[k]);

            if cfg.variants.second_order {
                let t2 = taylor2_moments(&belief, &map)?;
                r.smdm.second = Some(smdm(&t2.mean, mu_lin, &p_lin)?);
                r.esmd.second = Some(esmd(&t2.mean, &t2.cov, mu_lin, &p_lin)?);
                r.esmdole.second = Some(esmdole_2(&map, &px, &p_lin)?);
                r.mcr.second = Some(mcr(&p_lin, &t2.cov)?.value);
                r.wussos = Some(wussos(&map, &px, &p_lin, &opts, derive_seed(seed, k, tag::WUSSOS))?);
                r.wussolc = Some(wussolc(&map, &px, &p_lin)?);
                let std = standardized_moments(&t2.to_moment_set())?;
                r.max_skew.second = Some(max_directional_moment(
                    &std.skewness,
                    &opts,
                    derive_seed(seed, k, tag::SKEW_2),
                )?);
                r.max_kurt.second = Some(max_directional_moment(
                    &excess_kurtosis(&std.kurtosis)?,
                    &opts,
                    derive_seed(seed, k, tag::KURT_2),
                )?);
            }

            if let Some((sigma, per_point)) = &ut_outputs {
                let outputs: Vec<DVector<f64>> = per_point.iter().map(|traj| traj[k].clone()).collect();
                let ut = ut_moments(sigma, &outputs)?;
                r.smdm.ut = Some(smdm(&ut.mean, mu_lin, &p_lin)?);
                r.esmd.ut = Some(esmd(&ut.mean, &ut.cov, mu_lin, &p_lin)?);
                r.mcr.ut = Some(mcr(&p_lin, &ut.cov)?.value);
                let sl = statistical_linearization(&belief, &ut)?;
                r.sadl = Some(sadl(&map.jac, &sl.g_sl)?);
                r.wussadl = Some(wussadl(&map.jac, &sl.g_sl, &px, &p_lin)?);
            }

            if let Some(cloud0) = &cloud0 {
                let cloud = &clouds[k];
                let ms: MomentSet<f64> = sample_moments(&cloud.samples, None)?;
                r.smdm.mc = Some(smdm(&ms.mean, mu_lin, &p_lin)?);
                r.esmd.mc = Some(esmd(&ms.mean, &ms.cov, mu_lin, &p_lin)?);
                r.mcr.mc = Some(mcr(&p_lin, &ms.cov)?.value);
                r.esmdole.mc = Some(esmdole_mc(cloud0, cloud, &map, &belief.mean, &p_lin)?);
                let std = standardized_moments(&ms)?;
                r.max_skew.mc = Some(max_directional_moment(
                    &std.skewness,
                    &opts,
                    derive_seed(seed, k, tag::SKEW_MC),
                )?);
                r.max_kurt.mc = Some(max_directional_moment(
                    &excess_kurtosis(&std.kurtosis)?,
                    &opts,
                    derive_seed(seed, k, tag::KURT_MC),
                )?);
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    phases.metrics = t0.elapsed().as_secs_f64();
    phases.total = start.elapsed().as_secs_f64();

    Ok(StudyResults {
        times,
        reports,
        clouds,
        phases,
    })
}

/// CSV text for a set of reports, header first.
pub fn metrics_csv(reports: &[FidelityReport<f64>]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub grid_count: usize,
    pub samples: Option<usize>,
    pub columns: &'static [&'static str],
    pub files: Vec<String>,
    pub wall_seconds: &'a PhaseTimes,
    pub config: &'a StudyConfig,
}

/// Index of the grid node nearest to `t`.
pub fn nearest_node(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (k, &tk) in times.iter().enumerate() {
        if (tk - t).abs() < (times[best] - t).abs() {
            best = k;
        }
    }
    best
}

pub fn sample_dump_name(t: f64) -> String {
    format!("samples_t{t:.6}.csv")
}

/// Everything a finished run wrote.
#[derive(Debug, Clone)]
pub struct StudyRun {
    pub results: StudyResults,
    pub metrics_path: PathBuf,
    pub manifest_path: PathBuf,
    pub dump_paths: Vec<PathBuf>,
}

/// Evaluates the study and writes `metrics.csv`, `run_manifest.json` and any
/// requested sample dumps into `cfg.output.dir`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyRun> {
    let results = evaluate_study(cfg)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;

    let metrics_path = dir.join(METRICS_FILE);
    std::fs::write(&metrics_path, metrics_csv(&results.reports))?;

    let mut dump_paths = Vec::new();
    for &t in &cfg.output.dump_samples {
        let k = nearest_node(&results.times, t);
        let path = dir.join(sample_dump_name(results.times[k]));
        results.clouds[k].write_csv(&path, &SAMPLE_HEADER)?;
        dump_paths.push(path);
    }

    let mut files = vec![METRICS_FILE.to_string()];
    files.extend(
        dump_paths
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())),
    );
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.monte_carlo.seed,
        grid_count: results.times.len(),
        samples: cfg.variants.monte_carlo.then_some(cfg.monte_carlo.samples),
        columns: &CSV_COLUMNS,
        files,
        wall_seconds: &results.phases,
        config: cfg,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;

    Ok(StudyRun {
        results,
        metrics_path,
        manifest_path,
        dump_paths,
    })
}
