//! Configuration files, the `run` pipeline and the `verify` property suite
//! behind the `synth` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamp::{
    output_derivative, output_function, prox_constellation, solve, SolverError, SynthesisResult,
    CONVERGENCE_WINDOW, INITIAL_THETA, INPUT_CURVATURE_FLOOR, MAGNITUDE_FLOOR,
    OUTPUT_CURVATURE_FLOOR,
};
use crate::metrics::{
    default_angle_grid, evaluate, MetricsError, MetricsReport, DB_FLOOR, DEFAULT_PATTERN_POINTS,
};
use crate::model::{
    evenly_spaced_directions, freq_index, ConfigError, Constellation, DesiredPattern, Passband,
    RadarConfig,
};
use crate::operator::{steering_vector, BeamOperator, OperatorError, DENSE_COLUMN_CAP};
use crate::oracle::{grid_maximize_output, output_derivative_fd};

pub const TIE_BREAK_RULE: &str = "equidistant phases resolve to the lowest constellation index";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config file {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("{given} directions listed but num_directions = {declared}")]
    DirectionCountMismatch { given: usize, declared: usize },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Everything needed to reproduce a run: the radar configuration and the
/// flat desired intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub config: RadarConfig,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Antennas,
    Samples,
    Directions,
    Angles,
    CenterFreq,
    SampleInterval,
    SampleRate,
    Bits,
    Damping,
    Regularization,
    MaxIters,
    RelTol,
    Passband,
    PassbandLo,
    PassbandHi,
    Seed,
    Intensity,
}

fn key_of(name: &str) -> Option<Key> {
    Some(match name {
        "num_antennas" | "antennas" | "N" => Key::Antennas,
        "num_samples" | "samples" | "T" => Key::Samples,
        "num_directions" | "K" => Key::Directions,
        "directions" | "directions_deg" | "angles" | "phi" | "directions_rad" => Key::Angles,
        "center_freq" | "fc" | "f_c" => Key::CenterFreq,
        "sample_interval" | "Ts" | "T_s" => Key::SampleInterval,
        "sample_rate" | "fs" => Key::SampleRate,
        "dac_bits" | "bits" | "b" => Key::Bits,
        "damping" | "mu" => Key::Damping,
        "regularization" | "alpha" => Key::Regularization,
        "max_iters" => Key::MaxIters,
        "rel_tol" => Key::RelTol,
        "passband" => Key::Passband,
        "passband_lo" => Key::PassbandLo,
        "passband_hi" => Key::PassbandHi,
        "seed" => Key::Seed,
        "intensity" => Key::Intensity,
        _ => return None,
    })
}

/// Parsed but not yet interpreted settings. Later entries override earlier
/// ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: BTreeMap<Key, (String, String)>,
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = key_of(key).ok_or_else(|| CliError::UnknownKey(key.to_string()))?;
        // A sample rate and a sample interval describe the same quantity.
        match k {
            Key::SampleRate => {
                self.entries.remove(&Key::SampleInterval);
            }
            Key::SampleInterval => {
                self.entries.remove(&Key::SampleRate);
            }
            _ => {}
        }
        self.entries
            .insert(k, (key.to_string(), value.trim().to_string()));
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(CliError::Syntax { line: i + 1 })?;
            s.set(k.trim(), v)?;
        }
        Ok(s)
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::BadOverride(assignment.to_string()))?;
        self.set(k.trim(), v)
    }

    /// Settings that reproduce `spec` exactly.
    pub fn from_spec(spec: &RunSpec) -> Self {
        let c = &spec.config;
        let radians: Vec<String> = c.directions.iter().map(|r| format!("{r:?}")).collect();
        let mut s = Self::default();
        let pairs = [
            ("N", c.num_antennas.to_string()),
            ("T", c.num_samples.to_string()),
            ("directions_rad", radians.join(", ")),
            ("fc", format!("{:?}", c.center_freq)),
            ("Ts", format!("{:?}", c.sample_interval)),
            ("b", c.dac_bits.to_string()),
            ("mu", format!("{:?}", c.damping)),
            ("alpha", format!("{:?}", c.regularization)),
            ("max_iters", c.max_iters.to_string()),
            ("rel_tol", format!("{:?}", c.rel_tol)),
            ("passband", format!("{}, {}", c.passband.lo, c.passband.hi)),
            ("seed", c.seed.to_string()),
            ("intensity", format!("{:?}", spec.intensity)),
        ];
        for (k, v) in pairs {
            s.set(k, &v).expect("known key");
        }
        s
    }

    fn raw(&self, k: Key) -> Option<(&str, &str)> {
        self.entries.get(&k).map(|(n, v)| (n.as_str(), v.as_str()))
    }

    fn get<T: std::str::FromStr>(&self, k: Key) -> Result<Option<T>, CliError> {
        match self.raw(k) {
            None => Ok(None),
            Some((name, v)) => v.parse().map(Some).map_err(|_| CliError::InvalidValue {
                key: name.to_string(),
                value: v.to_string(),
            }),
        }
    }

    fn list<T: std::str::FromStr>(&self, k: Key) -> Result<Option<Vec<T>>, CliError> {
        match self.raw(k) {
            None => Ok(None),
            Some((name, v)) => v
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| CliError::InvalidValue {
                    key: name.to_string(),
                    value: v.to_string(),
                }),
        }
    }

    /// Interprets the settings and validates the resulting configuration.
    pub fn build(&self) -> Result<RunSpec, CliError> {
        let defaults = RadarConfig::full_scale();
        let n = self.get(Key::Antennas)?.unwrap_or(defaults.num_antennas);
        let t = self.get(Key::Samples)?.unwrap_or(defaults.num_samples);
        let angles: Option<Vec<f64>> = self.list(Key::Angles)?;
        let declared: Option<usize> = self.get(Key::Directions)?;
        let k = match (&angles, declared) {
            (Some(a), Some(k)) if a.len() != k => {
                return Err(CliError::DirectionCountMismatch {
                    given: a.len(),
                    declared: k,
                })
            }
            (Some(a), _) => a.len(),
            (None, Some(k)) => k,
            (None, None) => defaults.num_directions(),
        };
        let mut cfg = RadarConfig::new(n, t, k);
        let in_radians = matches!(self.raw(Key::Angles), Some(("directions_rad", _)));
        cfg.directions = match angles {
            Some(a) if in_radians => a,
            Some(a) => a.iter().map(|d| d.to_radians()).collect(),
            None => evenly_spaced_directions(k),
        };
        if let Some(v) = self.get(Key::CenterFreq)? {
            cfg.center_freq = v;
        }
        if let Some(v) = self.get(Key::SampleInterval)? {
            cfg.sample_interval = v;
        }
        if let Some(v) = self.get::<f64>(Key::SampleRate)? {
            cfg.sample_interval = 1.0 / v;
        }
        if let Some(v) = self.get(Key::Bits)? {
            cfg.dac_bits = v;
        }
        if let Some(v) = self.get(Key::Damping)? {
            cfg.damping = v;
        }
        if let Some(v) = self.get(Key::Regularization)? {
            cfg.regularization = v;
        }
        if let Some(v) = self.get(Key::MaxIters)? {
            cfg.max_iters = v;
        }
        if let Some(v) = self.get(Key::RelTol)? {
            cfg.rel_tol = v;
        }
        if let Some(band) = self.list::<i64>(Key::Passband)? {
            match band[..] {
                [lo, hi] => cfg.passband = Passband::new(lo, hi),
                _ => {
                    let (name, v) = self.raw(Key::Passband).expect("present");
                    return Err(CliError::InvalidValue {
                        key: name.to_string(),
                        value: v.to_string(),
                    });
                }
            }
        }
        if let Some(lo) = self.get(Key::PassbandLo)? {
            cfg.passband.lo = lo;
        }
        if let Some(hi) = self.get(Key::PassbandHi)? {
            cfg.passband.hi = hi;
        }
        if let Some(v) = self.get(Key::Seed)? {
            cfg.seed = v;
        }
        let intensity = self.get(Key::Intensity)?.unwrap_or(1.0);
        let config = cfg.validate()?;
        DesiredPattern::flat(&config, intensity)?;
        Ok(RunSpec { config, intensity })
    }
}

/// Reads a key-value config file or a `manifest.json` from an earlier run,
/// then applies `key=value` overrides in order.
pub fn load_spec(path: &Path, overrides: &[String]) -> Result<RunSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    let mut settings = if text.trim_start().starts_with('{') {
        let manifest: RunManifest = serde_json::from_str(&text)?;
        Settings::from_spec(&manifest.spec)
    } else {
        Settings::parse(&text)?
    };
    for o in overrides {
        settings.apply_override(o)?;
    }
    settings.build()
}

/// Fixed numerical choices, recorded alongside every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConstants {
    pub theta_init: f64,
    pub magnitude_floor: f64,
    pub output_curvature_floor: f64,
    pub input_curvature_floor: f64,
    pub rel_tol: f64,
    pub convergence_window: usize,
    pub tie_break: String,
    pub db_floor: f64,
    pub correlation: String,
    pub pattern: String,
}

impl SolverConstants {
    pub fn for_config(cfg: &RadarConfig) -> Self {
        Self {
            theta_init: INITIAL_THETA,
            magnitude_floor: MAGNITUDE_FLOOR,
            output_curvature_floor: OUTPUT_CURVATURE_FLOOR,
            input_curvature_floor: INPUT_CURVATURE_FLOOR,
            rel_tol: cfg.rel_tol,
            convergence_window: CONVERGENCE_WINDOW,
            tie_break: TIE_BREAK_RULE.to_string(),
            db_floor: DB_FLOOR,
            correlation: "circular over T samples".to_string(),
            pattern: "reconstructed: sum over frequency bins of |a(m, phi)^T x_F[m]|^2, \
                      normalized to a 0 dB maximum"
                .to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub spec: RunSpec,
    pub seed: u64,
    pub duration_s: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_cost: f64,
    pub normalized_final_cost: f64,
    pub oob_suppression_db: Option<f64>,
    pub directional_oob_suppression_db: Option<f64>,
    pub peak_crosscorr_db: Option<f64>,
    pub peak_autocorr_sidelobe_db: Option<f64>,
    pub constants: SolverConstants,
}

/// Results of one synthesis plus its metrics.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub result: SynthesisResult,
    pub metrics: MetricsReport,
    pub duration_s: f64,
}

impl RunOutput {
    pub fn manifest(&self) -> RunManifest {
        let total = DesiredPattern::flat(&self.spec.config, self.spec.intensity)
            .map(|d| d.total())
            .unwrap_or(0.0);
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: self.spec.clone(),
            seed: self.spec.config.seed,
            duration_s: self.duration_s,
            converged: self.result.converged,
            iterations: self.result.iterations,
            final_cost: self.result.final_cost,
            normalized_final_cost: self.result.final_cost / total,
            oob_suppression_db: self.metrics.oob_suppression_db,
            directional_oob_suppression_db: self.metrics.directional_oob_suppression_db,
            peak_crosscorr_db: self.metrics.peak_crosscorr_db,
            peak_autocorr_sidelobe_db: self.metrics.peak_autocorr_sidelobe_db,
            constants: SolverConstants::for_config(&self.spec.config),
        }
    }
}

pub fn run_synthesis(spec: &RunSpec) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let cfg = &spec.config;
    let d = DesiredPattern::flat(cfg, spec.intensity)?;
    let mut op = BeamOperator::new(cfg)?;
    let result = solve(cfg, &mut op, &d)?;
    let metrics = evaluate(
        &result.x_sol,
        cfg,
        &op,
        &default_angle_grid(DEFAULT_PATTERN_POINTS),
    )?;
    Ok(RunOutput {
        spec: spec.clone(),
        result,
        metrics,
        duration_s: start.elapsed().as_secs_f64(),
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV files keyed by file name, in write order.
pub fn render_csvs(out: &RunOutput) -> Vec<(&'static str, String)> {
    let cfg = &out.spec.config;
    let r = &out.result;
    let m = &out.metrics;
    let t = cfg.num_samples;
    let total = DesiredPattern::flat(cfg, out.spec.intensity)
        .map(|d| d.total())
        .unwrap_or(0.0);

    let mut waveform = String::from("index,real,imag,constellation_index\n");
    for (i, (x, idx)) in r.x_sol.iter().zip(&r.x_indices).enumerate() {
        let _ = writeln!(waveform, "{i},{},{},{idx}", num(x.re), num(x.im));
    }

    let mut convergence = String::from("iteration,cost,normalized_cost,beta_real,beta_imag\n");
    for (i, (c, b)) in r.cost_trace.iter().zip(&r.beta_trace).enumerate() {
        let _ = writeln!(
            convergence,
            "{},{},{},{},{}",
            i + 1,
            num(*c),
            num(c / total),
            num(b.re),
            num(b.im)
        );
    }

    let mut psd = String::from("frequency_index,frequency_hz,power_db\n");
    for (pos, p) in m.psd_db.iter().enumerate() {
        let mi = freq_index(t, pos);
        let hz = mi as f64 / (t as f64 * cfg.sample_interval);
        let _ = writeln!(psd, "{mi},{},{}", num(hz), num(*p));
    }

    let mut autocorr = String::from("lag,pair,value_db\n");
    for (k, row) in m.autocorr_db.iter().enumerate() {
        for (lag, v) in row.iter().enumerate() {
            let _ = writeln!(autocorr, "{lag},{k}-{k},{}", num(*v));
        }
    }

    let mut crosscorr = String::from("lag,pair,value_db\n");
    for (k, rows) in m.crosscorr_db.iter().enumerate() {
        for (l, row) in rows.iter().enumerate().filter(|(l, _)| *l != k) {
            for (lag, v) in row.iter().enumerate() {
                let _ = writeln!(crosscorr, "{lag},{k}-{l},{}", num(*v));
            }
        }
    }

    let mut pattern = String::from("angle_rad,gain_db\n");
    for (a, g) in m.pattern_grid.iter().zip(&m.pattern_db) {
        let _ = writeln!(pattern, "{},{}", num(*a), num(*g));
    }

    vec![
        ("waveform.csv", waveform),
        ("convergence.csv", convergence),
        ("psd.csv", psd),
        ("autocorr.csv", autocorr),
        ("crosscorr.csv", crosscorr),
        ("pattern.csv", pattern),
    ]
}

pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    let wrap = |path: PathBuf| move |source| CliError::Write { path, source };
    fs::create_dir_all(dir).map_err(wrap(dir.to_path_buf()))?;
    for (name, body) in render_csvs(out) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(wrap(path.clone()))?;
    }
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&out.manifest())?;
    json.push('\n');
    fs::write(&path, json).map_err(wrap(path.clone()))?;
    Ok(())
}

/// Outcome of one `verify` property.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

const VERIFY_TOL: f64 = 1e-10;
const VERIFY_DRAWS: usize = 50;
const SAMPLED_COLUMNS: usize = 16;

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_constellation(bits: u32) -> PropertyCheck {
    let name = "constellation";
    let c = match Constellation::new(bits) {
        Ok(c) => c,
        Err(e) => return PropertyCheck::new(name, false, e.to_string()),
    };
    let expected = 1usize << bits;
    let unit = c.points().iter().all(|p| (p.norm() - 1.0).abs() < 1e-15);
    let fixed = c
        .points()
        .iter()
        .all(|&p| prox_constellation(p, &c) == p && prox_constellation(p * 3.7, &c) == p);
    PropertyCheck::new(
        name,
        c.len() == expected && unit && fixed,
        format!(
            "{} points, unit modulus {unit}, prox fixed points {fixed}",
            c.len()
        ),
    )
}

fn check_adjoint(op: &BeamOperator, rng: &mut ChaCha8Rng) -> Result<PropertyCheck, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let x = random_vector(rng, op.cols());
        let z = random_vector(rng, op.rows());
        let lhs = inner(&op.forward(&x)?, &z);
        let rhs = inner(&x, &op.adjoint(&z)?);
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));
    }
    Ok(PropertyCheck::new(
        "adjoint identity",
        worst <= VERIFY_TOL,
        format!("max relative mismatch {worst:.3e}"),
    ))
}

fn explicit_column(cfg: &RadarConfig, col: usize) -> Result<Vec<Complex64>, OperatorError> {
    let (n, t, k) = (cfg.num_antennas, cfg.num_samples, cfg.num_directions());
    let (ti, nn) = (col / n, col % n);
    let mut out = vec![Complex64::default(); t * k];
    for pos in 0..t {
        let m = freq_index(t, pos);
        let turns = (m * ti as i64).rem_euclid(t as i64) as f64 / t as f64;
        let f = Complex64::from_polar(1.0 / (t as f64).sqrt(), -std::f64::consts::TAU * turns);
        for (kk, &phi) in cfg.directions.iter().enumerate() {
            out[pos * k + kk] = steering_vector(m, phi, cfg)?[nn] * f;
        }
    }
    Ok(out)
}

fn relative_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let scale: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (diff / scale.max(f64::MIN_POSITIVE)).sqrt()
}

fn check_dense(
    cfg: &RadarConfig,
    op: &BeamOperator,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyCheck, CliError> {
    if op.cols() <= DENSE_COLUMN_CAP {
        let dense = op.materialize_dense()?;
        let x = random_vector(rng, op.cols());
        let z = random_vector(rng, op.rows());
        let fwd = relative_gap(&op.forward_unscaled(&x)?, &dense.matvec(&x));
        let adj = relative_gap(
            &op.adjoint(&z)?,
            &dense.scaled(op.beta()).adjoint_matvec(&z),
        );
        let worst = fwd.max(adj);
        return Ok(PropertyCheck::new(
            "dense vs fast",
            worst <= VERIFY_TOL,
            format!("full dense matrix, max relative gap {worst:.3e}"),
        ));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLED_COLUMNS {
        let col = rng.gen_range(0..op.cols());
        let mut e = vec![Complex64::default(); op.cols()];
        e[col] = Complex64::new(1.0, 0.0);
        worst = worst.max(relative_gap(
            &op.forward_unscaled(&e)?,
            &explicit_column(cfg, col)?,
        ));
    }
    Ok(PropertyCheck::new(
        "dense vs fast",
        worst <= VERIFY_TOL,
        format!("{SAMPLED_COLUMNS} sampled columns, max relative gap {worst:.3e}"),
    ))
}

fn check_magsq(op: &BeamOperator, rng: &mut ChaCha8Rng) -> Result<PropertyCheck, CliError> {
    // Every entry of B has squared magnitude 1/T, so both reductions are
    // scaled sums.
    let t = op.num_samples() as f64 / op.beta().norm_sqr();
    let f: Vec<f64> = (0..op.cols()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let g: Vec<f64> = (0..op.rows()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let fs: f64 = f.iter().sum::<f64>() / t;
    let gs: f64 = g.iter().sum::<f64>() / t;
    let fwd = op.magsq_forward_sum(&f)?;
    let adj = op.magsq_adjoint_sum(&g)?;
    let worst = fwd
        .iter()
        .map(|v| (v - fs).abs() / fs)
        .chain(adj.iter().map(|v| (v - gs).abs() / gs))
        .fold(0.0, f64::max);
    Ok(PropertyCheck::new(
        "squared-magnitude sums",
        worst <= VERIFY_TOL,
        format!("max relative gap {worst:.3e}"),
    ))
}

fn check_output_function(rng: &mut ChaCha8Rng) -> PropertyCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..VERIFY_DRAWS {
        let u = Complex64::from_polar(rng.gen_range(0.1..3.0), rng.gen_range(-3.1..3.1));
        let d = rng.gen_range(0.0..4.0);
        let th = rng.gen_range(0.1..10.0);
        let grid = grid_maximize_output(u, d, th);
        worst = worst.max((grid.g - output_function(u, d, th)).norm());
    }
    PropertyCheck::new(
        "output function vs grid search",
        worst <= 1e-3,
        format!("{VERIFY_DRAWS} draws, max gap {worst:.3e}"),
    )
}

fn check_output_derivative(rng: &mut ChaCha8Rng) -> PropertyCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..VERIFY_DRAWS {
        let u = Complex64::from_polar(rng.gen_range(0.1..3.0), rng.gen_range(-3.1..3.1));
        let d = rng.gen_range(0.0..4.0);
        let th = rng.gen_range(0.1..10.0);
        let fd = output_derivative_fd(u, d, th, 1e-6);
        worst = worst
            .max((fd.re - output_derivative(u, d, th)).abs())
            .max(fd.im.abs());
    }
    PropertyCheck::new(
        "output derivative vs finite differences",
        worst <= 1e-5,
        format!("{VERIFY_DRAWS} draws, max gap {worst:.3e}"),
    )
}

/// Fast property suite against the shapes of `spec`. `corrupt_dft_sign`
/// flips the sign of the forward transform as a negative control.
pub fn verify(spec: &RunSpec, corrupt_dft_sign: bool) -> Result<Vec<PropertyCheck>, CliError> {
    let cfg = &spec.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut op = BeamOperator::new(cfg)?;
    if corrupt_dft_sign {
        op = op.with_corrupted_forward_sign();
    }
    op.set_beta(Complex64::new(0.8, -0.3));
    let mut checks = vec![check_constellation(cfg.dac_bits)];
    checks.push(check_adjoint(&op, &mut rng)?);
    checks.push(check_dense(cfg, &op, &mut rng)?);
    checks.push(check_magsq(&op, &mut rng)?);
    checks.push(check_output_function(&mut rng));
    checks.push(check_output_derivative(&mut rng));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_aliases_and_degrees() {
        let s = Settings::parse(
            "# desk run\nN = 16\nT=256 # samples\n\ndirections = 30, 90,150\nmu = 0.25\n",
        )
        .unwrap();
        let spec = s.build().unwrap();
        let c = &spec.config;
        assert_eq!(
            (c.num_antennas, c.num_samples, c.num_directions()),
            (16, 256, 3)
        );
        assert!((c.directions[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(c.damping, 0.25);
        assert_eq!(c.regularization, 768.0);
        assert_eq!(c.passband, Passband::new(-64, 64));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut s = Settings::parse("N = 128\nT = 1024\nK = 10\n").unwrap();
        s.apply_override("T=256").unwrap();
        s.apply_override("N=16").unwrap();
        let spec = s.build().unwrap();
        assert_eq!(spec.config.num_samples, 256);
        assert_eq!(spec.config.num_antennas, 16);
        assert!(matches!(
            s.apply_override("T"),
            Err(CliError::BadOverride(_))
        ));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            Settings::parse("colour = red"),
            Err(CliError::UnknownKey(_))
        ));
        assert!(matches!(
            Settings::parse("N = many").unwrap().build(),
            Err(CliError::InvalidValue { .. })
        ));
        assert!(matches!(
            Settings::parse("just words"),
            Err(CliError::Syntax { line: 1 })
        ));
        assert!(matches!(
            Settings::parse("T = 100").unwrap().build(),
            Err(CliError::Config(ConfigError::NonPowerOfTwoSamples(100)))
        ));
        assert!(matches!(
            Settings::parse("K = 2\ndirections = 10, 20, 30")
                .unwrap()
                .build(),
            Err(CliError::DirectionCountMismatch { .. })
        ));
    }

    #[test]
    fn sample_rate_and_interval_are_interchangeable() {
        let spec = Settings::parse("fs = 2e9").unwrap().build().unwrap();
        assert!((spec.config.sample_interval - 0.5e-9).abs() < 1e-24);
    }

    #[test]
    fn spec_round_trips_through_settings() {
        let mut cfg = RadarConfig::new(8, 64, 3);
        cfg.directions = vec![0.3, 1.234567890123, 2.9];
        cfg.regularization = 17.25;
        cfg.passband = Passband::new(-10, 7);
        cfg.seed = 42;
        let spec = RunSpec {
            config: cfg,
            intensity: 2.5,
        };
        let back = Settings::from_spec(&spec).build().unwrap();
        assert_eq!(back.config.num_antennas, 8);
        assert_eq!(back.config.passband, spec.config.passband);
        assert_eq!(back.config.regularization, 17.25);
        assert_eq!(back.config.seed, 42);
        assert_eq!(back.intensity, 2.5);
        assert_eq!(back.config, spec.config);
    }

    #[test]
    fn verify_passes_and_negative_control_fails() {
        let spec = Settings::parse("N = 4\nT = 8\nK = 2")
            .unwrap()
            .build()
            .unwrap();
        assert!(verify(&spec, false).unwrap().iter().all(|c| c.passed));
        let broken = verify(&spec, true).unwrap();
        let adjoint = broken
            .iter()
            .find(|c| c.name == "adjoint identity")
            .unwrap();
        assert!(!adjoint.passed);
    }

    #[test]
    fn verify_one_bit_constellation() {
        let spec = Settings::parse("N = 2\nT = 4\nK = 1\nb = 1")
            .unwrap()
            .build()
            .unwrap();
        let checks = verify(&spec, false).unwrap();
        assert!(checks.iter().all(|c| c.passed));
        assert!(checks[0].detail.starts_with("2 points"));
    }
}
