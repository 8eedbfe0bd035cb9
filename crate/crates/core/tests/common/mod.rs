#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use lowres_synth::gamp::{solve, SynthesisResult};
use lowres_synth::metrics::{default_angle_grid, evaluate, MetricsReport, DEFAULT_PATTERN_POINTS};
use lowres_synth::{BeamOperator, DesiredPattern, Passband, RadarConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `N = 2, T = 2, K = 1, b = 2` with a random direction and random
/// per-bin intensities.
pub fn tiny_instance(seed: u64) -> (RadarConfig, DesiredPattern) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = RadarConfig::new(2, 2, 1);
    cfg.directions = vec![rng.gen_range(0.1 * PI..0.9 * PI)];
    cfg.seed = seed;
    let values = (0..2).map(|_| rng.gen_range(0.0..2.0)).collect();
    let d = DesiredPattern::from_values(2, 1, values).unwrap();
    (cfg.validate().unwrap(), d)
}

pub fn desk_config() -> RadarConfig {
    let mut cfg = RadarConfig::desk_scale();
    cfg.passband = Passband::new(-64, 64);
    cfg.validate().unwrap()
}

pub struct DeskRun {
    pub cfg: RadarConfig,
    pub d: DesiredPattern,
    pub op: BeamOperator,
    pub result: SynthesisResult,
    pub metrics: MetricsReport,
}

/// One shared desk-scale solve per test binary.
pub fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = desk_config();
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        let mut op = BeamOperator::new(&cfg).unwrap();
        let result = solve(&cfg, &mut op, &d).unwrap();
        let metrics = evaluate(
            &result.x_sol,
            &cfg,
            &op,
            &default_angle_grid(DEFAULT_PATTERN_POINTS),
        )
        .unwrap();
        DeskRun {
            cfg,
            d,
            op,
            result,
            metrics,
        }
    })
}

pub fn random_complex(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn random_constellation(rng: &mut ChaCha8Rng, len: usize, bits: u32) -> Vec<Complex64> {
    let c = lowres_synth::Constellation::new(bits).unwrap();
    (0..len)
        .map(|_| c.point(rng.gen_range(0..c.len())))
        .collect()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn relative_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    diff.sqrt() / norm(b).max(f64::MIN_POSITIVE)
}

pub fn report(criterion: u32, passed: bool, detail: &str) {
    println!(
        "[criterion {criterion}] {} {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}
