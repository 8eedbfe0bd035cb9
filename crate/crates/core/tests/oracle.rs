mod common;

use lowres_synth::gamp::{gamp_step, GampParams, GampState};
use lowres_synth::oracle::dense_gamp_step;
use lowres_synth::{BeamOperator, Constellation, DesiredPattern, Passband, RadarConfig};
use num_complex::Complex64;

fn setup() -> (RadarConfig, BeamOperator, DesiredPattern) {
    let mut cfg = RadarConfig::new(2, 4, 2);
    cfg.directions = vec![0.7, 2.2];
    cfg.passband = Passband::new(-1, 1);
    let cfg = cfg.validate().unwrap();
    let op = BeamOperator::new(&cfg).unwrap();
    let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
    (cfg, op, d)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn max_state_gap(a: &GampState, b: &GampState) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.x_hat.iter().zip(&b.x_hat) {
        worst = worst.max(crel(*x, *y));
    }
    for (x, y) in a.z.iter().zip(&b.z) {
        worst = worst.max(crel(*x, *y));
    }
    for (x, y) in a.theta.iter().zip(&b.theta) {
        worst = worst.max(rel(*x, *y));
    }
    for (x, y) in a.xi.iter().zip(&b.xi) {
        worst = worst.max(rel(*x, *y));
    }
    for (x, y) in a.cost_trace.iter().zip(&b.cost_trace) {
        worst = worst.max(rel(*x, *y));
    }
    worst.max(crel(a.beta, b.beta))
}

#[test]
fn one_step_matches_dense_transcription() {
    let (cfg, mut op, d) = setup();
    let c = Constellation::new(cfg.dac_bits).unwrap();
    let params = GampParams::from_config(&cfg);
    let dense = op.materialize_dense().unwrap();
    let start = GampState::for_operator(&op);
    let fast = gamp_step(&start, &mut op, &d, &c, params).unwrap();
    let slow = dense_gamp_step(&dense, &start, &d, &c, params).unwrap();
    let gap = max_state_gap(&fast, &slow);
    assert!(gap <= 1e-9, "gap {gap:e}");
}

#[test]
fn thirty_step_trajectories_agree() {
    let (cfg, mut op, d) = setup();
    let c = Constellation::new(cfg.dac_bits).unwrap();
    let params = GampParams::from_config(&cfg);
    let dense = op.materialize_dense().unwrap();
    let mut fast = GampState::for_operator(&op);
    let mut slow = fast.clone();
    for _ in 0..30 {
        fast = gamp_step(&fast, &mut op, &d, &c, params).unwrap();
        slow = dense_gamp_step(&dense, &slow, &d, &c, params).unwrap();
    }
    assert_eq!(fast.iter, 30);
    let gap = max_state_gap(&fast, &slow);
    assert!(gap <= 1e-6, "gap {gap:e}");
}

#[test]
fn zero_damping_freezes_dense_step() {
    let (cfg, mut op, d) = setup();
    let c = Constellation::new(cfg.dac_bits).unwrap();
    let mut params = GampParams::from_config(&cfg);
    let warm = gamp_step(&GampState::for_operator(&op), &mut op, &d, &c, params).unwrap();
    params.damping = 0.0;
    let dense = op.materialize_dense().unwrap();
    let next = dense_gamp_step(&dense, &warm, &d, &c, params).unwrap();
    assert_eq!(next.x_hat, warm.x_hat);
    assert!(next.theta.iter().all(|&t| t == 0.0));
}

#[test]
fn oracle_bounds_gamp_on_tiny_instances() {
    for seed in 100..120 {
        let (cfg, d) = common::tiny_instance(seed);
        let mut op = BeamOperator::new(&cfg).unwrap();
        let gamp = lowres_synth::solve(&cfg, &mut op, &d).unwrap();
        let oracle = lowres_synth::brute_force_solve(&cfg, &op, &d).unwrap();
        assert!(
            oracle.cost_opt <= gamp.final_cost * (1.0 + 1e-12),
            "seed {seed}"
        );
        let recomputed = lowres_synth::gamp::cost(&oracle.x_opt, &cfg, &op, &d).unwrap();
        assert!((recomputed - oracle.cost_opt).abs() <= 1e-12 * oracle.cost_opt.max(1.0));
    }
}
