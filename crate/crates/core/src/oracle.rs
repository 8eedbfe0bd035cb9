//! Independent reference computations for tiny instances: exhaustive search
//! over the alphabet, a grid search for the output scalar problem and a
//! literal dense-matrix GAMP step.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::gamp::{
    fit_field, input_derivative, input_function, optimal_beta, optimal_s, output_derivative,
    output_function, project_all, GampParams, GampState, SolverError, INPUT_CURVATURE_FLOOR,
    OUTPUT_CURVATURE_FLOOR,
};
use crate::model::{ConfigError, Constellation, DesiredPattern, RadarConfig};
use crate::operator::{BeamOperator, DenseMatrix, OperatorError};

/// Largest number of candidate waveforms [`brute_force_solve`] will visit.
pub const BRUTE_FORCE_CAP: u64 = 1 << 20;

/// Candidates whose costs differ by less than this (relative) are tied and
/// the earlier one in lexicographic order wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

const CHUNK: u64 = 4096;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("{candidates} candidates exceeds the brute-force cap of {cap}")]
    TooLarge { candidates: u128, cap: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x_opt: Vec<Complex64>,
    pub indices: Vec<usize>,
    pub cost_opt: f64,
    pub beta_opt: Complex64,
    pub candidates_evaluated: u64,
}

fn better(candidate: f64, best: f64) -> bool {
    if best.is_finite() {
        candidate < best - TIE_TOLERANCE * best.abs()
    } else {
        candidate < best
    }
}

fn decode(mut code: u64, radix: u64, len: usize, out: &mut [usize]) {
    for slot in out[..len].iter_mut().rev() {
        *slot = (code % radix) as usize;
        code /= radix;
    }
}

/// Exhaustive minimization of the objective over `X^{NT}`. Candidates are
/// visited in lexicographic index order (entry 0 most significant).
pub fn brute_force_solve(
    cfg: &RadarConfig,
    op: &BeamOperator,
    d: &DesiredPattern,
) -> Result<OracleResult, OracleError> {
    cfg.check()?;
    let c = Constellation::new(cfg.dac_bits)?;
    let len = cfg.num_inputs();
    let radix = c.len() as u64;
    let total = (radix as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if total > BRUTE_FORCE_CAP as u128 {
        return Err(OracleError::TooLarge {
            candidates: total,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let total = total as u64;
    let b = op.materialize_dense()?;
    let dv = d.values();
    let alpha = cfg.regularization;

    let chunks: Vec<(f64, u64)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut idx = vec![0usize; len];
            let mut x = vec![Complex64::default(); len];
            let mut best = (f64::INFINITY, 0u64);
            for code in chunk * CHUNK..((chunk + 1) * CHUNK).min(total) {
                decode(code, radix, len, &mut idx);
                for (xi, &i) in x.iter_mut().zip(&idx) {
                    *xi = c.point(i);
                }
                let cost = fit_field(&b.matvec(&x), dv, alpha).cost;
                if better(cost, best.0) {
                    best = (cost, code);
                }
            }
            best
        })
        .collect();
    let (_, code) = chunks
        .into_iter()
        .fold((f64::INFINITY, 0u64), |best, cand| {
            if better(cand.0, best.0) {
                cand
            } else {
                best
            }
        });

    let mut indices = vec![0usize; len];
    decode(code, radix, len, &mut indices);
    let x_opt: Vec<Complex64> = indices.iter().map(|&i| c.point(i)).collect();
    let fit = fit_field(&b.matvec(&x_opt), dv, alpha);
    Ok(OracleResult {
        x_opt,
        indices,
        cost_opt: fit.cost,
        beta_opt: fit.beta,
        candidates_evaluated: total,
    })
}

const GRID_POINTS: usize = 400;
const ZOOM_HALF_WIDTH: usize = 10;
const ZOOM_PASSES: usize = 6;

/// Maximizer of `-(|w| - sqrt(d))^2 - |w - u|^2 / theta` located by a polar
/// grid search with successive zoom passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMaximum {
    pub w: Complex64,
    /// `(w - u) / theta`, the value the output function should return.
    pub g: Complex64,
}

pub fn grid_maximize_output(u: Complex64, d: f64, theta: f64) -> GridMaximum {
    let sd = d.sqrt();
    let objective = |r: f64, phi: f64| {
        let w = Complex64::from_polar(r, phi);
        -(r - sd).powi(2) - (w - u).norm_sqr() / theta
    };
    let r_max = 2.0 * (u.norm() + sd);
    let tau = std::f64::consts::TAU;
    let mut dr = r_max / GRID_POINTS as f64;
    let mut dphi = tau / GRID_POINTS as f64;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=GRID_POINTS {
        for j in 0..GRID_POINTS {
            let (r, phi) = (i as f64 * dr, j as f64 * dphi);
            let f = objective(r, phi);
            if f > best.0 {
                best = (f, r, phi);
            }
        }
    }
    for _ in 0..ZOOM_PASSES {
        let (r0, phi0) = (best.1, best.2);
        dr /= ZOOM_HALF_WIDTH as f64;
        dphi /= ZOOM_HALF_WIDTH as f64;
        let h = ZOOM_HALF_WIDTH as f64;
        for i in 0..=2 * ZOOM_HALF_WIDTH {
            let r = r0 + (i as f64 - h) * dr;
            if r < 0.0 {
                continue;
            }
            for j in 0..=2 * ZOOM_HALF_WIDTH {
                let phi = phi0 + (j as f64 - h) * dphi;
                let f = objective(r, phi);
                if f > best.0 {
                    best = (f, r, phi);
                }
            }
        }
    }
    let w = Complex64::from_polar(best.1, best.2);
    GridMaximum {
        w,
        g: (w - u) / theta,
    }
}

/// Central-difference Wirtinger derivative of the output function with
/// respect to its argument `w = -u`, evaluated at `u`. The real part is what
/// the analytic output derivative should reproduce.
pub fn output_derivative_fd(u: Complex64, d: f64, theta: f64, h: f64) -> Complex64 {
    let g = |w: Complex64| output_function(-w, d, theta);
    let w = -u;
    let dx = (g(w + Complex64::new(h, 0.0)) - g(w - Complex64::new(h, 0.0))) / (2.0 * h);
    let dy = (g(w + Complex64::new(0.0, h)) - g(w - Complex64::new(0.0, h))) / (2.0 * h);
    (dx - Complex64::i() * dy) * 0.5
}

/// One GAMP iteration written directly against an explicit unscaled matrix.
/// Mirrors the fast step term by term.
pub fn dense_gamp_step(
    b: &DenseMatrix,
    state: &GampState,
    d: &DesiredPattern,
    c: &Constellation,
    params: GampParams,
) -> Result<GampState, SolverError> {
    let mu = params.damping;
    if !(0.0..1.0).contains(&mu) {
        return Err(SolverError::InvalidDamping(mu));
    }
    let dv = d.values();
    let a = b.scaled(state.beta);
    let asq = a.magnitude_squared();
    let (rows, cols) = (a.rows, a.cols);

    let u: Vec<Complex64> = (0..rows)
        .map(|j| {
            let acc: Complex64 = (0..cols).map(|i| a.get(j, i) * state.x_hat[i]).sum();
            acc - state.theta[j] * state.z[j]
        })
        .collect();
    let z: Vec<Complex64> = (0..rows)
        .map(|j| output_function(u[j], dv[j], state.theta[j]))
        .collect();
    let gp: Vec<f64> = (0..rows)
        .map(|j| output_derivative(u[j], dv[j], state.theta[j]).max(OUTPUT_CURVATURE_FLOOR))
        .collect();

    let mut xi = vec![0.0; cols];
    let mut v = vec![Complex64::default(); cols];
    for i in 0..cols {
        let mut s = 0.0;
        let mut back = Complex64::default();
        for j in 0..rows {
            s += asq[j * cols + i] * gp[j];
            back += a.get(j, i).conj() * z[j];
        }
        xi[i] = s.max(INPUT_CURVATURE_FLOOR);
        v[i] = back + xi[i] * state.x_hat[i];
    }
    let x_hat: Vec<Complex64> = (0..cols)
        .map(|i| state.x_hat[i] * (1.0 - mu) + input_function(v[i], xi[i], c) * mu)
        .collect();
    let fp: Vec<f64> = v.iter().map(|&vi| input_derivative(vi)).collect();
    let theta: Vec<f64> = (0..rows)
        .map(|j| mu * (0..cols).map(|i| asq[j * cols + i] * fp[i]).sum::<f64>())
        .collect();

    let y = b.matvec(&x_hat);
    let beta = optimal_beta(&optimal_s(&y, dv), &y, params.regularization);
    let (projected, _) = project_all(&x_hat, c);
    let cost = fit_field(&b.matvec(&projected), dv, params.regularization).cost;

    let mut cost_trace = state.cost_trace.clone();
    cost_trace.push(cost);
    let mut beta_trace = state.beta_trace.clone();
    beta_trace.push(beta);
    Ok(GampState {
        x_hat,
        z,
        theta,
        xi,
        beta,
        iter: state.iter + 1,
        cost_trace,
        beta_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Passband;

    fn tiny(n: usize, t: usize, bits: u32) -> RadarConfig {
        let mut cfg = RadarConfig::new(n, t, 1);
        cfg.dac_bits = bits;
        cfg.directions = vec![1.1];
        cfg.passband = Passband::default_for(t);
        cfg
    }

    #[test]
    fn single_entry_ties_return_first_candidate() {
        let cfg = tiny(1, 1, 2);
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        let op = BeamOperator::new(&cfg).unwrap();
        let r = brute_force_solve(&cfg, &op, &d).unwrap();
        assert_eq!(r.indices, vec![0]);
        assert_eq!(r.candidates_evaluated, 4);
        assert!((r.cost_opt - 0.5).abs() < 1e-12);
    }

    #[test]
    fn optimum_bounds_every_candidate() {
        let cfg = tiny(2, 2, 1);
        let d = DesiredPattern::from_values(2, 1, vec![0.3, 1.7]).unwrap();
        let op = BeamOperator::new(&cfg).unwrap();
        let r = brute_force_solve(&cfg, &op, &d).unwrap();
        let c = Constellation::new(1).unwrap();
        let b = op.materialize_dense().unwrap();
        for code in 0..16u64 {
            let mut idx = [0usize; 4];
            decode(code, 2, 4, &mut idx);
            let x: Vec<Complex64> = idx.iter().map(|&i| c.point(i)).collect();
            let cost = fit_field(&b.matvec(&x), d.values(), cfg.regularization).cost;
            assert!(r.cost_opt <= cost * (1.0 + TIE_TOLERANCE));
        }
    }

    #[test]
    fn cap_enforced() {
        let cfg = tiny(4, 8, 2);
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        let op = BeamOperator::new(&cfg).unwrap();
        assert!(matches!(
            brute_force_solve(&cfg, &op, &d),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn two_by_two_space_size() {
        let cfg = tiny(2, 2, 2);
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        let op = BeamOperator::new(&cfg).unwrap();
        let r = brute_force_solve(&cfg, &op, &d).unwrap();
        assert_eq!(r.candidates_evaluated, 256);
    }

    #[test]
    fn first_finite_candidate_replaces_infinite_best() {
        assert!(better(3.0, f64::INFINITY));
        assert!(!better(1.0 + 1e-14, 1.0));
        assert!(better(0.5, 1.0));
    }

    #[test]
    fn lexicographic_decode() {
        let mut idx = [0usize; 3];
        decode(5, 4, 3, &mut idx);
        assert_eq!(idx, [0, 1, 1]);
    }

    #[test]
    fn grid_search_finds_closed_form_maximum() {
        let u = Complex64::new(0.4, -1.2);
        let m = grid_maximize_output(u, 2.0, 0.7);
        let want = (Complex64::from_polar(2f64.sqrt(), u.arg()) - u) / 1.7;
        assert!((m.g - want).norm() < 1e-6);
    }

    #[test]
    fn grid_search_examples() {
        let m = grid_maximize_output(Complex64::new(2.0, 0.0), 1.0, 1.0);
        assert!((m.w - Complex64::new(1.5, 0.0)).norm() < 1e-6);
        assert!((m.g - Complex64::new(-0.5, 0.0)).norm() < 1e-6);

        let u = Complex64::new(-0.6, 0.9);
        let m = grid_maximize_output(u, 0.0, 0.5);
        assert!((m.w - u / 1.5).norm() < 1e-6);
        assert!((m.g + u / 1.5).norm() < 1e-6);

        let u = Complex64::from_polar(3.0, 2.2);
        let m = grid_maximize_output(u, 9.0, 2.0);
        assert!((m.w - u).norm() < 1e-6);
        assert!(m.g.norm() < 1e-6);
    }
}
