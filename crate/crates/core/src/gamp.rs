//! Damped min-sum GAMP for the quantized beampattern matching problem
//!
//! ```text
//! minimize_{s, x, beta}  || beta B x - s ||^2 + alpha |beta|^2
//!     s.t. |s_j|^2 = d_j,  x in X^{NT}
//! ```
//!
//! Each iteration runs an output step (scalar fit of every field entry to
//! its target circle of radius `sqrt(d_j)`), a damped input step (scalar
//! projection of every waveform entry onto the DAC alphabet) and a closed
//! form update of the scale `beta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConfigError, Constellation, DesiredPattern, RadarConfig};
use crate::operator::{BeamOperator, OperatorError};

/// Lower clamp on `|u|` and `|v|` inside the derivative formulas.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

/// Constant initial output curvature `theta^0`.
pub const INITIAL_THETA: f64 = 1.0;

/// Number of iterations the stopping rule looks back.
pub const CONVERGENCE_WINDOW: usize = 5;

/// Lower clamp on each output curvature term `g'` before it is summed into
/// `xi`. The output cost is non-convex, so `g'` turns negative whenever
/// `|u| < sqrt(d)/2`; in particular every passband entry is hugely negative
/// at the all-zero start.
pub const OUTPUT_CURVATURE_FLOOR: f64 = 0.0;

/// Lower clamp on `xi`, so `v / xi` stays defined when every `g'` was floored.
pub const INPUT_CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("GAMP diverged at iteration {iteration}: non-finite {quantity}")]
    Divergence {
        iteration: usize,
        quantity: &'static str,
    },
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
}

/// Unit phasor of `v`, with `arg(0) = 0`.
pub fn unit_phase(v: Complex64) -> Complex64 {
    let r = v.norm();
    if r > 0.0 {
        v / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Nearest alphabet point to `v`.
pub fn prox_constellation(v: Complex64, c: &Constellation) -> Complex64 {
    c.project(v)
}

/// Scalar input function `prox_X(v / xi)` for `xi > 0`.
pub fn input_function(v: Complex64, xi: f64, c: &Constellation) -> Complex64 {
    c.project(v / xi)
}

/// Curvature of the input function, approximated by the constant-envelope
/// value `1 / (2|v|)`.
pub fn input_derivative(v: Complex64) -> f64 {
    1.0 / (2.0 * v.norm().max(MAGNITUDE_FLOOR))
}

/// Scalar output function `(sqrt(d) e^{j arg u} - u) / (1 + theta)`.
pub fn output_function(u: Complex64, d: f64, theta: f64) -> Complex64 {
    (unit_phase(u) * d.sqrt() - u) / (1.0 + theta)
}

/// Wirtinger derivative of the output function with respect to `-u`.
pub fn output_derivative(u: Complex64, d: f64, theta: f64) -> f64 {
    1.0 / (1.0 + theta) - d.sqrt() / (2.0 * u.norm().max(MAGNITUDE_FLOOR) * (1.0 + theta))
}

/// Closest point to `y` with `|s_j|^2 = d_j`.
pub fn optimal_s(y: &[Complex64], d: &[f64]) -> Vec<Complex64> {
    y.iter()
        .zip(d)
        .map(|(&yj, &dj)| unit_phase(yj) * dj.sqrt())
        .collect()
}

/// `s^H y / (||y||^2 + alpha)`, or zero when the denominator vanishes.
pub fn optimal_beta(s: &[Complex64], y: &[Complex64], alpha: f64) -> Complex64 {
    let num: Complex64 = s.iter().zip(y).map(|(sj, yj)| sj.conj() * yj).sum();
    let den = y.iter().map(|v| v.norm_sqr()).sum::<f64>() + alpha;
    if den > 0.0 {
        num / den
    } else {
        Complex64::default()
    }
}

/// Objective `||beta y - s||^2 + alpha |beta|^2`.
pub fn objective(y: &[Complex64], s: &[Complex64], beta: Complex64, alpha: f64) -> f64 {
    y.iter()
        .zip(s)
        .map(|(yj, sj)| (beta * yj - sj).norm_sqr())
        .sum::<f64>()
        + alpha * beta.norm_sqr()
}

/// Optimal `(s, beta)` for a fixed field and the resulting objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFit {
    pub cost: f64,
    pub beta: Complex64,
    pub s: Vec<Complex64>,
}

/// Minimizes over `s` and `beta` for the unscaled field `y = B x`.
pub fn fit_field(y: &[Complex64], d: &[f64], alpha: f64) -> FieldFit {
    let s0 = optimal_s(y, d);
    let beta = optimal_beta(&s0, y, alpha);
    let scaled: Vec<Complex64> = y.iter().map(|v| beta * v).collect();
    let s = optimal_s(&scaled, d);
    let cost = objective(y, &s, beta, alpha);
    FieldFit { cost, beta, s }
}

/// Objective of `x` with `s` and `beta` at their closed-form optima.
pub fn cost(
    x: &[Complex64],
    cfg: &RadarConfig,
    op: &BeamOperator,
    d: &DesiredPattern,
) -> Result<f64, SolverError> {
    let y = op.forward_unscaled(x)?;
    Ok(fit_field(&y, d.values(), cfg.regularization).cost)
}

/// Step parameters taken from the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GampParams {
    pub damping: f64,
    pub regularization: f64,
}

impl GampParams {
    pub fn from_config(cfg: &RadarConfig) -> Self {
        Self {
            damping: cfg.damping,
            regularization: cfg.regularization,
        }
    }
}

/// All per-iteration messages.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    /// Damped soft estimate of the waveform, length `N*T`.
    pub x_hat: Vec<Complex64>,
    /// Output-step messages, length `K*T`.
    pub z: Vec<Complex64>,
    /// Output curvature, length `K*T`.
    pub theta: Vec<f64>,
    /// Input curvature, length `N*T`.
    pub xi: Vec<f64>,
    pub beta: Complex64,
    pub iter: usize,
    /// Objective of the projected iterate after each step.
    pub cost_trace: Vec<f64>,
    /// Scale produced by each step.
    pub beta_trace: Vec<Complex64>,
}

impl GampState {
    /// `x = 0`, `z = 0`, `theta = INITIAL_THETA`, `beta = 1`.
    pub fn initial(num_inputs: usize, num_outputs: usize) -> Self {
        Self {
            x_hat: vec![Complex64::default(); num_inputs],
            z: vec![Complex64::default(); num_outputs],
            theta: vec![INITIAL_THETA; num_outputs],
            xi: vec![0.0; num_inputs],
            beta: Complex64::new(1.0, 0.0),
            iter: 0,
            cost_trace: Vec::new(),
            beta_trace: Vec::new(),
        }
    }

    pub fn for_operator(op: &BeamOperator) -> Self {
        Self::initial(op.cols(), op.rows())
    }
}

fn ensure_finite<'a, I>(
    values: I,
    iteration: usize,
    quantity: &'static str,
) -> Result<(), SolverError>
where
    I: IntoIterator<Item = &'a f64>,
{
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::Divergence {
            iteration,
            quantity,
        })
    }
}

fn ensure_finite_complex(
    values: &[Complex64],
    iteration: usize,
    quantity: &'static str,
) -> Result<(), SolverError> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::Divergence {
            iteration,
            quantity,
        })
    }
}

/// Projects every entry onto the alphabet, returning points and indices.
pub fn project_all(x: &[Complex64], c: &Constellation) -> (Vec<Complex64>, Vec<usize>) {
    x.iter()
        .map(|&v| {
            let i = c.nearest_index(v);
            (c.point(i), i)
        })
        .unzip()
}

/// One damped GAMP iteration. The operator's scale is set to the state's
/// `beta` before use.
pub fn gamp_step(
    state: &GampState,
    op: &mut BeamOperator,
    d: &DesiredPattern,
    c: &Constellation,
    params: GampParams,
) -> Result<GampState, SolverError> {
    let mu = params.damping;
    if !(0.0..1.0).contains(&mu) {
        return Err(SolverError::InvalidDamping(mu));
    }
    let iteration = state.iter + 1;
    let dv = d.values();
    op.set_beta(state.beta);

    // Output step. `u` is the Onsager-corrected field estimate
    // `A x - theta o z`; the scalar functions are written in terms of it.
    let ax = op.forward(&state.x_hat)?;
    let u: Vec<Complex64> = ax
        .iter()
        .zip(&state.z)
        .zip(&state.theta)
        .map(|((a, z), th)| a - th * z)
        .collect();
    let z: Vec<Complex64> = u
        .iter()
        .zip(dv)
        .zip(&state.theta)
        .map(|((&uj, &dj), &th)| output_function(uj, dj, th))
        .collect();
    ensure_finite_complex(&z, iteration, "output message z")?;
    let g_prime: Vec<f64> = u
        .iter()
        .zip(dv)
        .zip(&state.theta)
        .map(|((&uj, &dj), &th)| output_derivative(uj, dj, th).max(OUTPUT_CURVATURE_FLOOR))
        .collect();
    let mut xi = op.magsq_adjoint_sum(&g_prime)?;
    xi.iter_mut()
        .for_each(|v| *v = v.max(INPUT_CURVATURE_FLOOR));
    ensure_finite(&xi, iteration, "input curvature xi")?;

    // Input step with damping.
    let back = op.adjoint(&z)?;
    let v: Vec<Complex64> = back
        .iter()
        .zip(&xi)
        .zip(&state.x_hat)
        .map(|((b, &x), xh)| b + xh * x)
        .collect();
    ensure_finite_complex(&v, iteration, "input estimate v")?;
    let x_hat: Vec<Complex64> = v
        .iter()
        .zip(&xi)
        .zip(&state.x_hat)
        .map(|((&vi, &x), &prev)| prev * (1.0 - mu) + input_function(vi, x, c) * mu)
        .collect();
    let f_prime: Vec<f64> = v.iter().map(|&vi| input_derivative(vi)).collect();
    let mut theta = op.magsq_forward_sum(&f_prime)?;
    theta.iter_mut().for_each(|t| *t *= mu);
    ensure_finite(&theta, iteration, "output curvature theta")?;

    // Scale update on the unscaled field of the new iterate.
    let y = op.forward_unscaled(&x_hat)?;
    let s = optimal_s(&y, dv);
    let beta = optimal_beta(&s, &y, params.regularization);
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(SolverError::Divergence {
            iteration,
            quantity: "scale beta",
        });
    }

    let (projected, _) = project_all(&x_hat, c);
    let projected_cost =
        fit_field(&op.forward_unscaled(&projected)?, dv, params.regularization).cost;
    ensure_finite([projected_cost].iter(), iteration, "cost")?;

    let mut cost_trace = state.cost_trace.clone();
    cost_trace.push(projected_cost);
    let mut beta_trace = state.beta_trace.clone();
    beta_trace.push(beta);
    Ok(GampState {
        x_hat,
        z,
        theta,
        xi,
        beta,
        iter: iteration,
        cost_trace,
        beta_trace,
    })
}

/// True once the cost moved by at most `rel_tol` (relative) over the last
/// [`CONVERGENCE_WINDOW`] iterations.
pub fn has_converged(trace: &[f64], rel_tol: f64) -> bool {
    if trace.len() <= CONVERGENCE_WINDOW {
        return false;
    }
    let current = trace[trace.len() - 1];
    let earlier = trace[trace.len() - 1 - CONVERGENCE_WINDOW];
    (current - earlier).abs() <= rel_tol * earlier
}

/// Outcome of a full synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    /// Projected waveform, every entry an exact alphabet point.
    pub x_sol: Vec<Complex64>,
    pub x_indices: Vec<usize>,
    /// Objective of `x_sol` with fresh optimal `s` and `beta`.
    pub final_cost: f64,
    /// Optimal scale for `x_sol`.
    pub beta_final: Complex64,
    pub iterations: usize,
    pub converged: bool,
    pub cost_trace: Vec<f64>,
    pub beta_trace: Vec<Complex64>,
    pub theta_init: f64,
}

/// Runs GAMP until the windowed relative cost change drops below
/// `cfg.rel_tol` or `cfg.max_iters` is reached, then projects.
pub fn solve(
    cfg: &RadarConfig,
    op: &mut BeamOperator,
    d: &DesiredPattern,
) -> Result<SynthesisResult, SolverError> {
    cfg.check()?;
    let c = Constellation::new(cfg.dac_bits)?;
    let params = GampParams::from_config(cfg);
    let mut state = GampState::for_operator(op);
    let mut converged = false;
    while state.iter < cfg.max_iters {
        state = gamp_step(&state, op, d, &c, params)?;
        if has_converged(&state.cost_trace, cfg.rel_tol) {
            converged = true;
            break;
        }
    }
    let (x_sol, x_indices) = project_all(&state.x_hat, &c);
    let fit = fit_field(
        &op.forward_unscaled(&x_sol)?,
        d.values(),
        cfg.regularization,
    );
    Ok(SynthesisResult {
        x_sol,
        x_indices,
        final_cost: fit.cost,
        beta_final: fit.beta,
        iterations: state.iter,
        converged,
        cost_trace: state.cost_trace,
        beta_trace: state.beta_trace,
        theta_init: INITIAL_THETA,
    })
}
