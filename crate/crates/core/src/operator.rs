//! Broadband ULA steering and the structured beam operator
//! `B = Diag(A[m]) (F_T kron I_N)`.
//!
//! `x` is stacked time-major (`x[t*N + n]` is antenna `n` at sample `t`),
//! `y` frequency-major (`y[p*K + k]` is direction `k` at frequency position
//! `p`). `F_T` is the unitary DFT with row `m` equal to
//! `exp(-j*2*pi*m*t/T)/sqrt(T)` and rows ordered so that `m = 0` sits at
//! position `floor(T/2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::model::{freq_index, freq_index_end, freq_index_min, RadarConfig};

/// Default column cap for [`BeamOperator::materialize_dense`].
pub const DENSE_COLUMN_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatorError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("frequency index {m} outside [{min}, {end})")]
    FrequencyOutOfRange { m: i64, min: i64, end: i64 },
    #[error("dense materialization needs {cols} columns, cap is {cap}")]
    DenseTooLarge { cols: usize, cap: usize },
    #[error("operator needs at least one antenna, sample and direction")]
    EmptyShape,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), OperatorError> {
    if expected == got {
        Ok(())
    } else {
        Err(OperatorError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Phase slope factor `m/(T*T_s*f_c) + 1` of the broadband array response.
fn frequency_factor(m: i64, cfg: &RadarConfig) -> f64 {
    m as f64 / (cfg.num_samples as f64 * cfg.sample_interval * cfg.center_freq) + 1.0
}

/// Array response `a(m, phi)`; entry `n` is
/// `exp(-j*pi*cos(phi)*n*(m/(T*T_s*f_c) + 1))`.
pub fn steering_vector(
    m: i64,
    phi: f64,
    cfg: &RadarConfig,
) -> Result<Vec<Complex64>, OperatorError> {
    let (min, end) = (
        freq_index_min(cfg.num_samples),
        freq_index_end(cfg.num_samples),
    );
    if m < min || m >= end {
        return Err(OperatorError::FrequencyOutOfRange { m, min, end });
    }
    let slope = -PI * phi.cos() * frequency_factor(m, cfg);
    Ok((0..cfg.num_antennas)
        .map(|n| Complex64::from_polar(1.0, slope * n as f64))
        .collect())
}

/// Cached `A[m]` matrices, one `K x N` row-major block per frequency.
#[derive(Debug, Clone)]
pub struct SteeringMatrixSet {
    num_antennas: usize,
    num_samples: usize,
    num_directions: usize,
    data: Vec<Complex64>,
}

impl SteeringMatrixSet {
    pub fn build(cfg: &RadarConfig) -> Self {
        let (n, t, k) = (cfg.num_antennas, cfg.num_samples, cfg.num_directions());
        let mut data = vec![Complex64::default(); t * k * n];
        data.par_chunks_mut(k * n)
            .enumerate()
            .for_each(|(pos, block)| {
                let m = freq_index(t, pos);
                for (row, &phi) in block.chunks_exact_mut(n).zip(&cfg.directions) {
                    let a = steering_vector(m, phi, cfg).expect("index in range");
                    row.copy_from_slice(&a);
                }
            });
        Self {
            num_antennas: n,
            num_samples: t,
            num_directions: k,
            data,
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    /// `A[m]` at storage position `pos`, `K x N` row-major.
    pub fn block(&self, pos: usize) -> &[Complex64] {
        let size = self.num_directions * self.num_antennas;
        &self.data[pos * size..(pos + 1) * size]
    }

    /// `A[m]` for signed frequency index `m`.
    pub fn matrix(&self, m: i64) -> &[Complex64] {
        self.block((m - freq_index_min(self.num_samples)) as usize)
    }

    /// Row `k` of `A[m]`, i.e. `a(m, phi_k)^T`.
    pub fn row(&self, m: i64, k: usize) -> &[Complex64] {
        let n = self.num_antennas;
        &self.matrix(m)[k * n..(k + 1) * n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }
}

/// Unitary, zero-centered DFT applied to contiguous rows of length `T`.
#[derive(Clone)]
pub struct CenteredDft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for CenteredDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredDft")
            .field("len", &self.len)
            .finish()
    }
}

impl CenteredDft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In place on every length-`T` row of `rows`; output is centered.
    pub fn forward_rows(&self, rows: &mut [Complex64]) {
        self.forward.process(rows);
        let shift = self.len / 2;
        for row in rows.chunks_exact_mut(self.len) {
            row.rotate_right(shift);
            row.iter_mut().for_each(|v| *v *= self.scale);
        }
    }

    /// Inverse of [`forward_rows`](Self::forward_rows); input is centered.
    pub fn inverse_rows(&self, rows: &mut [Complex64]) {
        let shift = self.len / 2;
        for row in rows.chunks_exact_mut(self.len) {
            row.rotate_left(shift);
        }
        self.inverse.process(rows);
        rows.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// Applies `(F_T kron I_N)` to a time-major `x`; returns the per-antenna
/// spectra antenna-major (`out[n*T + p]`).
pub fn antenna_spectra(dft: &CenteredDft, x: &[Complex64], num_antennas: usize) -> Vec<Complex64> {
    let t = dft.len();
    let mut rows = vec![Complex64::default(); num_antennas * t];
    for (ti, frame) in x.chunks_exact(num_antennas).enumerate() {
        for (n, &v) in frame.iter().enumerate() {
            rows[n * t + ti] = v;
        }
    }
    dft.forward_rows(&mut rows);
    rows
}

/// Explicit row-major complex matrix, used as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M^H z`.
    pub fn adjoint_matvec(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.cols];
        for (row, zr) in self.data.chunks_exact(self.cols).zip(z) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * zr;
            }
        }
        out
    }

    /// Elementwise `|M|^2`, row-major.
    pub fn magnitude_squared(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled(&self, s: Complex64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// The linear map from stacked waveform to stacked directional field,
/// carrying the per-iteration scale `beta`.
#[derive(Debug, Clone)]
pub struct BeamOperator {
    steering: SteeringMatrixSet,
    dft: CenteredDft,
    beta: Complex64,
    flip_forward_sign: bool,
}

impl BeamOperator {
    pub fn new(cfg: &RadarConfig) -> Result<Self, OperatorError> {
        if cfg.num_antennas == 0 || cfg.num_samples == 0 || cfg.directions.is_empty() {
            return Err(OperatorError::EmptyShape);
        }
        Ok(Self {
            steering: SteeringMatrixSet::build(cfg),
            dft: CenteredDft::new(cfg.num_samples),
            beta: Complex64::new(1.0, 0.0),
            flip_forward_sign: false,
        })
    }

    /// Negative control for self-checks: conjugates the DFT kernel of the
    /// forward path only, which breaks the adjoint pairing.
    #[doc(hidden)]
    pub fn with_corrupted_forward_sign(mut self) -> Self {
        self.flip_forward_sign = true;
        self
    }

    pub fn steering(&self) -> &SteeringMatrixSet {
        &self.steering
    }

    pub fn dft(&self) -> &CenteredDft {
        &self.dft
    }

    pub fn num_antennas(&self) -> usize {
        self.steering.num_antennas
    }

    pub fn num_samples(&self) -> usize {
        self.steering.num_samples
    }

    pub fn num_directions(&self) -> usize {
        self.steering.num_directions
    }

    /// `K*T`.
    pub fn rows(&self) -> usize {
        self.num_directions() * self.num_samples()
    }

    /// `N*T`.
    pub fn cols(&self) -> usize {
        self.num_antennas() * self.num_samples()
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: Complex64) {
        self.beta = beta;
    }

    /// `beta * B x`.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>, OperatorError> {
        self.apply_forward(x, self.beta)
    }

    /// `B x` ignoring the stored scale.
    pub fn forward_unscaled(&self, x: &[Complex64]) -> Result<Vec<Complex64>, OperatorError> {
        self.apply_forward(x, Complex64::new(1.0, 0.0))
    }

    fn apply_forward(
        &self,
        x: &[Complex64],
        scale: Complex64,
    ) -> Result<Vec<Complex64>, OperatorError> {
        check_len("forward input", self.cols(), x.len())?;
        let (n, t, k) = (
            self.num_antennas(),
            self.num_samples(),
            self.num_directions(),
        );
        let spectra = if self.flip_forward_sign {
            let conj: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
            let mut s = antenna_spectra(&self.dft, &conj, n);
            s.iter_mut().for_each(|v| *v = v.conj());
            s
        } else {
            antenna_spectra(&self.dft, x, n)
        };
        let mut y = vec![Complex64::default(); k * t];
        y.par_chunks_mut(k).enumerate().for_each(|(pos, out)| {
            let a = self.steering.block(pos);
            for (kk, o) in out.iter_mut().enumerate() {
                let row = &a[kk * n..(kk + 1) * n];
                let acc: Complex64 = row
                    .iter()
                    .enumerate()
                    .map(|(nn, s)| s * spectra[nn * t + pos])
                    .sum();
                *o = scale * acc;
            }
        });
        Ok(y)
    }

    /// `conj(beta) * B^H z`.
    pub fn adjoint(&self, z: &[Complex64]) -> Result<Vec<Complex64>, OperatorError> {
        check_len("adjoint input", self.rows(), z.len())?;
        let (n, t, k) = (
            self.num_antennas(),
            self.num_samples(),
            self.num_directions(),
        );
        // Per-frequency A[m]^H z[m], gathered frequency-major then transposed.
        let mut per_freq = vec![Complex64::default(); t * n];
        per_freq
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(pos, out)| {
                let a = self.steering.block(pos);
                let zm = &z[pos * k..(pos + 1) * k];
                for (kk, zv) in zm.iter().enumerate() {
                    let row = &a[kk * n..(kk + 1) * n];
                    for (o, s) in out.iter_mut().zip(row) {
                        *o += s.conj() * zv;
                    }
                }
            });
        let mut rows = vec![Complex64::default(); n * t];
        for (pos, block) in per_freq.chunks_exact(n).enumerate() {
            for (nn, &v) in block.iter().enumerate() {
                rows[nn * t + pos] = v;
            }
        }
        self.dft.inverse_rows(&mut rows);
        let scale = self.beta.conj();
        let mut x = vec![Complex64::default(); n * t];
        for (nn, row) in rows.chunks_exact(t).enumerate() {
            for (ti, &v) in row.iter().enumerate() {
                x[ti * n + nn] = scale * v;
            }
        }
        Ok(x)
    }

    /// `(A o A*) f` for `A = beta*B`, length `K*T`.
    ///
    /// Every entry of `B` has squared modulus `1/T`, so each output entry is
    /// `|beta|^2/T * sum_i f_i`.
    pub fn magsq_forward_sum(&self, f: &[f64]) -> Result<Vec<f64>, OperatorError> {
        check_len("magsq forward input", self.cols(), f.len())?;
        let value = self.beta.norm_sqr() / self.num_samples() as f64 * f.iter().sum::<f64>();
        Ok(vec![value; self.rows()])
    }

    /// `(A o A*)^T g` for `A = beta*B`, length `N*T`.
    pub fn magsq_adjoint_sum(&self, g: &[f64]) -> Result<Vec<f64>, OperatorError> {
        check_len("magsq adjoint input", self.rows(), g.len())?;
        let value = self.beta.norm_sqr() / self.num_samples() as f64 * g.iter().sum::<f64>();
        Ok(vec![value; self.cols()])
    }

    /// Explicit unscaled `B`, built entry by entry from the DFT and steering
    /// formulas without the fast path.
    pub fn materialize_dense(&self) -> Result<DenseMatrix, OperatorError> {
        self.materialize_dense_capped(DENSE_COLUMN_CAP)
    }

    pub fn materialize_dense_capped(&self, cap: usize) -> Result<DenseMatrix, OperatorError> {
        let cols = self.cols();
        if cols > cap {
            return Err(OperatorError::DenseTooLarge { cols, cap });
        }
        let (n, t, k) = (
            self.num_antennas(),
            self.num_samples(),
            self.num_directions(),
        );
        let norm = 1.0 / (t as f64).sqrt();
        let rows = self.rows();
        let mut data = vec![Complex64::default(); rows * cols];
        for pos in 0..t {
            let m = freq_index(t, pos);
            let a = self.steering.block(pos);
            for kk in 0..k {
                let r = pos * k + kk;
                for ti in 0..t {
                    // Reduce m*t mod T before forming the angle.
                    let turns = (m * ti as i64).rem_euclid(t as i64) as f64 / t as f64;
                    let f = Complex64::from_polar(norm, -2.0 * PI * turns);
                    for nn in 0..n {
                        data[r * cols + ti * n + nn] = a[kk * n + nn] * f;
                    }
                }
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }
}
