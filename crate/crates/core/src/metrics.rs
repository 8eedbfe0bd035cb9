//! Spectral, correlation and angular metrics of a synthesized waveform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{freq_index, RadarConfig};
use crate::operator::{antenna_spectra, BeamOperator, CenteredDft, OperatorError};

/// Floor applied to every dB value.
pub const DB_FLOOR: f64 = -120.0;

/// Points of the default angular grid over (0, pi).
pub const DEFAULT_PATTERN_POINTS: usize = 1024;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("waveform for direction {0} has zero energy")]
    ZeroEnergy(usize),
    #[error("angle grid must be non-empty and inside (0, pi)")]
    InvalidGrid,
}

/// `10 log10(p)`, floored at [`DB_FLOOR`].
pub fn power_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Antenna-averaged power spectral density, linear, indexed by frequency
/// position: `psd[p] = (1/N) sum_n |X_n[m]|^2`.
pub fn psd(x: &[Complex64], cfg: &RadarConfig) -> Result<Vec<f64>, OperatorError> {
    let (n, t) = (cfg.num_antennas, cfg.num_samples);
    if x.len() != n * t {
        return Err(OperatorError::DimensionMismatch {
            what: "psd input",
            expected: n * t,
            got: x.len(),
        });
    }
    let spectra = antenna_spectra(&CenteredDft::new(t), x, n);
    let mut out = vec![0.0; t];
    for row in spectra.chunks_exact(t) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v.norm_sqr();
        }
    }
    out.iter_mut().for_each(|v| *v /= n as f64);
    Ok(out)
}

/// `10 log10(mean passband / mean stopband)` of a per-frequency power
/// profile. `None` when the passband covers every bin.
pub fn band_suppression_db(power: &[f64], cfg: &RadarConfig) -> Option<f64> {
    let t = cfg.num_samples;
    let (mut pass, mut n_pass, mut stop, mut n_stop) = (0.0, 0usize, 0.0, 0usize);
    for (pos, &p) in power.iter().enumerate() {
        if cfg.passband.contains(freq_index(t, pos)) {
            pass += p;
            n_pass += 1;
        } else {
            stop += p;
            n_stop += 1;
        }
    }
    if n_stop == 0 || n_pass == 0 {
        return None;
    }
    Some(power_db(pass / n_pass as f64) - power_db(stop / n_stop as f64))
}

/// Fields radiated towards each probing direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalWaveforms {
    pub num_samples: usize,
    /// `spectra[k][p] = a(m, phi_k)^T x_F[m]`.
    pub spectra: Vec<Vec<Complex64>>,
    /// Inverse centered DFT of each spectrum.
    pub waveforms: Vec<Vec<Complex64>>,
}

impl DirectionalWaveforms {
    pub fn num_directions(&self) -> usize {
        self.spectra.len()
    }

    /// Per-frequency power averaged over directions.
    pub fn mean_power(&self) -> Vec<f64> {
        let k = self.num_directions() as f64;
        (0..self.num_samples)
            .map(|p| self.spectra.iter().map(|s| s[p].norm_sqr()).sum::<f64>() / k)
            .collect()
    }
}

pub fn directional_waveforms(
    x: &[Complex64],
    op: &BeamOperator,
) -> Result<DirectionalWaveforms, OperatorError> {
    let y = op.forward_unscaled(x)?;
    let (t, k) = (op.num_samples(), op.num_directions());
    let spectra: Vec<Vec<Complex64>> = (0..k)
        .map(|kk| (0..t).map(|p| y[p * k + kk]).collect())
        .collect();
    let mut flat: Vec<Complex64> = spectra.concat();
    op.dft().inverse_rows(&mut flat);
    let waveforms = flat.chunks_exact(t).map(|c| c.to_vec()).collect();
    Ok(DirectionalWaveforms {
        num_samples: t,
        spectra,
        waveforms,
    })
}

/// Circular correlations `r_kl[tau] = sum_t y_k[t] conj(y_l[(t - tau) mod T])`
/// for every ordered pair of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlations {
    num_directions: usize,
    num_samples: usize,
    raw: Vec<Complex64>,
}

impl Correlations {
    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn raw(&self, k: usize, l: usize, tau: usize) -> Complex64 {
        self.raw[(k * self.num_directions + l) * self.num_samples + tau]
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.raw(k, k, 0).re
    }

    /// `|r_kl[tau]| / sqrt(r_kk[0] r_ll[0])`.
    pub fn normalized(&self, k: usize, l: usize, tau: usize) -> f64 {
        self.raw(k, l, tau).norm() / (self.energy(k) * self.energy(l)).sqrt()
    }

    /// `K x T`, dB.
    pub fn autocorr_db(&self) -> Vec<Vec<f64>> {
        (0..self.num_directions)
            .map(|k| {
                (0..self.num_samples)
                    .map(|tau| power_db(self.normalized(k, k, tau).powi(2)))
                    .collect()
            })
            .collect()
    }

    /// `K x K x T`, dB.
    pub fn crosscorr_db(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_directions)
            .map(|k| {
                (0..self.num_directions)
                    .map(|l| {
                        (0..self.num_samples)
                            .map(|tau| power_db(self.normalized(k, l, tau).powi(2)))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest normalized cross-correlation over `k != l` and all lags, dB.
    pub fn peak_crosscorr_db(&self) -> Option<f64> {
        let mut peak: Option<f64> = None;
        for k in 0..self.num_directions {
            for l in (0..self.num_directions).filter(|&l| l != k) {
                for tau in 0..self.num_samples {
                    let v = self.normalized(k, l, tau);
                    peak = Some(peak.map_or(v, |p| p.max(v)));
                }
            }
        }
        peak.map(|p| power_db(p * p))
    }

    /// Largest normalized autocorrelation over nonzero lags, dB.
    pub fn peak_autocorr_sidelobe_db(&self) -> Option<f64> {
        let mut peak: Option<f64> = None;
        for k in 0..self.num_directions {
            for tau in 1..self.num_samples {
                let v = self.normalized(k, k, tau);
                peak = Some(peak.map_or(v, |p| p.max(v)));
            }
        }
        peak.map(|p| power_db(p * p))
    }
}

pub fn correlations(w: &DirectionalWaveforms) -> Result<Correlations, MetricsError> {
    let (k, t) = (w.num_directions(), w.num_samples);
    for (kk, y) in w.waveforms.iter().enumerate() {
        if y.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(MetricsError::ZeroEnergy(kk));
        }
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(t);
    let inv = planner.plan_fft_inverse(t);
    let spectra: Vec<Vec<Complex64>> = w
        .waveforms
        .iter()
        .map(|y| {
            let mut s = y.clone();
            fwd.process(&mut s);
            s
        })
        .collect();
    let mut raw = vec![Complex64::default(); k * k * t];
    raw.par_chunks_mut(t).enumerate().for_each(|(pair, out)| {
        let (a, b) = (&spectra[pair / k], &spectra[pair % k]);
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x * y.conj();
        }
        inv.process(out);
        out.iter_mut().for_each(|v| *v /= t as f64);
    });
    Ok(Correlations {
        num_directions: k,
        num_samples: t,
        raw,
    })
}

/// `n` uniformly spaced angles strictly inside (0, pi).
pub fn default_angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect()
}

/// `P(phi) = sum_m |a(m, phi)^T x_F[m]|^2`, linear and unnormalized.
pub fn radiation_power(
    x: &[Complex64],
    cfg: &RadarConfig,
    grid: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0 && g < PI)) {
        return Err(MetricsError::InvalidGrid);
    }
    let (n, t) = (cfg.num_antennas, cfg.num_samples);
    if x.len() != n * t {
        return Err(OperatorError::DimensionMismatch {
            what: "pattern input",
            expected: n * t,
            got: x.len(),
        }
        .into());
    }
    let spectra = antenna_spectra(&CenteredDft::new(t), x, n);
    let span = t as f64 * cfg.sample_interval * cfg.center_freq;
    Ok(grid
        .par_iter()
        .map(|&phi| {
            let c = phi.cos();
            (0..t)
                .map(|pos| {
                    let m = freq_index(t, pos) as f64;
                    let step = Complex64::from_polar(1.0, -PI * c * (m / span + 1.0));
                    let mut a = Complex64::new(1.0, 0.0);
                    let mut acc = Complex64::default();
                    for nn in 0..n {
                        acc += a * spectra[nn * t + pos];
                        a *= step;
                    }
                    acc.norm_sqr()
                })
                .sum()
        })
        .collect())
}

/// [`radiation_power`] in dB, normalized to a 0 dB maximum over the grid.
pub fn radiation_pattern(
    x: &[Complex64],
    cfg: &RadarConfig,
    grid: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    let p = radiation_power(x, cfg, grid)?;
    let peak = p.iter().cloned().fold(0.0, f64::max);
    Ok(p.iter()
        .map(|&v| {
            if peak > 0.0 {
                power_db(v / peak)
            } else {
                DB_FLOOR
            }
        })
        .collect())
}

/// Everything plotted for one waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psd_db: Vec<f64>,
    pub autocorr_db: Vec<Vec<f64>>,
    pub crosscorr_db: Vec<Vec<Vec<f64>>>,
    pub pattern_grid: Vec<f64>,
    pub pattern_db: Vec<f64>,
    /// From the antenna-averaged PSD.
    pub oob_suppression_db: Option<f64>,
    /// From the direction-averaged spectra of the probing waveforms.
    pub directional_oob_suppression_db: Option<f64>,
    pub peak_crosscorr_db: Option<f64>,
    pub peak_autocorr_sidelobe_db: Option<f64>,
}

pub fn evaluate(
    x: &[Complex64],
    cfg: &RadarConfig,
    op: &BeamOperator,
    grid: &[f64],
) -> Result<MetricsReport, MetricsError> {
    let power = psd(x, cfg)?;
    let waves = directional_waveforms(x, op)?;
    let corr = correlations(&waves)?;
    let pattern_db = radiation_pattern(x, cfg, grid)?;
    Ok(MetricsReport {
        psd_db: power.iter().map(|&p| power_db(p)).collect(),
        autocorr_db: corr.autocorr_db(),
        crosscorr_db: corr.crosscorr_db(),
        pattern_grid: grid.to_vec(),
        pattern_db,
        oob_suppression_db: band_suppression_db(&power, cfg),
        directional_oob_suppression_db: band_suppression_db(&waves.mean_power(), cfg),
        peak_crosscorr_db: corr.peak_crosscorr_db(),
        peak_autocorr_sidelobe_db: corr.peak_autocorr_sidelobe_db(),
    })
}
