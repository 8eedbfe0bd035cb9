//! Configuration, DAC alphabet and desired beampattern.
//!
//! Frequency bins are indexed by a signed index `m` running over
//! `-floor(T/2) .. T - floor(T/2)`; storage position is `m + floor(T/2)`,
//! so the zero-frequency bin sits in the middle of every frequency-major
//! block.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported DAC resolution.
pub const MAX_DAC_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("num_antennas must be positive")]
    NoAntennas,
    #[error("num_samples must be a positive power of two, got {0}")]
    NonPowerOfTwoSamples(usize),
    #[error("dac_bits must be in 1..={max}, got {0}", max = MAX_DAC_BITS)]
    DacBitsOutOfRange(u32),
    #[error("at least one direction is required")]
    NoDirections,
    #[error("{directions} directions exceed {antennas} antennas")]
    TooManyDirections { directions: usize, antennas: usize },
    #[error("direction {0} rad is outside the open interval (0, pi)")]
    DirectionOutOfRange(f64),
    #[error("duplicate direction {0} rad")]
    DuplicateDirections(f64),
    #[error("damping must lie in [0, 1), got {0}")]
    DampingOutOfRange(f64),
    #[error("regularization must be finite and nonnegative, got {0}")]
    NegativeRegularization(f64),
    #[error("center frequency must be positive and finite, got {0}")]
    InvalidCenterFrequency(f64),
    #[error("sample interval must be positive and finite, got {0}")]
    InvalidSampleInterval(f64),
    #[error("max_iters must be positive")]
    ZeroMaxIters,
    #[error("rel_tol must be positive and finite, got {0}")]
    InvalidRelTol(f64),
    #[error("passband [{lo}, {hi}) is empty")]
    EmptyPassband { lo: i64, hi: i64 },
    #[error("passband [{lo}, {hi}) is outside the frequency range [{min}, {max})")]
    PassbandOutOfRange {
        lo: i64,
        hi: i64,
        min: i64,
        max: i64,
    },
    #[error("desired pattern has length {got}, expected {expected}")]
    PatternLength { got: usize, expected: usize },
    #[error("desired pattern entry {index} is negative or not finite: {value}")]
    InvalidIntensity { index: usize, value: f64 },
}

/// Half-open interval `[lo, hi)` of signed frequency indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passband {
    pub lo: i64,
    pub hi: i64,
}

impl Passband {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    /// `[-T/4, T/4)`, widened to the full band when `T < 4`.
    pub fn default_for(num_samples: usize) -> Self {
        if num_samples >= 4 {
            let q = (num_samples / 4) as i64;
            Self::new(-q, q)
        } else {
            Self::new(freq_index_min(num_samples), freq_index_end(num_samples))
        }
    }

    pub fn contains(&self, m: i64) -> bool {
        m >= self.lo && m < self.hi
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo).max(0) as usize
    }
}

/// Smallest frequency index, `-floor(T/2)`.
pub fn freq_index_min(num_samples: usize) -> i64 {
    -((num_samples / 2) as i64)
}

/// One past the largest frequency index.
pub fn freq_index_end(num_samples: usize) -> i64 {
    freq_index_min(num_samples) + num_samples as i64
}

/// Signed frequency index for storage position `pos`.
pub fn freq_index(num_samples: usize, pos: usize) -> i64 {
    freq_index_min(num_samples) + pos as i64
}

/// Physical and algorithmic parameters of one synthesis problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub num_antennas: usize,
    pub num_samples: usize,
    /// Carrier frequency in Hz.
    pub center_freq: f64,
    /// Sampling interval in seconds.
    pub sample_interval: f64,
    pub dac_bits: u32,
    /// Probing directions in radians, each in (0, pi).
    pub directions: Vec<f64>,
    pub damping: f64,
    pub regularization: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub passband: Passband,
    pub seed: u64,
}

impl RadarConfig {
    /// Defaults matching the 2-bit, 77 GHz, 2 GS/s setup with `K`
    /// directions spread evenly over (0, pi).
    pub fn new(num_antennas: usize, num_samples: usize, num_directions: usize) -> Self {
        let directions = evenly_spaced_directions(num_directions);
        Self {
            num_antennas,
            num_samples,
            center_freq: 77e9,
            sample_interval: 0.5e-9,
            dac_bits: 2,
            regularization: (num_directions * num_samples) as f64,
            directions,
            damping: 0.3,
            max_iters: 200,
            rel_tol: 1e-4,
            passband: Passband::default_for(num_samples),
            seed: 0,
        }
    }

    /// N = 128 antennas, T = 1024 samples, K = 10 directions.
    pub fn full_scale() -> Self {
        Self::new(128, 1024, 10)
    }

    /// N = 16, T = 256, K = 4.
    pub fn desk_scale() -> Self {
        Self::new(16, 256, 4)
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    /// Length of the stacked waveform `x`, `N*T`.
    pub fn num_inputs(&self) -> usize {
        self.num_antennas * self.num_samples
    }

    /// Length of the stacked field `y`, `K*T`.
    pub fn num_outputs(&self) -> usize {
        self.num_directions() * self.num_samples
    }

    /// Returns the configuration unchanged if every invariant holds.
    pub fn validate(self) -> Result<Self, ConfigError> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.num_antennas == 0 {
            return Err(ConfigError::NoAntennas);
        }
        if !self.num_samples.is_power_of_two() {
            return Err(ConfigError::NonPowerOfTwoSamples(self.num_samples));
        }
        if self.dac_bits == 0 || self.dac_bits > MAX_DAC_BITS {
            return Err(ConfigError::DacBitsOutOfRange(self.dac_bits));
        }
        if self.directions.is_empty() {
            return Err(ConfigError::NoDirections);
        }
        if self.directions.len() > self.num_antennas {
            return Err(ConfigError::TooManyDirections {
                directions: self.directions.len(),
                antennas: self.num_antennas,
            });
        }
        for (i, &phi) in self.directions.iter().enumerate() {
            if !(phi > 0.0 && phi < PI) {
                return Err(ConfigError::DirectionOutOfRange(phi));
            }
            if self.directions[..i].contains(&phi) {
                return Err(ConfigError::DuplicateDirections(phi));
            }
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(ConfigError::DampingOutOfRange(self.damping));
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return Err(ConfigError::NegativeRegularization(self.regularization));
        }
        if !(self.center_freq.is_finite() && self.center_freq > 0.0) {
            return Err(ConfigError::InvalidCenterFrequency(self.center_freq));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(ConfigError::InvalidSampleInterval(self.sample_interval));
        }
        if self.max_iters == 0 {
            return Err(ConfigError::ZeroMaxIters);
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(ConfigError::InvalidRelTol(self.rel_tol));
        }
        let Passband { lo, hi } = self.passband;
        if lo >= hi {
            return Err(ConfigError::EmptyPassband { lo, hi });
        }
        let (min, max) = (
            freq_index_min(self.num_samples),
            freq_index_end(self.num_samples),
        );
        if lo < min || hi > max {
            return Err(ConfigError::PassbandOutOfRange { lo, hi, min, max });
        }
        Ok(())
    }
}

/// `K` angles `pi*k/(K+1)`, `k = 1..=K`.
pub fn evenly_spaced_directions(k: usize) -> Vec<f64> {
    (1..=k).map(|i| PI * i as f64 / (k + 1) as f64).collect()
}

/// Phase-only DAC alphabet: `2^b` points `exp(j*2*pi*(l + 1/2)/2^b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: u32,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(bits: u32) -> Result<Self, ConfigError> {
        if bits == 0 || bits > MAX_DAC_BITS {
            return Err(ConfigError::DacBitsOutOfRange(bits));
        }
        let size = 1usize << bits;
        let step = 2.0 * PI / size as f64;
        let points = (0..size)
            .map(|l| Complex64::from_polar(1.0, step * (l as f64 + 0.5)))
            .collect();
        Ok(Self { bits, points })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Angular gap between adjacent points.
    pub fn phase_step(&self) -> f64 {
        2.0 * PI / self.points.len() as f64
    }

    /// Index of the point nearest to `v`.
    ///
    /// Nearest in Euclidean distance is nearest in phase, so this only looks
    /// at `arg(v)`. Exact ties go to the lower index and `arg(0) = 0`.
    pub fn nearest_index(&self, v: Complex64) -> usize {
        let size = self.points.len();
        let mut phase = v.im.atan2(v.re);
        if phase < 0.0 {
            phase += 2.0 * PI;
        }
        // Continuous index: point l sits at l exactly.
        let pos = phase / self.phase_step() - 0.5;
        let below = pos.floor();
        let frac = pos - below;
        let wrap = |i: f64| (i as i64).rem_euclid(size as i64) as usize;
        let lower = wrap(below);
        let upper = wrap(below + 1.0);
        if frac < 0.5 {
            lower
        } else if frac > 0.5 {
            upper
        } else {
            lower.min(upper)
        }
    }

    pub fn project(&self, v: Complex64) -> Complex64 {
        self.points[self.nearest_index(v)]
    }

    /// Index of `x` if it is exactly one of the alphabet points.
    pub fn index_of(&self, x: Complex64) -> Option<usize> {
        self.points.iter().position(|&p| p == x)
    }
}

/// Desired beampattern intensities `d`, frequency-major: block `p` holds the
/// `K` direction intensities of frequency index `m = p - floor(T/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPattern {
    num_samples: usize,
    num_directions: usize,
    values: Vec<f64>,
}

impl DesiredPattern {
    /// Intensity on every direction of every passband bin, zero elsewhere.
    pub fn flat(cfg: &RadarConfig, intensity: f64) -> Result<Self, ConfigError> {
        cfg.check()?;
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(ConfigError::InvalidIntensity {
                index: 0,
                value: intensity,
            });
        }
        let t = cfg.num_samples;
        let k = cfg.num_directions();
        let mut values = vec![0.0; t * k];
        for (pos, block) in values.chunks_exact_mut(k).enumerate() {
            if cfg.passband.contains(freq_index(t, pos)) {
                block.fill(intensity);
            }
        }
        Ok(Self {
            num_samples: t,
            num_directions: k,
            values,
        })
    }

    /// Arbitrary nonnegative intensities, laid out frequency-major.
    pub fn from_values(
        num_samples: usize,
        num_directions: usize,
        values: Vec<f64>,
    ) -> Result<Self, ConfigError> {
        let expected = num_samples * num_directions;
        if values.len() != expected {
            return Err(ConfigError::PatternLength {
                got: values.len(),
                expected,
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ConfigError::InvalidIntensity { index, value });
        }
        Ok(Self {
            num_samples,
            num_directions,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    /// The `K` intensities of frequency index `m`.
    pub fn block(&self, m: i64) -> &[f64] {
        let pos = (m - freq_index_min(self.num_samples)) as usize;
        &self.values[pos * self.num_directions..(pos + 1) * self.num_directions]
    }

    /// `sum_j d_j`, the cost of the all-zero waveform.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn two_bit_alphabet_is_rotated_qpsk() {
        let c = Constellation::new(2).unwrap();
        let expected = [1.0, 3.0, 5.0, 7.0].map(|q| Complex64::from_polar(1.0, q * PI / 4.0));
        assert_eq!(c.len(), 4);
        for (p, e) in c.points().iter().zip(expected) {
            assert!(close(*p, e));
        }
    }

    #[test]
    fn one_bit_alphabet_is_plus_minus_j() {
        let c = Constellation::new(1).unwrap();
        assert!(close(c.point(0), Complex64::new(0.0, 1.0)));
        assert!(close(c.point(1), Complex64::new(0.0, -1.0)));
    }

    #[test]
    fn three_bit_gaps() {
        let c = Constellation::new(3).unwrap();
        assert_eq!(c.len(), 8);
        // Independent enumeration: pi/8 + l*pi/4.
        for (l, p) in c.points().iter().enumerate() {
            let phase = PI / 8.0 + l as f64 * PI / 4.0;
            assert!(close(*p, Complex64::from_polar(1.0, phase)));
        }
        for w in c.points().windows(2) {
            let gap = (w[1] / w[0]).arg();
            assert!((gap - PI / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alphabet_invariants_all_resolutions() {
        for b in 1..=10 {
            let c = Constellation::new(b).unwrap();
            let sum: Complex64 = c.points().iter().sum();
            assert!(sum.norm() < 1e-9, "b={b} sum={sum}");
            for p in c.points() {
                assert!((p.norm() - 1.0).abs() < 1e-15);
                // +-j for b = 1 sit on the imaginary axis; nothing ever
                // lands on the real axis.
                assert!(p.im.abs() > 1e-9);
                if b >= 2 {
                    assert!(p.re.abs() > 1e-9);
                }
            }
        }
    }

    #[test]
    fn one_bit_points_stay_off_the_real_axis() {
        let c = Constellation::new(1).unwrap();
        for p in c.points() {
            assert!(p.im.abs() > 0.5);
        }
    }

    #[test]
    fn constellation_bits_range() {
        assert_eq!(
            Constellation::new(0),
            Err(ConfigError::DacBitsOutOfRange(0))
        );
        assert_eq!(
            Constellation::new(17),
            Err(ConfigError::DacBitsOutOfRange(17))
        );
        assert_eq!(Constellation::new(16).unwrap().len(), 65536);
    }

    #[test]
    fn nearest_index_tie_breaks_low() {
        let c = Constellation::new(2).unwrap();
        assert_eq!(c.nearest_index(Complex64::new(1.0, 0.0)), 0);
        assert_eq!(c.nearest_index(Complex64::new(0.0, 1.0)), 0);
        assert_eq!(c.nearest_index(Complex64::new(-1.0, 0.0)), 1);
        assert_eq!(c.nearest_index(Complex64::new(0.0, 0.0)), 0);
        assert_eq!(c.nearest_index(Complex64::new(3.0, 0.5)), 0);
        assert_eq!(c.nearest_index(Complex64::new(0.2, -3.0)), 3);
    }

    #[test]
    fn flat_pattern_small() {
        let mut cfg = RadarConfig::new(4, 8, 2);
        cfg.passband = Passband::new(-2, 2);
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        assert_eq!(d.len(), 16);
        for m in -4..4 {
            let want = if (-2..2).contains(&m) { 1.0 } else { 0.0 };
            assert_eq!(d.block(m), &[want, want]);
        }
    }

    #[test]
    fn flat_pattern_full_band() {
        let mut cfg = RadarConfig::new(1, 4, 1);
        cfg.passband = Passband::new(-2, 2);
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        assert_eq!(d.values(), &[1.0; 4]);
    }

    #[test]
    fn flat_pattern_full_scale_count() {
        let cfg = RadarConfig::full_scale();
        let d = DesiredPattern::flat(&cfg, 1.0).unwrap();
        assert_eq!(d.len(), 10240);
        assert_eq!(d.nonzero_count(), 512 * 10);
    }

    #[test]
    fn full_scale_defaults_validate() {
        let cfg = RadarConfig::full_scale();
        assert_eq!(cfg.regularization, 10240.0);
        assert_eq!(cfg.passband, Passband::new(-256, 256));
        assert!((1.0 / cfg.sample_interval - 2e9).abs() < 1.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn named_validation_errors() {
        let base = RadarConfig::desk_scale();

        let mut cfg = base.clone();
        cfg.damping = 1.0;
        assert_eq!(cfg.validate(), Err(ConfigError::DampingOutOfRange(1.0)));

        let mut cfg = base.clone();
        cfg.num_samples = 1000;
        cfg.passband = Passband::new(-250, 250);
        assert_eq!(cfg.validate(), Err(ConfigError::NonPowerOfTwoSamples(1000)));

        let mut cfg = base.clone();
        cfg.passband = Passband::new(3, 3);
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::EmptyPassband { lo: 3, hi: 3 })
        );

        let mut cfg = base.clone();
        cfg.passband = Passband::new(-200, 0);
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::PassbandOutOfRange { .. })
        ));

        let mut cfg = base.clone();
        cfg.directions = vec![1.0, 2.0, 1.0];
        assert_eq!(cfg.validate(), Err(ConfigError::DuplicateDirections(1.0)));

        let mut cfg = base.clone();
        cfg.num_antennas = 2;
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::TooManyDirections {
                directions: 4,
                antennas: 2
            })
        );

        let mut cfg = base.clone();
        cfg.directions = vec![0.0];
        assert_eq!(cfg.validate(), Err(ConfigError::DirectionOutOfRange(0.0)));

        let mut cfg = base;
        cfg.regularization = -1.0;
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::NegativeRegularization(-1.0))
        );
    }

    #[test]
    fn validate_is_idempotent() {
        let cfg = RadarConfig::desk_scale();
        let once = cfg.clone().validate().unwrap();
        let twice = once.clone().validate().unwrap();
        assert_eq!(cfg, once);
        assert_eq!(once, twice);
    }

    #[test]
    fn tiny_default_passband_is_full_band() {
        assert_eq!(Passband::default_for(2), Passband::new(-1, 1));
        assert_eq!(Passband::default_for(1), Passband::new(0, 1));
        assert_eq!(Passband::default_for(8), Passband::new(-2, 2));
    }

    #[test]
    fn pattern_rejects_negative_entries() {
        assert!(matches!(
            DesiredPattern::from_values(2, 1, vec![1.0, -0.5]),
            Err(ConfigError::InvalidIntensity { index: 1, .. })
        ));
        assert!(matches!(
            DesiredPattern::from_values(2, 1, vec![1.0]),
            Err(ConfigError::PatternLength { .. })
        ));
    }
}
