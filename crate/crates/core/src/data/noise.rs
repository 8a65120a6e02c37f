use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// How the Gaussian noise level is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScale {
    /// The level is the variance; the standard deviation is its square root.
    #[default]
    Variance,
    /// The level is the standard deviation.
    StdDev,
}

impl std::str::FromStr for NoiseScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(NoiseScale::Variance),
            "std" | "stddev" | "sigma" => Ok(NoiseScale::StdDev),
            other => Err(Error::InvalidInput(format!("unknown noise scale {other:?}"))),
        }
    }
}

/// Additive i.i.d. Gaussian corruption, unclipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoise {
    pub level: f64,
    pub scale: NoiseScale,
}

impl GaussianNoise {
    pub fn new(level: f64, scale: NoiseScale) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidInput(format!("noise level must be non-negative, got {level}")));
        }
        Ok(Self { level, scale })
    }

    pub fn std_dev(&self) -> f64 {
        match self.scale {
            NoiseScale::Variance => self.level.sqrt(),
            NoiseScale::StdDev => self.level,
        }
    }

    /// Corrupt `x` with the stream `(seed, index)`; `index` separates items.
    pub fn corrupt(&self, x: &[f64], seed: u64, index: u64) -> Vec<f64> {
        let sd = self.std_dev();
        if sd == 0.0 {
            return x.to_vec();
        }
        let mut rng = rng::stream(seed, Purpose::Noise, index);
        x.iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + sd * z
            })
            .collect()
    }
}

/// `x` plus Gaussian noise whose variance is `sigma`.
pub fn corrupt_gaussian(x: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(GaussianNoise::new(sigma, NoiseScale::Variance)?.corrupt(x, seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_identity() {
        let x = vec![0.1, 0.5, 0.9];
        assert_eq!(corrupt_gaussian(&x, 0.0, 3).unwrap(), x);
    }

    #[test]
    fn seeded_noise_repeats() {
        let x = vec![0.5; 64];
        assert_eq!(corrupt_gaussian(&x, 0.2, 9).unwrap(), corrupt_gaussian(&x, 0.2, 9).unwrap());
        assert_ne!(corrupt_gaussian(&x, 0.2, 9).unwrap(), corrupt_gaussian(&x, 0.2, 10).unwrap());
        let n = GaussianNoise::new(0.2, NoiseScale::Variance).unwrap();
        assert_ne!(n.corrupt(&x, 9, 0), n.corrupt(&x, 9, 1));
    }

    #[test]
    fn sample_moments_match_the_variance_reading() {
        let d = 100_000;
        let x = vec![0.25; d];
        for (scale, var) in [(NoiseScale::Variance, 0.2f64), (NoiseScale::StdDev, 0.04)] {
            let y = GaussianNoise::new(0.2, scale).unwrap().corrupt(&x, 17, 0);
            let diffs: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let mean = diffs.iter().sum::<f64>() / d as f64;
            let v = diffs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (d - 1) as f64;
            assert!(mean.abs() < 3.0 * var.sqrt() / (d as f64).sqrt(), "mean {mean}");
            assert!((v - var).abs() < 0.05 * var, "variance {v} vs {var}");
        }
    }

    #[test]
    fn negative_level_is_rejected() {
        assert!(corrupt_gaussian(&[0.0], -0.1, 0).is_err());
    }
}
