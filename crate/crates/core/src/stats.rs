//! Order-fixed reductions, Monte-Carlo summaries and seed derivation.

use serde::{Deserialize, Serialize};

/// Pairwise summation in index order. The result depends only on the
/// sequence, never on how it was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n if n <= 8 => values.iter().fold(0.0, |acc, v| acc + v),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Monte-Carlo estimate of a scalar mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// Sample mean with standard error `s / sqrt(R)` (zero for one sample).
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n > 0, "no samples");
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr,
            samples: n,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            stderr: self.stderr * c.abs(),
            samples: self.samples,
        }
    }
}

/// Entrywise estimates over a batch of equally sized sample vectors.
pub fn entrywise(samples: &[Vec<f64>]) -> Vec<Estimate> {
    let len = samples.first().map_or(0, |s| s.len());
    (0..len)
        .map(|k| {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            Estimate::from_samples(&column)
        })
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `parent`. Every random quantity in a
/// run descends from the top-level seed through this function
/// (run -> realization -> lattice cell).
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}
