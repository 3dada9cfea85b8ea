//! Scalar periodic profiles used to build coefficient fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub amplitude: f64,
    /// Integer wave vector (one entry per axis; missing entries are zero).
    pub wave: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

/// A scalar function on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarProfile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·cos(2π y_axis)`
    Cosine {
        mean: f64,
        amplitude: f64,
        axis: usize,
    },
    /// `1 / (mean + amplitude·cos(2π y_axis))`
    InverseCosine {
        mean: f64,
        amplitude: f64,
        axis: usize,
    },
    /// `mean + Σ amplitude·cos(2π k·y + phase)`
    Trig { mean: f64, modes: Vec<TrigMode> },
    /// `first` on `[0, ½)`, `second` on `[½, 1)` along `axis`, joined by
    /// linear ramps of total width `ramp_width` centred on both interfaces.
    TwoPhase {
        first: f64,
        second: f64,
        axis: usize,
        #[serde(default)]
        ramp_width: f64,
    },
    /// Ball of `radius` around the cell centre holding `inside`, `outside`
    /// elsewhere, with a linear radial ramp of width `ramp_width`.
    Inclusion {
        inside: f64,
        outside: f64,
        radius: f64,
        #[serde(default)]
        ramp_width: f64,
    },
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

impl ScalarProfile {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            ScalarProfile::Constant { value } => *value,
            ScalarProfile::Cosine {
                mean,
                amplitude,
                axis,
            } => mean + amplitude * (2.0 * PI * y[*axis]).cos(),
            ScalarProfile::InverseCosine {
                mean,
                amplitude,
                axis,
            } => 1.0 / (mean + amplitude * (2.0 * PI * y[*axis]).cos()),
            ScalarProfile::Trig { mean, modes } => {
                mean + modes
                    .iter()
                    .map(|m| {
                        let phase: f64 = m
                            .wave
                            .iter()
                            .zip(y)
                            .map(|(&k, &yi)| k as f64 * yi)
                            .sum();
                        m.amplitude * (2.0 * PI * phase + m.phase).cos()
                    })
                    .sum::<f64>()
            }
            ScalarProfile::TwoPhase {
                first,
                second,
                axis,
                ramp_width,
            } => first + (second - first) * second_phase_fraction(frac(y[*axis]), *ramp_width),
            ScalarProfile::Inclusion {
                inside,
                outside,
                radius,
                ramp_width,
            } => {
                let r = y
                    .iter()
                    .map(|&yi| {
                        let t = frac(yi) - 0.5;
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt();
                let w = *ramp_width;
                let s = if w > 0.0 {
                    ((r - (radius - 0.5 * w)) / w).clamp(0.0, 1.0)
                } else if r < *radius {
                    0.0
                } else {
                    1.0
                };
                inside + (outside - inside) * s
            }
        }
    }

    /// Exact `(min, max)` over the torus.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ScalarProfile::Constant { value } => (*value, *value),
            ScalarProfile::Cosine {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            ScalarProfile::InverseCosine {
                mean, amplitude, ..
            } => {
                let lo = mean - amplitude.abs();
                let hi = mean + amplitude.abs();
                (1.0 / hi, 1.0 / lo)
            }
            ScalarProfile::Trig { mean, modes } => {
                let spread: f64 = modes.iter().map(|m| m.amplitude.abs()).sum();
                (mean - spread, mean + spread)
            }
            ScalarProfile::TwoPhase { first, second, .. } => (first.min(*second), first.max(*second)),
            ScalarProfile::Inclusion {
                inside, outside, ..
            } => (inside.min(*outside), inside.max(*outside)),
        }
    }
}

/// Share of the second phase at `t ∈ [0,1)`.
fn second_phase_fraction(t: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return if t >= 0.5 { 1.0 } else { 0.0 };
    }
    let t = if t < 0.5 * w { t + 1.0 } else { t };
    let up = ((t - 0.5 + 0.5 * w) / w).clamp(0.0, 1.0);
    let down = ((t - 1.0 + 0.5 * w) / w).clamp(0.0, 1.0);
    up - down
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_phase_values_and_ramp_midpoints() {
        let p = ScalarProfile::TwoPhase {
            first: 1.0,
            second: 4.0,
            axis: 0,
            ramp_width: 0.1,
        };
        assert_eq!(p.eval(&[0.25]), 1.0);
        assert_eq!(p.eval(&[0.75]), 4.0);
        assert!((p.eval(&[0.5]) - 2.5).abs() < 1e-12);
        assert!((p.eval(&[0.0]) - 2.5).abs() < 1e-12);
        assert!((p.eval(&[0.999_999]) - p.eval(&[-0.000_001])).abs() < 1e-12);
    }

    #[test]
    fn sharp_two_phase() {
        let p = ScalarProfile::TwoPhase {
            first: 1.0,
            second: 4.0,
            axis: 1,
            ramp_width: 0.0,
        };
        assert_eq!(p.eval(&[0.9, 0.49]), 1.0);
        assert_eq!(p.eval(&[0.1, 0.5]), 4.0);
    }

    #[test]
    fn inclusion_inside_and_outside() {
        let p = ScalarProfile::Inclusion {
            inside: 5.0,
            outside: 1.0,
            radius: 0.3,
            ramp_width: 0.05,
        };
        assert_eq!(p.eval(&[0.5, 0.5]), 5.0);
        assert_eq!(p.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(p.eval(&[1.5, -0.5]), 5.0);
    }

    #[test]
    fn trig_range_bounds_samples() {
        let p = ScalarProfile::Trig {
            mean: 2.0,
            modes: vec![
                TrigMode {
                    amplitude: 0.6,
                    wave: vec![1, 0],
                    phase: 0.0,
                },
                TrigMode {
                    amplitude: 0.5,
                    wave: vec![1, 1],
                    phase: 0.4,
                },
            ],
        };
        let (lo, hi) = p.range();
        for k in 0..400 {
            let y = [k as f64 * 0.0173, k as f64 * 0.0311];
            let v = p.eval(&y);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
