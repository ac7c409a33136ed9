//! Separable resampling kernels.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Cubic convolution parameter (Keys).
pub const CUBIC_A: f64 = -0.5;
/// Lanczos window size.
pub const LANCZOS_A: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpKernel {
    Nearest,
    Bilinear,
    Bicubic,
    Lanczos,
}

impl InterpKernel {
    pub const ALL: [InterpKernel; 4] = [Self::Nearest, Self::Bilinear, Self::Bicubic, Self::Lanczos];

    /// Half-width in source texels.
    pub fn support(self) -> f64 {
        match self {
            Self::Nearest => 0.5,
            Self::Bilinear => 1.0,
            Self::Bicubic => 2.0,
            Self::Lanczos => LANCZOS_A,
        }
    }

    /// Kernel value at offset `x` from a sample.
    pub fn weight(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            // Half-open so a tie selects exactly one sample.
            Self::Nearest => {
                if (-0.5..0.5).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Bilinear => (1.0 - ax).max(0.0),
            Self::Bicubic => cubic(ax, CUBIC_A),
            Self::Lanczos => {
                if ax >= LANCZOS_A {
                    0.0
                } else {
                    sinc(x) * sinc(x / LANCZOS_A)
                }
            }
        }
    }

    /// Source samples touched at continuous position `pos` and their raw
    /// kernel weights, ascending by index. Zero weights are omitted.
    pub fn taps(self, pos: f64) -> Vec<(i64, f64)> {
        let r = self.support();
        let lo = (pos - r).floor() as i64;
        let hi = (pos + r).ceil() as i64;
        (lo..=hi)
            .filter_map(|i| {
                let w = self.weight(pos - i as f64);
                (w != 0.0).then_some((i, w))
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
            Self::Lanczos => "lanczos",
        }
    }
}

impl fmt::Display for InterpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpKernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown kernel {s:?}"))
    }
}

/// Keys cubic convolution kernel for `x >= 0`.
pub fn cubic(x: f64, a: f64) -> f64 {
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_impulse_response() {
        let k = InterpKernel::Lanczos;
        assert_eq!(k.weight(0.0), 1.0);
        assert!(k.weight(1.0).abs() < 1e-16);
        assert!(k.weight(2.0).abs() < 1e-16);
        // a sin(pi x) sin(pi x / a) / (pi x)^2 at x = 1.5
        let expect = 3.0 * (1.5 * PI).sin() * (0.5 * PI).sin() / (1.5 * PI).powi(2);
        assert!((k.weight(1.5) - expect).abs() < 1e-14);
        assert!((k.weight(-1.5) - expect).abs() < 1e-14);
        assert_eq!(k.weight(3.0), 0.0);
    }

    #[test]
    fn cubic_interpolates_samples() {
        assert_eq!(cubic(0.0, CUBIC_A), 1.0);
        assert_eq!(cubic(1.0, CUBIC_A), 0.0);
        assert_eq!(cubic(2.0, CUBIC_A), 0.0);
        // Keys kernel at 0.5 is (a + 2)/8 - (a + 3)/4 + 1.
        assert!((cubic(0.5, CUBIC_A) - 0.5625).abs() < 1e-15);
        assert!((cubic(1.5, CUBIC_A) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn weights_partition_unity() {
        for k in InterpKernel::ALL {
            for step in 0..64 {
                let pos = 10.0 + step as f64 / 64.0;
                let sum: f64 = k.taps(pos).iter().map(|t| t.1).sum();
                match k {
                    InterpKernel::Lanczos => assert!((sum - 1.0).abs() < 0.02),
                    _ => assert!((sum - 1.0).abs() < 1e-12, "{k} at {pos}: {sum}"),
                }
            }
        }
    }

    #[test]
    fn nearest_picks_one_sample() {
        let k = InterpKernel::Nearest;
        assert_eq!(k.taps(2.25), vec![(2, 1.0)]);
        assert_eq!(k.taps(2.5), vec![(3, 1.0)]);
        assert_eq!(k.taps(-0.25), vec![(0, 1.0)]);
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in InterpKernel::ALL {
            assert_eq!(k.to_string().parse::<InterpKernel>().unwrap(), k);
        }
        assert!("gaussian".parse::<InterpKernel>().is_err());
    }
}
