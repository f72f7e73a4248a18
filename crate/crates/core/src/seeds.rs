// SPDX-License-Identifier: Apache-2.0

//! Generators for the test corpus.
//!
//! Seeds are written as `kind:p1,p2,...`, for example `circle:1`,
//! `ellipse:1.2,0.8`, `w_covered_circle:0.7071067811865476,2`,
//! `figure_eight:1` or `fourier_perturbed_circle:1,0.05,7,2,3` (radius,
//! amplitude, rng seed, then the perturbed modes).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DiscreteCurve;
use crate::spectral::DiffScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedKind {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
    WCoveredCircle { r: f64, w: u32 },
    FigureEight { scale: f64 },
    FourierPerturbedCircle {
        r: f64,
        modes: Vec<u32>,
        amplitude: f64,
        rng_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    #[serde(flatten)]
    pub kind: SeedKind,
    pub samples: usize,
    pub dim: usize,
    #[serde(default)]
    pub scheme: DiffScheme,
}

impl SeedSpec {
    pub fn new(kind: SeedKind, samples: usize, dim: usize) -> Self {
        Self {
            kind,
            samples,
            dim,
            scheme: DiffScheme::default(),
        }
    }

    pub fn build(&self) -> Result<DiscreteCurve> {
        seed_curve(&self.kind, self.samples, self.dim, self.scheme)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")))
    }
}

fn embed(dim: usize, xy: [f64; 2]) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[0] = xy[0];
    p[1] = xy[1];
    p
}

/// Builds the seed curve on an `samples`-point grid in `R^dim`.
pub fn seed_curve(kind: &SeedKind, samples: usize, dim: usize, scheme: DiffScheme) -> Result<DiscreteCurve> {
    if dim < 2 {
        return Err(Error::InvalidSpec(format!("dimension {dim} < 2")));
    }
    let make = |f: &dyn Fn(f64) -> Vec<f64>| {
        DiscreteCurve::from_fn(dim, samples, scheme, f).map_err(|e| match e {
            Error::InvalidCurve(m) | Error::DegenerateCurve(m) => Error::InvalidSpec(m),
            e => e,
        })
    };
    match kind {
        SeedKind::Circle { r } => {
            let r = positive("r", *r)?;
            make(&|t| embed(dim, [r * t.cos(), r * t.sin()]))
        }
        SeedKind::Ellipse { a, b } => {
            let (a, b) = (positive("a", *a)?, positive("b", *b)?);
            make(&|t| embed(dim, [a * t.cos(), b * t.sin()]))
        }
        SeedKind::WCoveredCircle { r, w } => {
            let r = positive("r", *r)?;
            if *w == 0 {
                return Err(Error::InvalidSpec("w must be at least 1".into()));
            }
            if 2 * *w as usize >= samples {
                return Err(Error::InvalidSpec(format!("{w}-fold circle needs more than {samples} samples")));
            }
            let w = *w as f64;
            make(&|t| embed(dim, [r * (w * t).cos(), r * (w * t).sin()]))
        }
        SeedKind::FigureEight { scale } => {
            let s = positive("scale", *scale)?;
            // half-sample phase keeps the R² crossing between grid points
            let phase = PI / samples as f64;
            make(&|t| {
                let u = t + phase;
                let mut p = embed(dim, [s * u.sin(), s * u.sin() * u.cos()]);
                if dim >= 3 {
                    p[2] = 0.25 * s * u.cos();
                }
                p
            })
        }
        SeedKind::FourierPerturbedCircle {
            r,
            modes,
            amplitude,
            rng_seed,
        } => {
            let r = positive("r", *r)?;
            if !(amplitude.is_finite() && amplitude.abs() < 1.0 / (modes.len().max(1) as f64 * 2f64.sqrt())) {
                return Err(Error::InvalidSpec(format!(
                    "amplitude {amplitude} too large for {} modes",
                    modes.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            let coef: Vec<(f64, f64, f64)> = modes
                .iter()
                .map(|&m| {
                    let c: f64 = rng.random_range(-1.0..=1.0);
                    let s: f64 = rng.random_range(-1.0..=1.0);
                    (m as f64, c, s)
                })
                .collect();
            let amp = *amplitude;
            make(&|t| {
                let rho = r * (1.0
                    + amp
                        * coef
                            .iter()
                            .map(|(m, c, s)| c * (m * t).cos() + s * (m * t).sin())
                            .sum::<f64>());
                embed(dim, [rho * t.cos(), rho * t.sin()])
            })
        }
    }
}

fn parse_f(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = match t {
        "1/sqrt2" | "crit" => std::f64::consts::FRAC_1_SQRT_2,
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::InvalidSpec(format!("not a number: {t:?}")))?,
    };
    Ok(v)
}

fn parse_u<T: FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::InvalidSpec(format!("not an integer: {:?}", s.trim())))
}

impl FromStr for SeedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<&str> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',').collect()
        };
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{kind} takes {n} parameter(s), got {}",
                    args.len()
                )))
            }
        };
        match kind.trim() {
            "circle" => {
                want(1)?;
                Ok(SeedKind::Circle { r: parse_f(args[0])? })
            }
            "ellipse" => {
                want(2)?;
                Ok(SeedKind::Ellipse {
                    a: parse_f(args[0])?,
                    b: parse_f(args[1])?,
                })
            }
            "w_covered_circle" | "w_circle" => {
                want(2)?;
                Ok(SeedKind::WCoveredCircle {
                    r: parse_f(args[0])?,
                    w: parse_u(args[1])?,
                })
            }
            "figure_eight" => {
                want(1)?;
                Ok(SeedKind::FigureEight {
                    scale: parse_f(args[0])?,
                })
            }
            "fourier_perturbed_circle" | "fourier" => {
                if args.len() < 3 {
                    return Err(Error::InvalidSpec(format!(
                        "{kind} takes r,amplitude,seed,modes..."
                    )));
                }
                Ok(SeedKind::FourierPerturbedCircle {
                    r: parse_f(args[0])?,
                    amplitude: parse_f(args[1])?,
                    rng_seed: parse_u(args[2])?,
                    modes: args[3..].iter().map(|m| parse_u(m)).collect::<Result<_>>()?,
                })
            }
            other => Err(Error::InvalidSpec(format!("unknown seed kind {other:?}"))),
        }
    }
}

impl fmt::Display for SeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedKind::Circle { r } => write!(f, "circle:{r}"),
            SeedKind::Ellipse { a, b } => write!(f, "ellipse:{a},{b}"),
            SeedKind::WCoveredCircle { r, w } => write!(f, "w_covered_circle:{r},{w}"),
            SeedKind::FigureEight { scale } => write!(f, "figure_eight:{scale}"),
            SeedKind::FourierPerturbedCircle {
                r,
                modes,
                amplitude,
                rng_seed,
            } => {
                write!(f, "fourier_perturbed_circle:{r},{amplitude},{rng_seed}")?;
                for m in modes {
                    write!(f, ",{m}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::{elastic_energy, gradient_norm_l2ds, EnergyParams};

    #[test]
    fn unit_circle_energy() {
        let c = seed_curve(&"circle:1".parse().unwrap(), 256, 2, DiffScheme::Spectral).unwrap();
        let e = elastic_energy(&c, &EnergyParams::default());
        assert!((e - 3.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn doubly_covered_critical_circle_is_critical() {
        let kind: SeedKind = "w_covered_circle:1/sqrt2,2".parse().unwrap();
        let c = seed_curve(&kind, 256, 2, DiffScheme::Fd4).unwrap();
        assert!(gradient_norm_l2ds(&c, &EnergyParams::default()) <= 1e-6);
    }

    #[test]
    fn perturbed_circle_is_deterministic() {
        let kind: SeedKind = "fourier_perturbed_circle:1,0.05,7,2,3".parse().unwrap();
        let a = seed_curve(&kind, 128, 3, DiffScheme::Fd4).unwrap();
        let b = seed_curve(&kind, 128, 3, DiffScheme::Fd4).unwrap();
        assert_eq!(a.points(), b.points());
        let other: SeedKind = "fourier_perturbed_circle:1,0.05,8,2,3".parse().unwrap();
        let c = seed_curve(&other, 128, 3, DiffScheme::Fd4).unwrap();
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "circle:1",
            "ellipse:1.2,0.8",
            "w_covered_circle:0.5,3",
            "figure_eight:1",
            "fourier_perturbed_circle:1,0.05,7,2,3",
        ] {
            let k: SeedKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("circle".parse::<SeedKind>().is_err());
        assert!("spiral:1".parse::<SeedKind>().is_err());
        assert!("ellipse:1,x".parse::<SeedKind>().is_err());
        assert!(seed_curve(&SeedKind::Circle { r: -1.0 }, 64, 2, DiffScheme::Fd4).is_err());
    }

    #[test]
    fn figure_eight_is_regular_in_plane_and_space() {
        for dim in [2, 3] {
            let c = seed_curve(&SeedKind::FigureEight { scale: 1.0 }, 128, dim, DiffScheme::Fd4).unwrap();
            assert!(c.speed().iter().all(|&s| s > 0.5));
        }
    }
}
