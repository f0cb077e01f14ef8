use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The extreme value index as a function of location, `t -> gamma_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaCurve {
    Constant {
        value: f64,
    },
    /// `base + amplitude * t^exponent`; Hölder with exponent `exponent` (at most 1).
    Power {
        base: f64,
        amplitude: f64,
        exponent: f64,
    },
    /// `mean + amplitude * sin(2 pi frequency t)`.
    Sine {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Triangle wave: equal to `base` at multiples of `spacing` and dipping to
    /// `base - jump` half way between them.
    Rough {
        base: f64,
        spacing: f64,
        jump: Jump,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Jump {
    Fixed {
        size: f64,
    },
    /// `kappa / log(n/k)`, fixed once the level `n/k` is known.
    PerLevel {
        kappa: f64,
    },
}

impl GammaCurve {
    pub fn constant(value: f64) -> Self {
        GammaCurve::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            GammaCurve::Constant { value } => value,
            GammaCurve::Power {
                base,
                amplitude,
                exponent,
            } => base + amplitude * t.max(0.0).powf(exponent),
            GammaCurve::Sine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            GammaCurve::Rough { base, spacing, jump } => {
                let size = match jump {
                    Jump::Fixed { size } => size,
                    Jump::PerLevel { .. } => panic!("rough gamma curve used before resolving its jump"),
                };
                let x = t / spacing;
                let frac = x - x.floor();
                base - size * (1.0 - (2.0 * frac - 1.0).abs())
            }
        }
    }

    /// Fixes level-dependent parameters for the level `n/k`.
    pub fn resolve(&self, level: f64) -> Self {
        match *self {
            GammaCurve::Rough {
                base,
                spacing,
                jump: Jump::PerLevel { kappa },
            } => GammaCurve::Rough {
                base,
                spacing,
                jump: Jump::Fixed {
                    size: kappa / level.ln(),
                },
            },
            ref other => other.clone(),
        }
    }

    pub fn is_resolved(&self) -> bool {
        !matches!(
            self,
            GammaCurve::Rough {
                jump: Jump::PerLevel { .. },
                ..
            }
        )
    }

    /// `(inf, sup)` of the curve over `[0, 1]`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            GammaCurve::Constant { value } => (value, value),
            GammaCurve::Power { base, amplitude, .. } => (base.min(base + amplitude), base.max(base + amplitude)),
            GammaCurve::Sine {
                mean,
                amplitude,
                frequency,
            } => {
                // a full half-period fits in [0, 1] once frequency >= 0.5
                if frequency.abs() >= 0.5 {
                    (mean - amplitude.abs(), mean + amplitude.abs())
                } else {
                    let pts = (0..=1000).map(|i| self.value(i as f64 / 1000.0));
                    pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                }
            }
            GammaCurve::Rough { base, jump, .. } => {
                let size = match jump {
                    Jump::Fixed { size } => size,
                    Jump::PerLevel { .. } => 0.0,
                };
                (base.min(base - size), base.max(base - size))
            }
        }
    }

    /// Hölder exponent and constant `(alpha_2, C_2)` with `|g_s - g_t| <= C_2 |s - t|^alpha_2`.
    pub fn holder(&self) -> (f64, f64) {
        match *self {
            GammaCurve::Constant { .. } => (1.0, 0.0),
            GammaCurve::Power {
                amplitude, exponent, ..
            } => (exponent.min(1.0), amplitude.abs()),
            GammaCurve::Sine {
                amplitude, frequency, ..
            } => (1.0, 2.0 * std::f64::consts::PI * frequency.abs() * amplitude.abs()),
            GammaCurve::Rough { spacing, jump, .. } => {
                let size = match jump {
                    Jump::Fixed { size } => size,
                    Jump::PerLevel { .. } => 0.0,
                };
                (1.0, 2.0 * size.abs() / spacing)
            }
        }
    }

    pub(crate) fn validate_positive(&self) -> Result<()> {
        if !self.is_resolved() {
            return Err(Error::Model(
                "rough gamma curve with a per-level jump must be resolved for a level n/k first".into(),
            ));
        }
        match *self {
            GammaCurve::Power { exponent, .. } if !(exponent > 0.0) => {
                return Err(Error::Model(format!("power exponent {exponent} must be positive")))
            }
            GammaCurve::Rough { spacing, .. } if !(spacing > 0.0) => {
                return Err(Error::Model(format!("rough spacing {spacing} must be positive")))
            }
            _ => {}
        }
        let (lo, hi) = self.range();
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::Model(format!(
                "gamma curve must be positive and finite on [0, 1] (range [{lo}, {hi}])"
            )));
        }
        Ok(())
    }
}

/// Parses `const:G`, `power:BASE,AMP,EXP`, `sine:MEAN,AMP,FREQ`,
/// `rough:BASE,JUMP,SPACING` and `rough-kappa:BASE,KAPPA,SPACING`.
impl std::str::FromStr for GammaCurve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("gamma spec `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let want = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("gamma spec `{s}` expects {n} numbers")))
            }
        };
        match kind {
            "const" | "constant" => {
                want(1)?;
                Ok(GammaCurve::Constant { value: nums[0] })
            }
            "power" => {
                want(3)?;
                Ok(GammaCurve::Power {
                    base: nums[0],
                    amplitude: nums[1],
                    exponent: nums[2],
                })
            }
            "sine" => {
                want(3)?;
                Ok(GammaCurve::Sine {
                    mean: nums[0],
                    amplitude: nums[1],
                    frequency: nums[2],
                })
            }
            "rough" => {
                want(3)?;
                Ok(GammaCurve::Rough {
                    base: nums[0],
                    spacing: nums[2],
                    jump: Jump::Fixed { size: nums[1] },
                })
            }
            "rough-kappa" => {
                want(3)?;
                Ok(GammaCurve::Rough {
                    base: nums[0],
                    spacing: nums[2],
                    jump: Jump::PerLevel { kappa: nums[1] },
                })
            }
            other => Err(Error::Parse(format!("unknown gamma curve kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rough_curve_shape() {
        let g = GammaCurve::Rough {
            base: 0.5,
            spacing: 0.1,
            jump: Jump::Fixed { size: 0.2 },
        };
        assert!((g.value(0.0) - 0.5).abs() < 1e-12);
        assert!((g.value(0.3) - 0.5).abs() < 1e-12);
        assert!((g.value(0.35) - 0.3).abs() < 1e-12);
        assert!((g.value(0.325) - 0.4).abs() < 1e-12);
        assert_eq!(g.range(), (0.3, 0.5));
    }

    #[test]
    fn per_level_jump_resolves() {
        let g: GammaCurve = "rough-kappa:0.5,0.1,0.1".parse().unwrap();
        assert!(!g.is_resolved());
        assert!(g.validate_positive().is_err());
        let r = g.resolve(100.0);
        assert!(r.is_resolved());
        assert!((r.value(0.05) - (0.5 - 0.1 / 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn parse_specs() {
        assert_eq!("const:0.5".parse::<GammaCurve>().unwrap(), GammaCurve::constant(0.5));
        let p: GammaCurve = "power:0.2,0.4,1".parse().unwrap();
        assert!((p.value(1.0) - 0.6).abs() < 1e-12);
        assert!("power:0.2".parse::<GammaCurve>().is_err());
        assert!("wiggle:1".parse::<GammaCurve>().is_err());
    }

    #[test]
    fn positivity_checked() {
        assert!(GammaCurve::constant(-0.1).validate_positive().is_err());
        assert!("sine:0.3,0.4,1"
            .parse::<GammaCurve>()
            .unwrap()
            .validate_positive()
            .is_err());
        assert!("sine:0.5,0.1,1"
            .parse::<GammaCurve>()
            .unwrap()
            .validate_positive()
            .is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let g: GammaCurve = "rough-kappa:0.5,3,0.1".parse().unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<GammaCurve>(&s).unwrap(), g);
    }
}
