//! JSON run configuration. Every field is optional; missing fields take the
//! defaults listed in `--help`.

use std::f64::consts::PI;
use std::io::Read;

use serde::Deserialize;

use crate::CliError;

/// An angle given in radians or as a fraction of π (`"pi/3"`, `"3pi/4"`,
/// `"2*pi/5"`).
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64, CliError> {
        match self {
            Angle::Radians(x) => Ok(*x),
            Angle::Text(s) => parse_angle(s),
        }
    }
}

pub fn parse_angle(text: &str) -> Result<f64, CliError> {
    let s: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let bad = || CliError::Config(format!("cannot read angle '{text}'; use radians or a form like 'pi/3'"));
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let num = s[..pos].trim_end_matches('*');
    let factor = if num.is_empty() {
        1.0
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let rest = &s[pos + 2..];
    let denom = if rest.is_empty() {
        1.0
    } else {
        rest.strip_prefix('/')
            .ok_or_else(bad)?
            .parse::<f64>()
            .map_err(|_| bad())?
    };
    if denom == 0.0 {
        return Err(bad());
    }
    Ok(factor * PI / denom)
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "GridConfig::default_r_min")]
    pub r_min: f64,
    #[serde(default = "GridConfig::default_r_max")]
    pub r_max: f64,
    #[serde(default = "GridConfig::default_n_r")]
    pub n_r: usize,
    #[serde(default = "GridConfig::default_n_theta")]
    pub n_theta: usize,
}

impl GridConfig {
    fn default_r_min() -> f64 {
        2.0
    }
    fn default_r_max() -> f64 {
        200.0
    }
    fn default_n_r() -> usize {
        512
    }
    fn default_n_theta() -> usize {
        64
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_min: Self::default_r_min(),
            r_max: Self::default_r_max(),
            n_r: Self::default_n_r(),
            n_theta: Self::default_n_theta(),
        }
    }
}

/// Poisson source `amp · r^{−power} (ln r)^{log_power} cos(harmonic·θ)`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default = "SourceConfig::default_power")]
    pub power: f64,
    #[serde(default)]
    pub log_power: f64,
    #[serde(default)]
    pub harmonic: u32,
    #[serde(default = "SourceConfig::default_amp")]
    pub amp: f64,
}

impl SourceConfig {
    fn default_power() -> f64 {
        3.0
    }
    fn default_amp() -> f64 {
        1.0
    }
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            power: Self::default_power(),
            log_power: 0.0,
            harmonic: 0,
            amp: Self::default_amp(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    #[serde(default = "RhsConfig::default_amp")]
    pub amp: f64,
    #[serde(default = "RhsConfig::default_zeta")]
    pub zeta: f64,
}

impl RhsConfig {
    fn default_amp() -> f64 {
        0.2
    }
    fn default_zeta() -> f64 {
        2.5
    }
}

impl Default for RhsConfig {
    fn default() -> Self {
        Self {
            amp: Self::default_amp(),
            zeta: Self::default_zeta(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    #[serde(default = "RadialConfig::default_r0")]
    pub r0: f64,
    /// `u(r0)`; defaults to the calibrated quadratic.
    pub u0: Option<f64>,
    /// `u′(r0)`; defaults to the calibrated quadratic plus `slope_shift`.
    pub du0: Option<f64>,
    #[serde(default)]
    pub slope_shift: f64,
    #[serde(default = "RadialConfig::default_r_max")]
    pub r_max: f64,
    #[serde(default = "RadialConfig::default_n_steps")]
    pub n_steps: usize,
}

impl RadialConfig {
    fn default_r0() -> f64 {
        1.0
    }
    fn default_r_max() -> f64 {
        1e5
    }
    fn default_n_steps() -> usize {
        20_000
    }
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            r0: Self::default_r0(),
            u0: None,
            du0: None,
            slope_shift: 0.0,
            r_max: Self::default_r_max(),
            n_steps: Self::default_n_steps(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// `[A11, A12, A22]`.
    #[serde(rename = "A", default = "CoefficientConfig::default_a")]
    pub a: [f64; 3],
    #[serde(default)]
    pub b: [f64; 2],
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub d1: f64,
    #[serde(default)]
    pub d2: f64,
}

impl CoefficientConfig {
    fn default_a() -> [f64; 3] {
        [1.0, 0.0, 1.0]
    }
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            a: Self::default_a(),
            b: [0.0; 2],
            c: 0.0,
            d: 0.0,
            d1: 0.0,
            d2: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "RunConfig::default_tau")]
    pub tau: Angle,
    /// Defaults to `F_τ(λ(A))` for the configured coefficient matrix.
    pub f_inf: Option<f64>,
    /// Fixed first eigenvalue for `calibrate`; isotropic when absent.
    pub lam1: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub rhs: RhsConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    /// Fit window `[r_lo, r_hi]`; defaults to the outer two decades of the data.
    pub window: Option<[f64; 2]>,
    /// Input CSV for `extract` (field `r,theta,value` or profile `r,u,du,ddu`).
    pub input: Option<String>,
    /// Output path; `--out` takes precedence.
    pub output: Option<String>,
    /// manufacture: also write the exact expansion samples of `u` here.
    pub samples: Option<String>,
    pub seed: Option<u64>,
}

impl RunConfig {
    fn default_tau() -> Angle {
        Angle::Text("pi/2".into())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// Reads the config from a path, from standard input for `-`, or returns the
/// defaults when no path is given.
pub fn load(path: Option<&str>) -> Result<RunConfig, CliError> {
    let text = match path {
        None => return Ok(RunConfig::default()),
        Some("-") => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read '{p}': {e}")))?,
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}
