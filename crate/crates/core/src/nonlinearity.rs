//! Catalog of amplitude-dependent nonlinearities `kappa` and their reduced odd
//! form `kbar(z) = kappa(sqrt((1+z)/2)) - kappa(sqrt((1-z)/2))`, which is all
//! that matters for the dynamics of a single qubit.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::interp::MonotoneCubic;

/// Distance kept from the poles `z = ±1` when evaluating the logarithmic
/// reduction, where `kappa(0) = -inf`.
pub const LOG_POLE_MARGIN: f64 = 1e-12;

/// Boundary between the two branches of a [`CustomProfile::Branches`] kappa.
pub const BRANCH_POINT: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug, PartialEq)]
pub enum CustomProfile {
    /// kappa sampled on `[0, 1]`, read e.g. from a two-column CSV.
    Table {
        source: Option<String>,
        samples: MonotoneCubic,
    },
    /// kappa(x) = mu(x) on `[0, 1/sqrt 2]`, nu(sqrt(1 - x^2)) above.
    Branches {
        mu: MonotoneCubic,
        nu: MonotoneCubic,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    /// kappa(x) = g x^2
    GrossPitaevskii,
    /// kappa(x) = g ln(x^2)
    Logarithmic,
    /// kappa(x) = 0 below 1/sqrt 2, g sqrt(2x^2 - 1) above; kbar(z) = g sgn(z) sqrt|z|
    SquareRootSign,
    /// kappa(x) = g (x^2 - x^4); kbar vanishes identically
    QuarticDifference,
    PiecewiseCustom(Arc<CustomProfile>),
    /// kappa = 0, linear quantum mechanics
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    kind: Kind,
    g: f64,
}

fn check_strength(g: f64) -> Result<f64> {
    if g.is_finite() && g > 0.0 {
        Ok(g)
    } else {
        Err(invalid(
            "g",
            format!("strength must be positive and finite, got {g}"),
        ))
    }
}

impl Nonlinearity {
    pub fn gross_pitaevskii(g: f64) -> Result<Self> {
        Ok(Self {
            kind: Kind::GrossPitaevskii,
            g: check_strength(g)?,
        })
    }

    pub fn logarithmic(g: f64) -> Result<Self> {
        Ok(Self {
            kind: Kind::Logarithmic,
            g: check_strength(g)?,
        })
    }

    pub fn square_root_sign(g: f64) -> Result<Self> {
        Ok(Self {
            kind: Kind::SquareRootSign,
            g: check_strength(g)?,
        })
    }

    pub fn quartic_difference(g: f64) -> Result<Self> {
        Ok(Self {
            kind: Kind::QuarticDifference,
            g: check_strength(g)?,
        })
    }

    pub fn linear() -> Self {
        Self {
            kind: Kind::Linear,
            g: 0.0,
        }
    }

    /// kappa interpolated from samples covering `[0, 1]`.
    pub fn from_table(samples: MonotoneCubic, source: Option<String>) -> Result<Self> {
        let (lo, hi) = samples.domain();
        if lo.abs() > 1e-12 || (hi - 1.0).abs() > 1e-12 {
            return Err(Error::BadSamples(format!(
                "kappa table must span [0, 1], got [{lo}, {hi}]"
            )));
        }
        let g = samples.ys().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            kind: Kind::PiecewiseCustom(Arc::new(CustomProfile::Table { source, samples })),
            g,
        })
    }

    /// Load a two-column `x,kappa` CSV. A non-numeric first line is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let parsed = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some((x, y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                None if xs.is_empty() && lineno == 0 => continue,
                None => {
                    return Err(Error::BadSamples(format!(
                        "{}:{}: expected two numeric columns",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_table(
            MonotoneCubic::new(xs, ys)?,
            Some(path.display().to_string()),
        )
    }

    /// Build kappa from two branch functions sampled on `[0, 1/sqrt 2]`.
    ///
    /// For `z in (0, 1]` the reduction is `nu(sqrt((1-z)/2)) - mu(sqrt((1-z)/2))`,
    /// so any odd kbar can be produced this way.
    pub fn build_from_mu_nu(mu: MonotoneCubic, nu: MonotoneCubic) -> Result<Self> {
        for (name, f) in [("mu", &mu), ("nu", &nu)] {
            let (lo, hi) = f.domain();
            if lo.abs() > 1e-12 || (hi - BRANCH_POINT).abs() > 1e-12 {
                return Err(Error::BadSamples(format!(
                    "{name} must be sampled on [0, 1/sqrt(2)], got [{lo}, {hi}]"
                )));
            }
        }
        let g = mu
            .ys()
            .iter()
            .chain(nu.ys())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            kind: Kind::PiecewiseCustom(Arc::new(CustomProfile::Branches { mu, nu })),
            g,
        })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Strength parameter. For custom profiles this is the largest sampled |kappa|.
    pub fn strength(&self) -> f64 {
        self.g
    }

    /// kappa as a function of the squared amplitude `p = x^2`.
    pub fn kappa_sq(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let g = self.g;
        match &self.kind {
            Kind::GrossPitaevskii => g * p,
            Kind::Logarithmic => g * p.ln(),
            Kind::SquareRootSign => {
                if p <= 0.5 {
                    0.0
                } else {
                    g * (2.0 * p - 1.0).sqrt()
                }
            }
            Kind::QuarticDifference => g * (p - p * p),
            Kind::Linear => 0.0,
            Kind::PiecewiseCustom(profile) => match profile.as_ref() {
                CustomProfile::Table { samples, .. } => samples.eval(p.sqrt()),
                CustomProfile::Branches { mu, nu } => {
                    if p <= 0.5 {
                        mu.eval(p.sqrt())
                    } else {
                        nu.eval((1.0 - p).sqrt())
                    }
                }
            },
        }
    }

    /// kappa(x) for an amplitude modulus `x in [0, 1]`.
    pub fn kappa(&self, x: f64) -> f64 {
        self.kappa_sq(x * x)
    }

    pub fn reduce(&self) -> ReducedNonlinearity {
        ReducedNonlinearity::from_kappa(self.clone())
    }

    /// Largest |kappa| over `samples + 1` evenly spaced amplitudes in `[0, 1]`.
    pub fn sup_abs_kappa(&self, samples: usize) -> f64 {
        let n = samples.max(1);
        (0..=n)
            .map(|i| self.kappa(i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, Kind::Linear)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::GrossPitaevskii => write!(f, "gp:{}", self.g),
            Kind::Logarithmic => write!(f, "log:{}", self.g),
            Kind::SquareRootSign if self.g == 1.0 => write!(f, "sqrt"),
            Kind::SquareRootSign => write!(f, "sqrt:{}", self.g),
            Kind::QuarticDifference if self.g == 1.0 => write!(f, "quartic"),
            Kind::QuarticDifference => write!(f, "quartic:{}", self.g),
            Kind::Linear => write!(f, "linear"),
            Kind::PiecewiseCustom(p) => match p.as_ref() {
                CustomProfile::Table {
                    source: Some(s), ..
                } => write!(f, "custom:{s}"),
                _ => write!(f, "custom"),
            },
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let strength = |default: Option<f64>| -> Result<f64> {
            match (arg, default) {
                (Some(a), _) => a
                    .parse::<f64>()
                    .map_err(|_| Error::UnknownNonlinearity(s.to_string())),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::UnknownNonlinearity(s.to_string())),
            }
        };
        match name.to_ascii_lowercase().as_str() {
            "gp" | "gross-pitaevskii" => Self::gross_pitaevskii(strength(None)?),
            "log" | "logarithmic" => Self::logarithmic(strength(None)?),
            "sqrt" => Self::square_root_sign(strength(Some(1.0))?),
            "quartic" => Self::quartic_difference(strength(Some(1.0))?),
            "linear" | "none" if arg.is_none() => Ok(Self::linear()),
            "custom" => match arg {
                Some(path) if !path.is_empty() => Self::from_csv(Path::new(path)),
                _ => Err(Error::UnknownNonlinearity(s.to_string())),
            },
            _ => Err(Error::UnknownNonlinearity(s.to_string())),
        }
    }
}

type OddFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Reduced {
    FromKappa(Nonlinearity),
    Synthetic {
        name: String,
        f: OddFn,
        odd_extend: bool,
    },
}

/// The odd function kbar on `[-1, 1]` governing the qubit flow.
#[derive(Clone)]
pub struct ReducedNonlinearity {
    inner: Reduced,
}

impl fmt::Debug for ReducedNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReducedNonlinearity({})", self.name())
    }
}

impl ReducedNonlinearity {
    pub fn from_kappa(n: Nonlinearity) -> Self {
        Self {
            inner: Reduced::FromKappa(n),
        }
    }

    /// kbar defined directly by its restriction `f` to `[0, 1]` and extended as an
    /// odd function.
    pub fn odd_extension(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            inner: Reduced::Synthetic {
                name: name.into(),
                f: Arc::new(f),
                odd_extend: true,
            },
        }
    }

    /// A function on `[-1, 1]` taken as-is, without enforcing oddness. Used to
    /// exercise the parity checks.
    pub fn unchecked(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            inner: Reduced::Synthetic {
                name: name.into(),
                f: Arc::new(f),
                odd_extend: false,
            },
        }
    }

    pub fn zero() -> Self {
        Self::from_kappa(Nonlinearity::linear())
    }

    pub fn source(&self) -> Option<&Nonlinearity> {
        match &self.inner {
            Reduced::FromKappa(n) => Some(n),
            Reduced::Synthetic { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.inner {
            Reduced::FromKappa(n) => n.to_string(),
            Reduced::Synthetic { name, .. } => name.clone(),
        }
    }

    /// Interval on which kbar is evaluated; narrower than `[-1, 1]` only for the
    /// logarithmic nonlinearity.
    pub fn domain(&self) -> (f64, f64) {
        match self.source().map(Nonlinearity::kind) {
            Some(Kind::Logarithmic) => (-1.0 + LOG_POLE_MARGIN, 1.0 - LOG_POLE_MARGIN),
            _ => (-1.0, 1.0),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match &self.inner {
            Reduced::FromKappa(n) => match n.kind() {
                Kind::GrossPitaevskii => n.g * z.clamp(-1.0, 1.0),
                Kind::Linear => 0.0,
                _ => self.eval_generic(z),
            },
            Reduced::Synthetic { f, odd_extend, .. } => {
                let z = z.clamp(-1.0, 1.0);
                if !odd_extend || z > 0.0 {
                    f(z)
                } else if z < 0.0 {
                    -f(-z)
                } else {
                    0.0
                }
            }
        }
    }

    /// The defining difference of kappa values, without any closed-form shortcut.
    pub fn eval_generic(&self, z: f64) -> f64 {
        match &self.inner {
            Reduced::FromKappa(n) => {
                let (lo, hi) = self.domain();
                let z = z.clamp(lo, hi);
                n.kappa_sq((1.0 + z) / 2.0) - n.kappa_sq((1.0 - z) / 2.0)
            }
            Reduced::Synthetic { .. } => self.eval(z),
        }
    }
}
