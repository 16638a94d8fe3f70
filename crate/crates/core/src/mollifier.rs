//! Compactly supported interaction kernel `phi_sigma`.
//!
//! `phi` is even, equal to 1 on the plateau `[0, a]`, equal to 0 on
//! `[sigma/2, inf)`, and decreases through a transition band in between. The
//! zero outside the support is produced by a branch, never by evaluating the
//! profile, so sparse kernel sums can skip those entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the decreasing transition on the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `1/(1 + exp(1/t - 1/(1-t)))`: infinitely differentiable, all
    /// derivatives vanish at both ends of the band.
    #[default]
    Smooth,
    /// Quintic smoothstep `6t^5 - 15t^4 + 10t^3`, C2 at the band ends.
    Quintic,
}

impl Profile {
    /// Rising profile `s: [0,1] -> [0,1]`.
    #[inline]
    pub fn rise(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            Profile::Smooth => 1.0 / (1.0 + (1.0 / t - 1.0 / (1.0 - t)).exp()),
            Profile::Quintic => t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        }
    }

    #[inline]
    pub fn rise_slope(self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Smooth => {
                let s = self.rise(t);
                let u = 1.0 - t;
                s * (1.0 - s) * (1.0 / (t * t) + 1.0 / (u * u))
            }
            Profile::Quintic => {
                let u = 1.0 - t;
                30.0 * t * t * u * u
            }
        }
    }

    /// `sup |s'|`, attained at `t = 1/2` for both profiles.
    pub fn max_slope(self) -> f64 {
        match self {
            Profile::Smooth => 2.0,
            Profile::Quintic => 1.875,
        }
    }
}

/// Where the plateau ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlateauRule {
    /// Plateau `[0, (sigma - eta)/2]`.
    #[default]
    Eta,
    /// Plateau `[0, sigma/3]`; `eta` is then only used for validation.
    ThirdOfSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierParams {
    pub sigma: f64,
    pub eta: f64,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub plateau: PlateauRule,
}

impl MollifierParams {
    /// Kernel of range `sigma` with the default transition width `eta = sigma/4`.
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_eta(sigma, sigma / 4.0)
    }

    pub fn with_eta(sigma: f64, eta: f64) -> Result<Self> {
        let p = MollifierParams { sigma, eta, profile: Profile::default(), plateau: PlateauRule::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_plateau(mut self, plateau: PlateauRule) -> Self {
        self.plateau = plateau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.eta > 0.0 && self.eta < self.sigma / 3.0) {
            return Err(Error::Config(format!(
                "eta must satisfy 0 < eta < sigma/3, got eta={} sigma={}",
                self.eta, self.sigma
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn plateau_edge(&self) -> f64 {
        match self.plateau {
            PlateauRule::Eta => 0.5 * (self.sigma - self.eta),
            PlateauRule::ThirdOfSigma => self.sigma / 3.0,
        }
    }

    #[inline]
    pub fn support_edge(&self) -> f64 {
        0.5 * self.sigma
    }

    #[inline]
    fn band_width(&self) -> f64 {
        self.support_edge() - self.plateau_edge()
    }

    /// `phi_sigma(x)`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        let lo = self.plateau_edge();
        if a <= lo {
            return 1.0;
        }
        if a >= self.support_edge() {
            return 0.0;
        }
        1.0 - self.profile.rise((a - lo) / self.band_width())
    }

    /// `phi_sigma(x)^2`.
    #[inline]
    pub fn eval_sq(&self, x: f64) -> f64 {
        let v = self.eval(x);
        v * v
    }

    /// Analytic derivative `phi_sigma'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let a = x.abs();
        let lo = self.plateau_edge();
        if a <= lo || a >= self.support_edge() {
            return 0.0;
        }
        let w = self.band_width();
        -x.signum() * self.profile.rise_slope((a - lo) / w) / w
    }

    /// Upper bounds `(Lip(phi), Lip(phi^2))`.
    ///
    /// `Lip(phi) = sup|s'| / band_width`; `|(phi^2)'| = 2|phi||phi'| <= 2 Lip(phi)`.
    pub fn lipschitz_bounds(&self) -> (f64, f64) {
        let l = self.profile.max_slope() / self.band_width();
        (l, 2.0 * l)
    }
}
