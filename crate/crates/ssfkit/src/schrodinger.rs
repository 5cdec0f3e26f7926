//! 3D Schrodinger engine: Nystrom discretization of the Birman–Schwinger
//! operator T0(z) = C R_0(z) C W, boundary traces, the SSF derivative on the
//! essential spectrum, spectral-singularity scanning, and high-energy
//! asymptotics.

use crate::error::{Result, SsfError};
use faer::c64;

/// Weight factorization V = C W C.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// C = rho with rho == 1 on supp V (compactly supported potentials).
    CompactCutoff,
    /// C(x) = <x>^{-delta/2}, W = <x>^delta V.
    PolynomialWeight,
}

/// Analytic radial potential families.
#[derive(Debug, Clone, Copy)]
pub enum PotentialFamily {
    /// amplitude * exp(-1/(1 - (r/radius)^2)) inside r < radius.
    RadialBump { radius: f64, amplitude: c64 },
    /// amplitude * exp(-(r/sigma)^2) * cos(k r), truncated at the cutoff
    /// radius where the Gaussian window is negligible.
    GaussianOscillation { sigma: f64, wavenumber: f64, amplitude: c64, cutoff: f64 },
}

/// A complex-valued short-range potential on R^3.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    pub weight: WeightKind,
    /// Short-range decay exponent; > 3 is required by the trace pipeline.
    pub delta: f64,
    /// Declared bound |V(x)| <= M <x>^{-delta}.
    pub bound_m: f64,
    /// Precomputed integral of V (filled by `validate`).
    pub integral_v: Option<c64>,
}

impl PotentialSpec {
    pub fn radial_bump(radius: f64, amplitude: c64) -> Self {
        let delta = 4.0;
        PotentialSpec {
            family: PotentialFamily::RadialBump { radius, amplitude },
            weight: WeightKind::CompactCutoff,
            delta,
            bound_m: amplitude.norm() * (1.0 + radius * radius).powf(delta / 2.0),
            integral_v: None,
        }
    }

    pub fn gaussian_oscillation(sigma: f64, wavenumber: f64, amplitude: c64) -> Self {
        let delta = 4.0;
        let cutoff = sigma * 6.5;
        PotentialSpec {
            family: PotentialFamily::GaussianOscillation { sigma, wavenumber, amplitude, cutoff },
            weight: WeightKind::CompactCutoff,
            delta,
            bound_m: amplitude.norm() * (1.0 + cutoff * cutoff).powf(delta / 2.0),
            integral_v: None,
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self.family {
            PotentialFamily::RadialBump { radius, .. } => radius,
            PotentialFamily::GaussianOscillation { cutoff, .. } => cutoff,
        }
    }

    pub fn is_radial(&self) -> bool {
        true
    }

    /// V at radius r.
    pub fn v_radial(&self, r: f64) -> c64 {
        match self.family {
            PotentialFamily::RadialBump { radius, amplitude } => {
                let t = r / radius;
                if t >= 1.0 {
                    c64::new(0.0, 0.0)
                } else {
                    amplitude * (-1.0 / (1.0 - t * t)).exp()
                }
            }
            PotentialFamily::GaussianOscillation { sigma, wavenumber, amplitude, cutoff } => {
                if r >= cutoff {
                    c64::new(0.0, 0.0)
                } else {
                    amplitude * (-(r / sigma) * (r / sigma)).exp() * (wavenumber * r).cos()
                }
            }
        }
    }

    pub fn v(&self, x: [f64; 3]) -> c64 {
        self.v_radial((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
    }

    /// ||V||_inf (analytic families: attained on the radial profile).
    pub fn sup_norm(&self) -> f64 {
        let r_max = self.support_radius();
        let mut m = 0.0f64;
        for i in 0..=2000 {
            let r = r_max * i as f64 / 2000.0;
            m = m.max(self.v_radial(r).norm());
        }
        m
    }

    /// int V dx = 4 pi int_0^R r^2 V(r) dr, adaptive to near machine precision.
    pub fn integral(&self) -> c64 {
        if let Some(v) = self.integral_v {
            return v;
        }
        let r_max = self.support_radius();
        let (re, _) = crate::quad::integrate_adaptive(
            &|r| r * r * self.v_radial(r).re,
            0.0,
            r_max,
            1e-13,
            1 << 12,
        );
        let (im, _) = crate::quad::integrate_adaptive(
            &|r| r * r * self.v_radial(r).im,
            0.0,
            r_max,
            1e-13,
            1 << 12,
        );
        c64::new(re, im) * (4.0 * std::f64::consts::PI)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 3.0) {
            return Err(SsfError::ConfigInvalid {
                msg: format!("short-range exponent delta = {} must exceed 3", self.delta),
            });
        }
        let r = self.support_radius();
        if !(r > 0.0 && r.is_finite()) {
            return Err(SsfError::ConfigInvalid { msg: "invalid support radius".into() });
        }
        // spot-check |V(x)| <= M <x>^{-delta} on samples
        for i in 0..=64 {
            let rr = r * i as f64 / 64.0;
            let bound = self.bound_m * (1.0 + rr * rr).powf(-self.delta / 2.0);
            if self.v_radial(rr).norm() > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(SsfError::ConfigInvalid {
                    msg: format!("potential exceeds declared bound at r = {rr}"),
                });
            }
        }
        Ok(())
    }
}
