//! Operator pairs (H0, V) and their exact resolvent machinery.
//!
//! Three model kinds: dense finite matrices, rank-one perturbations of the
//! multiplication operator h0(x) = x 1_{[0,1]}(x) on L^2(R) (with closed-form
//! scalar reductions), and 3D Schrodinger potentials (handled by the
//! `schrodinger` module through the same handle).
//!
//! Sign conventions used throughout the crate (fixed by the scalar model
//! H0 = lambda0, H = lambda0 + v):
//!   sigma(z)  = Tr(R_H(z) - R_0(z)),
//!   D_V(z)    = Det(I + V R_0(z)),      D_V'(z) / D_V(z) = -sigma(z),
//!   xi(lambda) = (1/2 pi i) lim (ln D_V(lambda + i eps) - ln D_V(lambda - i eps)),
//!   xi'(lambda) = (1/2 pi i) lim (sigma(lambda - i eps) - sigma(lambda + i eps)).

use crate::error::{Result, SsfError};
use crate::linalg::{self, CMat};
use crate::schrodinger::PotentialSpec;
use faer::c64;
use std::sync::Arc;

/// Conditioning threshold: reject z when the solve's estimated condition
/// number exceeds this.
pub const COND_CAP: f64 = 1e12;

/// Tolerance below which an eigenvalue's imaginary part counts as zero.
pub const IM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    FiniteMatrix,
    MultiplicationRankOne,
    Schrodinger3D,
}

/// Profile of the rank-one direction u0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneProfile {
    /// u0 normalized, supported outside [0,1]; H0 u0 = 0.
    DisjointSupport,
    /// u0 = 1_{[0,1]}.
    Indicator01,
}

/// Declarative description of an operator pair (H0, V).
#[derive(Clone)]
pub enum OperatorSpec {
    Finite { h0: CMat, v: CMat },
    RankOne { gamma: c64, profile: RankOneProfile },
    Schrodinger(Arc<PotentialSpec>),
}

impl OperatorSpec {
    pub fn kind(&self) -> OperatorKind {
        match self {
            OperatorSpec::Finite { .. } => OperatorKind::FiniteMatrix,
            OperatorSpec::RankOne { .. } => OperatorKind::MultiplicationRankOne,
            OperatorSpec::Schrodinger(_) => OperatorKind::Schrodinger3D,
        }
    }
}

/// Strip S_a(I) with the polynomial resolvent-growth data of Hypothesis 2.
#[derive(Debug, Clone, Copy)]
pub struct StripRegion {
    pub interval: (f64, f64),
    pub half_height: f64,
    pub growth_exponent: usize,
    pub growth_constant: f64,
}

impl StripRegion {
    pub fn new(interval: (f64, f64), half_height: f64) -> Result<Self> {
        if !(interval.0 < interval.1) || !(half_height > 0.0) {
            return Err(SsfError::ConfigInvalid {
                msg: format!("invalid strip region {interval:?}, a = {half_height}"),
            });
        }
        Ok(StripRegion { interval, half_height, growth_exponent: 0, growth_constant: 1.0 })
    }
}

/// What a resolvent-type sample represents.
#[derive(Debug, Clone)]
pub enum ResolventSample {
    FullResolvent { z: c64, value: CMat },
    TraceDiff { z: c64, value: c64 },
    Determinant { z: c64, value: c64 },
}

/// Dense finite pair with cached spectral data.
pub struct FiniteOperator {
    pub h0: CMat,
    pub v: CMat,
    pub h: CMat,
    /// Eigenvalues of H (general complex).
    pub eig_h: Vec<c64>,
    /// Right eigenvector matrix of H and its condition estimate, when the
    /// eigenbasis is usable as a fast path.
    pub eig_basis: Option<(CMat, CMat)>, // (P, P^{-1})
    pub eig_basis_cond: f64,
    /// Eigenvalues of H0 (real; H0 is Hermitian).
    pub eig_h0: Vec<f64>,
}

impl FiniteOperator {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Non-real eigenvalues of H (at tolerance IM_TOL relative to scale).
    pub fn complex_eigenvalues(&self) -> Vec<c64> {
        let scale = self.spectral_scale().max(1.0);
        self.eig_h.iter().copied().filter(|e| e.im.abs() > IM_TOL * scale).collect()
    }

    pub fn real_eigenvalues_of_h(&self) -> Vec<f64> {
        let scale = self.spectral_scale().max(1.0);
        self.eig_h.iter().filter(|e| e.im.abs() <= IM_TOL * scale).map(|e| e.re).collect()
    }

    pub fn spectral_scale(&self) -> f64 {
        self.eig_h
            .iter()
            .map(|e| e.norm())
            .chain(self.eig_h0.iter().map(|e| e.abs()))
            .fold(0.0f64, f64::max)
    }
}

/// Rank-one model H_gamma = H0 + gamma <., u0> u0.
#[derive(Debug, Clone, Copy)]
pub struct RankOneOperator {
    pub gamma: c64,
    pub profile: RankOneProfile,
}

impl RankOneOperator {
    /// m(z) = <R_0(z) u0, u0>.
    pub fn weighted_resolvent(&self, z: c64) -> Result<c64> {
        match self.profile {
            RankOneProfile::DisjointSupport => {
                if z.norm() == 0.0 {
                    return Err(SsfError::SingularShift { z, cond: f64::INFINITY });
                }
                Ok(-1.0 / z)
            }
            RankOneProfile::Indicator01 => {
                // int_0^1 dx / (x - z) = Log(1 - z) - Log(-z); the integration
                // path stays in one half-plane so principal logs are safe for
                // Im z != 0, and for real z outside [0,1] both logs are real.
                if z.im == 0.0 && (0.0..=1.0).contains(&z.re) {
                    return Err(SsfError::RealAxisEvaluation);
                }
                let one = c64::new(1.0, 0.0);
                Ok((one - z).ln() - (-z).ln())
            }
        }
    }

    fn weighted_resolvent_derivative(&self, z: c64) -> Result<c64> {
        match self.profile {
            RankOneProfile::DisjointSupport => {
                if z.norm() == 0.0 {
                    return Err(SsfError::SingularShift { z, cond: f64::INFINITY });
                }
                Ok(1.0 / (z * z))
            }
            RankOneProfile::Indicator01 => {
                if z.im == 0.0 && (0.0..=1.0).contains(&z.re) {
                    return Err(SsfError::RealAxisEvaluation);
                }
                let one = c64::new(1.0, 0.0);
                Ok(-1.0 / (one - z) - 1.0 / z)
            }
        }
    }

    /// D(z) = 1 + gamma m(z).
    pub fn determinant(&self, z: c64) -> Result<c64> {
        Ok(c64::new(1.0, 0.0) + self.gamma * self.weighted_resolvent(z)?)
    }

    /// sigma(z) = Tr(R_H - R_0) = -D'(z)/D(z) = -gamma m'(z) / (1 + gamma m(z)).
    pub fn sigma(&self, z: c64) -> Result<c64> {
        match self.profile {
            RankOneProfile::DisjointSupport => {
                // Exact rank-one update: R_gamma = R_0 + (1/z + 1/(gamma - z)) Pi_0.
                let g = self.gamma;
                if z.norm() == 0.0 || (g - z).norm() == 0.0 {
                    return Err(SsfError::SingularShift { z, cond: f64::INFINITY });
                }
                Ok(1.0 / z + 1.0 / (g - z))
            }
            RankOneProfile::Indicator01 => {
                let m = self.weighted_resolvent(z)?;
                let mp = self.weighted_resolvent_derivative(z)?;
                let d = c64::new(1.0, 0.0) + self.gamma * m;
                if d.norm() < 1e-300 {
                    return Err(SsfError::SingularShift { z, cond: f64::INFINITY });
                }
                Ok(-self.gamma * mp / d)
            }
        }
    }

    /// Left edge of the real spectrum of the pair (for grid anchoring).
    pub fn spectral_min(&self) -> f64 {
        let mut m = 0.0f64;
        if self.gamma.im == 0.0 {
            m = m.min(self.gamma.re);
        }
        m
    }

    pub fn spectral_max(&self) -> f64 {
        let mut m = 1.0f64;
        if self.gamma.im == 0.0 {
            m = m.max(self.gamma.re);
        }
        m
    }
}

/// Handle over a built operator pair.
#[derive(Clone)]
pub enum OperatorHandle {
    Finite(Arc<FiniteOperator>),
    RankOne(RankOneOperator),
    Schrodinger(Arc<PotentialSpec>),
}

impl OperatorHandle {
    pub fn kind(&self) -> OperatorKind {
        match self {
            OperatorHandle::Finite(_) => OperatorKind::FiniteMatrix,
            OperatorHandle::RankOne(_) => OperatorKind::MultiplicationRankOne,
            OperatorHandle::Schrodinger(_) => OperatorKind::Schrodinger3D,
        }
    }

    pub fn finite(&self) -> Result<&Arc<FiniteOperator>> {
        match self {
            OperatorHandle::Finite(f) => Ok(f),
            _ => Err(SsfError::UnsupportedSpec {
                msg: "operation requires a finite-matrix model".into(),
            }),
        }
    }

    /// Dimension (finite) or discretization label.
    pub fn dim(&self) -> Option<usize> {
        match self {
            OperatorHandle::Finite(f) => Some(f.dim()),
            _ => None,
        }
    }

    /// H applied to a vector (finite models).
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let f = self.finite()?;
        Ok(&f.h * x)
    }

    /// Dense materialization of (H0, V, H).
    pub fn materialize(&self) -> Result<(CMat, CMat, CMat)> {
        let f = self.finite()?;
        Ok((f.h0.clone(), f.v.clone(), f.h.clone()))
    }

    /// Non-real eigenvalues (declared spectral data for admissibility).
    pub fn complex_eigenvalues(&self) -> Vec<c64> {
        match self {
            OperatorHandle::Finite(f) => f.complex_eigenvalues(),
            OperatorHandle::RankOne(r) => {
                let mut out = Vec::new();
                if r.gamma.im != 0.0 && r.profile == RankOneProfile::DisjointSupport {
                    out.push(r.gamma);
                }
                if r.profile == RankOneProfile::Indicator01 {
                    if let Some(zb) = r.interacting_eigenvalue() {
                        out.push(zb);
                    }
                }
                out
            }
            OperatorHandle::Schrodinger(_) => Vec::new(),
        }
    }

    /// Left edge of the union of both real spectra.
    pub fn spectral_min(&self) -> f64 {
        match self {
            OperatorHandle::Finite(f) => f
                .eig_h0
                .iter()
                .copied()
                .chain(f.real_eigenvalues_of_h())
                .fold(f64::INFINITY, f64::min),
            OperatorHandle::RankOne(r) => r.spectral_min(),
            OperatorHandle::Schrodinger(_) => 0.0,
        }
    }

    pub fn spectral_max(&self) -> f64 {
        match self {
            OperatorHandle::Finite(f) => f
                .eig_h0
                .iter()
                .copied()
                .chain(f.real_eigenvalues_of_h())
                .fold(f64::NEG_INFINITY, f64::max),
            OperatorHandle::RankOne(r) => r.spectral_max(),
            OperatorHandle::Schrodinger(_) => f64::INFINITY,
        }
    }

    pub fn spectral_scale(&self) -> f64 {
        match self {
            OperatorHandle::Finite(f) => f.spectral_scale().max(1e-3),
            OperatorHandle::RankOne(r) => r.gamma.norm().max(1.0),
            OperatorHandle::Schrodinger(_) => 1.0,
        }
    }
}

impl RankOneOperator {
    /// The non-real eigenvalue z_beta of the interacting model when it exists
    /// (gamma = i beta with beta > 1/pi; adjoint mirror for beta < 0).
    pub fn interacting_eigenvalue(&self) -> Option<c64> {
        if self.gamma.re != 0.0 {
            return None;
        }
        let beta = self.gamma.im;
        if beta.abs() <= std::f64::consts::FRAC_1_PI {
            return None;
        }
        let half_theta = 0.5 / beta.abs();
        let y = 0.5 * half_theta.cos() / half_theta.sin();
        Some(c64::new(0.5, beta.signum() * y))
    }
}

/// Builds a handle from a spec, validating the invariants:
/// H0 Hermitian (finite), V bounded with finite data.
pub fn build_operator(spec: &OperatorSpec) -> Result<OperatorHandle> {
    match spec {
        OperatorSpec::Finite { h0, v } => {
            let n = h0.nrows();
            if h0.ncols() != n || v.nrows() != n || v.ncols() != n {
                return Err(SsfError::ConfigInvalid { msg: "H0 and V must be square and of equal size".into() });
            }
            let scale = linalg::frob(h0).max(1.0);
            let defect = linalg::hermitian_defect(h0);
            if defect > 1e-10 * scale {
                return Err(SsfError::NonHermitianBase { defect });
            }
            for i in 0..n {
                for j in 0..n {
                    if !v[(i, j)].re.is_finite() || !v[(i, j)].im.is_finite() {
                        return Err(SsfError::UnboundedPerturbation);
                    }
                }
            }
            let h = h0 + v;
            let eig_h = linalg::eigenvalues(&h);
            let mut eig_h0: Vec<f64> = linalg::eigenvalues(h0).iter().map(|e| e.re).collect();
            eig_h0.sort_by(f64::total_cmp);
            let (vals, p) = linalg::eigen_pairs(&h);
            let lu = linalg::Lu::new(&p);
            let pinv = lu.inverse();
            let cond = linalg::op_norm2_est(&p) * linalg::op_norm2_est(&pinv);
            let eig_basis = if cond.is_finite() && cond < 1e8 {
                Some((p, pinv))
            } else {
                None
            };
            // keep eigenvalue order consistent with the basis
            let eig_h = if eig_basis.is_some() { vals } else { eig_h };
            Ok(OperatorHandle::Finite(Arc::new(FiniteOperator {
                h0: h0.clone(),
                v: v.clone(),
                h,
                eig_h,
                eig_basis,
                eig_basis_cond: cond,
                eig_h0,
            })))
        }
        OperatorSpec::RankOne { gamma, profile } => {
            if !gamma.re.is_finite() || !gamma.im.is_finite() {
                return Err(SsfError::UnboundedPerturbation);
            }
            Ok(OperatorHandle::RankOne(RankOneOperator { gamma: *gamma, profile: *profile }))
        }
        OperatorSpec::Schrodinger(pot) => {
            pot.validate()?;
            Ok(OperatorHandle::Schrodinger(pot.clone()))
        }
    }
}

/// R_H(z) for finite models, with conditioning gate.
pub fn resolvent(handle: &OperatorHandle, z: c64) -> Result<CMat> {
    let f = handle.finite()?;
    linalg::resolvent_matrix(&f.h, z, COND_CAP)
}

/// R_{H0}(z) for finite models.
pub fn resolvent_free(handle: &OperatorHandle, z: c64) -> Result<CMat> {
    let f = handle.finite()?;
    linalg::resolvent_matrix(&f.h0, z, COND_CAP)
}

/// sigma(z) = Tr(R_H(z) - R_0(z)).
pub fn trace_resolvent_diff(handle: &OperatorHandle, z: c64) -> Result<c64> {
    match handle {
        OperatorHandle::Finite(f) => {
            let rh = linalg::resolvent_matrix(&f.h, z, COND_CAP)?;
            let r0 = linalg::resolvent_matrix(&f.h0, z, COND_CAP)?;
            Ok(linalg::trace(&rh) - linalg::trace(&r0))
        }
        OperatorHandle::RankOne(r) => r.sigma(z),
        OperatorHandle::Schrodinger(_) => Err(SsfError::UnsupportedSpec {
            msg: "use schrodinger::sigma_boundary for Schrodinger models".into(),
        }),
    }
}

/// Same as `trace_resolvent_diff` but without the conditioning gate; used by
/// quadratures whose integrands are damped near the axis.
pub fn trace_resolvent_diff_raw(handle: &OperatorHandle, z: c64) -> Result<c64> {
    match handle {
        OperatorHandle::Finite(f) => {
            let rh = linalg::resolvent_matrix_raw(&f.h, z);
            let r0 = linalg::resolvent_matrix_raw(&f.h0, z);
            Ok(linalg::trace(&rh) - linalg::trace(&r0))
        }
        _ => trace_resolvent_diff(handle, z),
    }
}

/// Perturbation determinant D_V(z) = Det(I + V R_0(z)).
pub fn perturbation_determinant(handle: &OperatorHandle, z: c64) -> Result<c64> {
    match handle {
        OperatorHandle::Finite(f) => {
            let r0 = linalg::resolvent_matrix(&f.h0, z, COND_CAP)?;
            let m = linalg::cidentity(f.dim()) + &f.v * &r0;
            Ok(linalg::determinant(&m))
        }
        OperatorHandle::RankOne(r) => r.determinant(z),
        OperatorHandle::Schrodinger(_) => Err(SsfError::UnsupportedSpec {
            msg: "perturbation determinant is not discretized for Schrodinger models".into(),
        }),
    }
}
