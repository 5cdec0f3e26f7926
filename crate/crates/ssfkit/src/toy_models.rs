//! Closed-form reference models: diagonal and Jordan finite pairs, and the
//! two rank-one perturbations of multiplication by x 1_{[0,1]}(x). These are
//! the ground-truth oracles for every pipeline.

use crate::error::{Result, SsfError};
use crate::operators::{OperatorSpec, RankOneProfile};
use faer::c64;
use faer::Mat;
use std::f64::consts::{FRAC_1_PI, PI};

/// A right-continuous step function sum_j delta_j 1_{[x_j, +inf)}.
#[derive(Debug, Clone, Default)]
pub struct StepFunction {
    /// (location, jump) pairs; evaluation sums jumps with location <= x.
    pub jumps: Vec<(f64, c64)>,
}

impl StepFunction {
    pub fn eval(&self, x: f64) -> c64 {
        let mut s = c64::new(0.0, 0.0);
        for &(loc, delta) in &self.jumps {
            if loc <= x {
                s += delta;
            }
        }
        s
    }

    /// Distance from x to the nearest jump location.
    pub fn distance_to_jump(&self, x: f64) -> f64 {
        self.jumps.iter().map(|(loc, _)| (x - loc).abs()).fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, loc: f64, delta: c64) {
        self.jumps.push((loc, delta));
    }
}

/// Rank-one toy description (gamma, or gamma = i beta).
#[derive(Debug, Clone, Copy)]
pub struct RankOneToy {
    pub gamma: c64,
    pub profile: RankOneProfile,
}

impl RankOneToy {
    pub fn disjoint(gamma: c64) -> Self {
        RankOneToy { gamma, profile: RankOneProfile::DisjointSupport }
    }

    pub fn interacting(beta: f64) -> Self {
        RankOneToy { gamma: c64::new(0.0, beta), profile: RankOneProfile::Indicator01 }
    }

    pub fn spec(&self) -> OperatorSpec {
        OperatorSpec::RankOne { gamma: self.gamma, profile: self.profile }
    }
}

/// Finite toy specs accepted by `finite_ssf_closed_form`.
#[derive(Debug, Clone)]
pub enum FiniteToy {
    /// H0 = diag(lambdas), V = diag(vs) (vs may be complex).
    Diagonal { lambdas: Vec<f64>, vs: Vec<c64> },
    /// H0 = lambda I_2, V = [[0, v], [0, 0]].
    Jordan { lambda: f64, v: f64 },
}

impl FiniteToy {
    pub fn spec(&self) -> OperatorSpec {
        match self {
            FiniteToy::Diagonal { lambdas, vs } => {
                let n = lambdas.len();
                let h0 = Mat::from_fn(n, n, |i, j| {
                    if i == j { c64::new(lambdas[i], 0.0) } else { c64::new(0.0, 0.0) }
                });
                let v = Mat::from_fn(n, n, |i, j| if i == j { vs[i] } else { c64::new(0.0, 0.0) });
                OperatorSpec::Finite { h0, v }
            }
            FiniteToy::Jordan { lambda, v } => {
                let h0 = Mat::from_fn(2, 2, |i, j| {
                    if i == j { c64::new(*lambda, 0.0) } else { c64::new(0.0, 0.0) }
                });
                let vm = Mat::from_fn(2, 2, |i, j| {
                    if i == 0 && j == 1 { c64::new(*v, 0.0) } else { c64::new(0.0, 0.0) }
                });
                OperatorSpec::Finite { h0, v: vm }
            }
        }
    }
}

/// Exact SSF step function for the finite toys: per diagonal entry,
/// real v > 0 contributes 1_{[lam, lam+v]}, real v < 0 contributes
/// -1_{[lam+v, lam]}, non-real v contributes 1_{[lam, +inf)}; the Jordan
/// pair is identically zero.
pub fn finite_ssf_closed_form(toy: &FiniteToy) -> Result<StepFunction> {
    let one = c64::new(1.0, 0.0);
    match toy {
        FiniteToy::Diagonal { lambdas, vs } => {
            if lambdas.len() != vs.len() {
                return Err(SsfError::UnsupportedSpec { msg: "length mismatch".into() });
            }
            let mut step = StepFunction::default();
            for (&lam, &v) in lambdas.iter().zip(vs) {
                if v.im != 0.0 {
                    step.push(lam, one);
                } else if v.re > 0.0 {
                    step.push(lam, one);
                    step.push(lam + v.re, -one);
                } else if v.re < 0.0 {
                    step.push(lam + v.re, -one);
                    step.push(lam, one);
                }
            }
            step.jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(step)
        }
        FiniteToy::Jordan { .. } => Ok(StepFunction::default()),
    }
}

/// SSF of the disjoint-support rank-one model:
/// 1_{[0,gamma]} (gamma > 0), -1_{[gamma,0]} (gamma < 0), 1_{[0,inf)} otherwise.
pub fn disjoint_rank_one_ssf(gamma: c64) -> StepFunction {
    let one = c64::new(1.0, 0.0);
    let mut step = StepFunction::default();
    if gamma.im != 0.0 {
        step.push(0.0, one);
    } else if gamma.re > 0.0 {
        step.push(0.0, one);
        step.push(gamma.re, -one);
    } else if gamma.re < 0.0 {
        step.push(gamma.re, -one);
        step.push(0.0, one);
    }
    step
}

/// Exact perturbation determinant of the interacting model (gamma = i beta):
/// D(z) = 1 - beta (arctan((1-x)/y) + arctan(x/y))
///          + i (beta/2) ln(((1-x)^2 + y^2) / (x^2 + y^2)).
pub fn interacting_determinant(beta: f64, z: c64) -> Result<c64> {
    if z.im == 0.0 && (0.0..=1.0).contains(&z.re) {
        return Err(SsfError::RealAxisEvaluation);
    }
    let one = c64::new(1.0, 0.0);
    Ok(one + c64::new(0.0, beta) * ((one - z).ln() - (-z).ln()))
}

/// Zero of D off the real axis, which exists iff |beta| > 1/pi. Solving
/// D(z) = 0 directly (|1 - z| = |z| and arctan(1/(2y)) = 1/(2 beta)) puts it
/// at z_beta = (1 + i cot(1/(2 beta)))/2.
pub fn interacting_eigenvalue(beta: f64) -> Option<c64> {
    if beta.abs() <= FRAC_1_PI {
        return None;
    }
    let half_theta = 0.5 / beta.abs();
    let y = 0.5 * half_theta.cos() / half_theta.sin();
    Some(c64::new(0.5, beta.signum() * y))
}

/// f(lambda) = ln(1/lambda - 1), decreasing from (0,1) onto R.
pub fn interacting_profile(lambda: f64) -> f64 {
    (1.0 / lambda - 1.0).ln()
}

/// G_beta(X) = (1/4pi) ln(1 + 4 beta pi / ((1 - beta pi)^2 + beta^2 X^2)), even.
pub fn g_beta(beta: f64, x: f64) -> f64 {
    (1.0 + 4.0 * beta * PI / ((1.0 - beta * PI).powi(2) + beta * beta * x * x)).ln() / (4.0 * PI)
}

/// F_beta(X) = (1/2pi)(arctan(beta X/(1-beta pi)) - arctan(beta X/(1+beta pi))), odd.
pub fn f_beta(beta: f64, x: f64) -> f64 {
    ((beta * x / (1.0 - beta * PI)).atan() - (beta * x / (1.0 + beta * PI)).atan()) / (2.0 * PI)
}

/// Limit F at beta = 1/pi: +-(1/2pi)(pi/2 -+ arctan(X/2pi)) for X >< 0.
pub fn f_beta_critical(x: f64) -> f64 {
    if x > 0.0 {
        (PI / 2.0 - (x / (2.0 * PI)).atan()) / (2.0 * PI)
    } else {
        -(PI / 2.0 + (x / (2.0 * PI)).atan()) / (2.0 * PI)
    }
}

/// Closed-form SSF of the interacting model on the lambda axis, beta > 0:
///   beta < 1/pi: (F_beta + i G_beta)(f(lambda)) on (0,1), 0 outside [0,1];
///   beta > 1/pi: (1/2 + F_beta + i G_beta)(f(lambda)) on (0,1), 1 for lambda > 1;
///   beta = 1/pi: F_{1/pi}(f(lambda)) + i G_{1/pi}(f(lambda)), lambda != 1/2.
/// Negative beta mirrors by complex conjugation (adjoint pair).
pub fn interacting_ssf_closed_form(beta: f64, lambda: f64) -> Result<c64> {
    if beta < 0.0 {
        return Ok(interacting_ssf_closed_form(-beta, lambda)?.conj());
    }
    let critical = (beta - FRAC_1_PI).abs() < 1e-14;
    if critical && (lambda - 0.5).abs() < 1e-14 {
        return Err(SsfError::OnSingularity);
    }
    if !(0.0..=1.0).contains(&lambda) || lambda == 0.0 || lambda == 1.0 {
        // outside the essential spectrum; the extra unit step persists for
        // beta > 1/pi once the non-real eigenvalue exists
        if beta > FRAC_1_PI && lambda > 1.0 {
            return Ok(c64::new(1.0, 0.0));
        }
        return Ok(c64::new(0.0, 0.0));
    }
    let x = interacting_profile(lambda);
    if critical {
        return Ok(c64::new(f_beta_critical(x), g_beta(beta, x)));
    }
    let base = if beta > FRAC_1_PI { 0.5 } else { 0.0 };
    Ok(c64::new(base + f_beta(beta, x), g_beta(beta, x)))
}
