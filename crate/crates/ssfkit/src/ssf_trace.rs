//! The SSF pipelines for trace-class perturbations: distributional trace
//! pairing, resolvent boundary values, phase-tracked log-determinant, and
//! cumulative reconstruction from pairings.
//!
//! Conventions (see `operators` for the scalar-model derivation):
//!   pairing(f)  = Tr(f(H) - f(H0)) = int xi(lambda) f'(lambda) dlambda,
//!   xi(lambda)  = (1/2 pi i) lim (ln D(lambda + i eps) - ln D(lambda - i eps)),
//!   xi'(lambda) = (1/2 pi i) lim (sigma(lambda - i eps) - sigma(lambda + i eps)),
//! with xi normalized to vanish left of the spectrum.

use crate::aax::{smoothed_indicator, TestFn};
use crate::error::{Result, SsfError};
use crate::funcalc::{self, QuadOpts};
use crate::linalg;
use crate::operators::{
    perturbation_determinant, trace_resolvent_diff_raw, OperatorHandle, OperatorKind,
};
use crate::quad;
use faer::c64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pipeline {
    TracePairing,
    BoundaryValue,
    LogDeterminant,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFlag {
    Ok,
    Excluded,
    ExtrapolationWeak,
}

impl NodeFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeFlag::Ok => "ok",
            NodeFlag::Excluded => "excluded",
            NodeFlag::ExtrapolationWeak => "extrapolation_weak",
        }
    }
}

/// Provenance metadata carried by every curve.
#[derive(Debug, Clone, Serialize)]
pub struct SsfMeta {
    pub pipeline: Pipeline,
    pub eps_schedule: Vec<f64>,
    pub resolution: String,
    pub anchor: f64,
    pub mollifier_width: Option<f64>,
    pub exclusions: Vec<(f64, f64)>,
}

/// A sampled SSF curve.
#[derive(Debug, Clone)]
pub struct SsfCurve {
    pub lambdas: Vec<f64>,
    pub xi: Vec<c64>,
    pub derivative_xi: Option<Vec<c64>>,
    pub flags: Vec<NodeFlag>,
    pub meta: SsfMeta,
}

impl SsfCurve {
    pub fn new(
        lambdas: Vec<f64>,
        xi: Vec<c64>,
        derivative_xi: Option<Vec<c64>>,
        flags: Vec<NodeFlag>,
        meta: SsfMeta,
    ) -> Result<Self> {
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SsfError::ConfigInvalid { msg: "grid must be strictly increasing".into() });
        }
        if xi.len() != lambdas.len() || flags.len() != lambdas.len() {
            return Err(SsfError::ConfigInvalid { msg: "curve arrays must share a length".into() });
        }
        Ok(SsfCurve { lambdas, xi, derivative_xi, flags, meta })
    }

    /// Value at the grid node nearest to lambda.
    pub fn value_near(&self, lambda: f64) -> c64 {
        let i = self
            .lambdas
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
            .map(|(i, _)| i)
            .unwrap();
        self.xi[i]
    }
}

/// Grid specification min..max with count nodes.
pub fn linear_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && max > min);
    (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect()
}

/// Default epsilon ladder: eps0 = 1e-2 * scale, 7 levels, halving.
pub fn default_eps_schedule(scale: f64) -> Vec<f64> {
    (0..7).map(|k| 1e-2 * scale / 2f64.powi(k)).collect()
}

/// True when the model's determinant is analytic (closed form), in which
/// case boundary values are evaluated directly at eps = 1e-10.
pub fn has_analytic_determinant(handle: &OperatorHandle) -> bool {
    handle.kind() == OperatorKind::MultiplicationRankOne
}

/// Real abscissas where the integrands develop structure at scale eps.
fn spectral_cuts(handle: &OperatorHandle) -> Vec<f64> {
    let mut cuts: Vec<f64> = Vec::new();
    match handle {
        OperatorHandle::Finite(f) => {
            cuts.extend(f.eig_h0.iter().copied());
            cuts.extend(f.eig_h.iter().map(|e| e.re));
        }
        OperatorHandle::RankOne(r) => {
            cuts.extend([0.0, 1.0]);
            if r.gamma.im == 0.0 {
                cuts.push(r.gamma.re);
            }
        }
        OperatorHandle::Schrodinger(_) => {}
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts
}

/// Builds an admissible extension for the pair with default order.
fn pair_extension(handle: &OperatorHandle, f: &TestFn) -> Result<crate::aax::Aax> {
    let complex_eigs = handle.complex_eigenvalues();
    match handle {
        OperatorHandle::Finite(fin) => funcalc::default_extension(&fin.h, &fin.eig_h, f),
        _ => crate::aax::admissible_extension(f.clone(), 4.min(f.max_order() - 1), &complex_eigs),
    }
}

/// How ssf_pairing evaluates Tr(f(H) - f(H0)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMode {
    /// Eigen fast path when the eigenbasis is well conditioned, else quadrature.
    Auto,
    /// Strip quadrature of dbar f~(z) sigma(z).
    Quadrature,
    /// Eigendecomposition functional calculus.
    EigenFast,
}

/// Tr(f(H) - f(H0)) = <xi', f> via the Helffer–Sjostrand strip integral of
/// the scalar sigma(z), or the eigendecomposition fast path.
pub fn ssf_pairing(handle: &OperatorHandle, f: &TestFn, mode: PairingMode) -> Result<c64> {
    let use_eig = match (mode, handle) {
        (PairingMode::EigenFast, _) => true,
        (PairingMode::Quadrature, _) => false,
        (PairingMode::Auto, OperatorHandle::Finite(fin)) => fin.eig_basis.is_some(),
        (PairingMode::Auto, OperatorHandle::RankOne(r)) => {
            r.profile == crate::operators::RankOneProfile::DisjointSupport
        }
        (PairingMode::Auto, _) => false,
    };
    if use_eig {
        return ssf_pairing_eigen(handle, f);
    }
    let ext = pair_extension(handle, f)?;
    funcalc::strip_integral_scalar(
        &ext,
        &|z| trace_resolvent_diff_raw(handle, z).unwrap_or(c64::new(0.0, 0.0)),
        &QuadOpts::default(),
    )
}

/// Fast path: complex eigenvalues contribute nothing (the admissible
/// functional calculus vanishes on the non-real block).
fn ssf_pairing_eigen(handle: &OperatorHandle, f: &TestFn) -> Result<c64> {
    match handle {
        OperatorHandle::Finite(fin) => {
            let scale = fin.spectral_scale().max(1.0);
            let mut s = c64::new(0.0, 0.0);
            for e in &fin.eig_h {
                if e.im.abs() <= crate::operators::IM_TOL * scale {
                    s += c64::new(f.eval(e.re), 0.0);
                }
            }
            for l in &fin.eig_h0 {
                s -= c64::new(f.eval(*l), 0.0);
            }
            Ok(s)
        }
        OperatorHandle::RankOne(r) => {
            // Disjoint support: the continuous part is untouched; the pairing
            // reduces to the scalar pair (gamma, 0).
            if r.profile != crate::operators::RankOneProfile::DisjointSupport {
                return Err(SsfError::UnsupportedSpec {
                    msg: "eigen fast path needs the disjoint-support profile".into(),
                });
            }
            let mut s = -c64::new(f.eval(0.0), 0.0);
            if r.gamma.im == 0.0 {
                s += c64::new(f.eval(r.gamma.re), 0.0);
            }
            Ok(s)
        }
        OperatorHandle::Schrodinger(_) => Err(SsfError::UnsupportedSpec {
            msg: "pairings for Schrodinger models go through the boundary pipeline".into(),
        }),
    }
}

/// <xi', f> through the boundary values: int f(lambda) j_eps(lambda) dlambda,
/// extrapolated over the ladder, where j_eps = (1/2 pi i)(sigma(+) - sigma(-)).
/// Equals ssf_pairing in the limit; used as the distribution-level
/// cross-check of the BoundaryValue pipeline.
pub fn bv_pairing(handle: &OperatorHandle, f: &TestFn, eps_schedule: &[f64]) -> Result<c64> {
    let (sa, sb) = f.support();
    let cuts: Vec<f64> = spectral_cuts(handle).into_iter().filter(|c| *c > sa && *c < sb).collect();
    let mut vals = Vec::new();
    for &eps in eps_schedule {
        let integrand = |lam: f64| -> c64 {
            let sp = trace_resolvent_diff_raw(handle, c64::new(lam, eps)).unwrap();
            let sm = trace_resolvent_diff_raw(handle, c64::new(lam, -eps)).unwrap();
            (sp - sm) * c64::new(0.0, -0.5 / PI) * f.eval(lam)
        };
        let mut total = c64::new(0.0, 0.0);
        let mut edges = vec![sa];
        edges.extend(cuts.iter().copied());
        edges.push(sb);
        for w in edges.windows(2) {
            total += graded_integral(&integrand, w[0], w[1], eps);
        }
        vals.push(total);
    }
    let (v, _) = quad::extrapolate_to_zero(eps_schedule, &vals);
    Ok(v)
}

/// Integral with dyadic grading toward both endpoints down to scale `eps`.
fn graded_integral<F: Fn(f64) -> c64>(f: &F, a: f64, b: f64, eps: f64) -> c64 {
    let mut pieces = Vec::new();
    split_graded(a, b, eps.max(1e-12), 0, &mut pieces);
    let parts: Vec<c64> =
        pieces.iter().map(|&(pa, pb)| quad::integrate_gl_c(f, pa, pb, 12)).collect();
    quad::pairwise_sum(&parts)
}

fn split_graded(a: f64, b: f64, eps: f64, depth: usize, out: &mut Vec<(f64, f64)>) {
    let len = b - a;
    if len <= 2.0 * eps || depth >= 26 {
        out.push((a, b));
        return;
    }
    let third = len / 3.0;
    split_graded(a, a + third, eps, depth + 1, out);
    out.push((a + third, b - third));
    split_graded(b - third, b, eps, depth + 1, out);
}

/// Boundary-value pipeline: derivative_xi[i] = xi'(lambda_i) and the curve
/// integrated from the anchor.
pub fn ssf_derivative_bv(
    handle: &OperatorHandle,
    grid: &[f64],
    eps_schedule: &[f64],
) -> Result<SsfCurve> {
    if grid.len() < 2 {
        return Err(SsfError::ConfigInvalid { msg: "grid needs at least 2 nodes".into() });
    }
    let anchor = grid[0];
    let eps0 = eps_schedule.iter().cloned().fold(0.0f64, f64::max);
    let cuts = spectral_cuts(handle);
    // grid nodes must keep clearance eps0 from the spectrum for the
    // pointwise derivative to extrapolate cleanly; closer nodes get flagged.
    let mut flags = vec![NodeFlag::Ok; grid.len()];
    for (i, &l) in grid.iter().enumerate() {
        if cuts.iter().any(|c| (c - l).abs() < eps0) {
            flags[i] = NodeFlag::ExtrapolationWeak;
        }
    }

    // xi'(lambda) = (1/2 pi i)(sigma(l - i eps) - sigma(l + i eps)), per node.
    let derivs: Vec<c64> = grid
        .par_iter()
        .map(|&lam| {
            let vals: Vec<c64> = eps_schedule
                .iter()
                .map(|&eps| {
                    let sp = trace_resolvent_diff_raw(handle, c64::new(lam, eps)).unwrap();
                    let sm = trace_resolvent_diff_raw(handle, c64::new(lam, -eps)).unwrap();
                    (sm - sp) * c64::new(0.0, -0.5 / PI)
                })
                .collect();
            let (v, _) = quad::extrapolate_to_zero(eps_schedule, &vals);
            v
        })
        .collect();

    // curve: per eps, cumulative integral of the smeared derivative on a
    // graded mesh, then extrapolation per node.
    let per_eps: Vec<Vec<c64>> = eps_schedule
        .par_iter()
        .map(|&eps| {
            let d_eps = |lam: f64| -> c64 {
                let sp = trace_resolvent_diff_raw(handle, c64::new(lam, eps)).unwrap();
                let sm = trace_resolvent_diff_raw(handle, c64::new(lam, -eps)).unwrap();
                (sm - sp) * c64::new(0.0, -0.5 / PI)
            };
            let mut xi_vals = Vec::with_capacity(grid.len());
            let mut acc = c64::new(0.0, 0.0);
            let mut prev = anchor;
            for &lam in grid {
                if lam > prev {
                    let mut edges = vec![prev];
                    edges.extend(cuts.iter().copied().filter(|c| *c > prev && *c < lam));
                    edges.push(lam);
                    for w in edges.windows(2) {
                        acc += graded_integral(&d_eps, w[0], w[1], eps);
                    }
                    prev = lam;
                }
                xi_vals.push(acc);
            }
            xi_vals
        })
        .collect();
    let mut xi = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let ys: Vec<c64> = per_eps.iter().map(|v| v[i]).collect();
        let (v, spread) = quad::extrapolate_to_zero(eps_schedule, &ys);
        if spread > 1e-4 * v.norm().max(1.0) && flags[i] == NodeFlag::Ok {
            flags[i] = NodeFlag::ExtrapolationWeak;
        }
        xi.push(v);
    }

    SsfCurve::new(
        grid.to_vec(),
        xi,
        Some(derivs),
        flags,
        SsfMeta {
            pipeline: Pipeline::BoundaryValue,
            eps_schedule: eps_schedule.to_vec(),
            resolution: format!("grid:{}", grid.len()),
            anchor,
            mollifier_width: None,
            exclusions: Vec::new(),
        },
    )
}

/// Phase-tracked boundary values of the perturbation determinant.
#[derive(Debug, Clone)]
pub struct PhaseTrack {
    pub lambdas: Vec<f64>,
    pub raw_arg_plus: Vec<f64>,
    pub raw_arg_minus: Vec<f64>,
    pub unwrapped_plus: Vec<f64>,
    pub unwrapped_minus: Vec<f64>,
    pub log_abs_plus: Vec<f64>,
    pub log_abs_minus: Vec<f64>,
    pub flags: Vec<NodeFlag>,
}

fn in_exclusion(l: f64, exclusions: &[(f64, f64)]) -> bool {
    exclusions.iter().any(|&(a, b)| l >= a && l <= b)
}

/// Tracks arg D and ln|D| along the grid at heights +-eps, unwrapping the
/// phase continuously: each step adds the 2 pi multiple minimizing |delta|,
/// refining the path adaptively where |delta| > pi/2. Jumps that refinement
/// cannot resolve are fatal unless inside a declared exclusion window, where
/// the tie breaks toward the smaller winding and the node is flagged.
pub fn track_determinant_phase(
    handle: &OperatorHandle,
    grid: &[f64],
    eps: f64,
    exclusions: &[(f64, f64)],
) -> Result<PhaseTrack> {
    let smin = handle.spectral_min();
    if grid[0] >= smin {
        return Err(SsfError::ConfigInvalid {
            msg: format!("grid must start left of the spectrum (min {smin})"),
        });
    }
    let d_at = |lam: f64, sign: f64| -> Result<c64> {
        perturbation_determinant(handle, c64::new(lam, sign * eps))
    };

    let mut out = PhaseTrack {
        lambdas: grid.to_vec(),
        raw_arg_plus: Vec::with_capacity(grid.len()),
        raw_arg_minus: Vec::with_capacity(grid.len()),
        unwrapped_plus: Vec::with_capacity(grid.len()),
        unwrapped_minus: Vec::with_capacity(grid.len()),
        log_abs_plus: Vec::with_capacity(grid.len()),
        log_abs_minus: Vec::with_capacity(grid.len()),
        flags: vec![NodeFlag::Ok; grid.len()],
    };

    for (pass, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let mut unwrapped = 0.0f64;
        let mut prev_arg = 0.0f64;
        let mut prev_lam = grid[0];
        for (i, &lam) in grid.iter().enumerate() {
            let d = d_at(lam, sign)?;
            let arg = d.im.atan2(d.re);
            let logabs = d.norm().ln();
            if i == 0 {
                unwrapped = arg;
            } else {
                let delta = advance_phase(
                    &|l| d_at(l, sign),
                    prev_lam,
                    prev_arg,
                    lam,
                    arg,
                    0,
                    unwrapped,
                    in_exclusion(0.5 * (prev_lam + lam), exclusions)
                        || in_exclusion(lam, exclusions),
                )?;
                unwrapped += delta;
            }
            if in_exclusion(lam, exclusions) {
                out.flags[i] = NodeFlag::Excluded;
            }
            if pass == 0 {
                out.raw_arg_plus.push(arg);
                out.unwrapped_plus.push(unwrapped);
                out.log_abs_plus.push(logabs);
            } else {
                out.raw_arg_minus.push(arg);
                out.unwrapped_minus.push(unwrapped);
                out.log_abs_minus.push(logabs);
            }
            prev_arg = arg;
            prev_lam = lam;
        }
    }
    Ok(out)
}

/// Unwrapped phase increment between two path points, with recursive
/// midpoint refinement.
#[allow(clippy::too_many_arguments)]
fn advance_phase(
    d_at: &dyn Fn(f64) -> Result<c64>,
    la: f64,
    arg_a: f64,
    lb: f64,
    arg_b: f64,
    depth: usize,
    unwrapped_a: f64,
    excluded: bool,
) -> Result<f64> {
    let raw = wrap_to_pi(arg_b - arg_a);
    if raw.abs() <= std::f64::consts::FRAC_PI_2 {
        return Ok(raw);
    }
    if depth >= 48 {
        if excluded || (raw.abs() - PI).abs() < 1e-6 {
            // a zero of D sits within eps of the path; break the tie toward
            // the smaller winding
            let cand_a = raw;
            let cand_b = raw - 2.0 * PI * raw.signum();
            let pick = if (unwrapped_a + cand_a).abs() <= (unwrapped_a + cand_b).abs() {
                cand_a
            } else {
                cand_b
            };
            return Ok(pick);
        }
        return Err(SsfError::UnresolvablePhaseJump { lambda: 0.5 * (la + lb) });
    }
    let lm = 0.5 * (la + lb);
    let dm = d_at(lm)?;
    let arg_m = dm.im.atan2(dm.re);
    let d1 = advance_phase(d_at, la, arg_a, lm, arg_m, depth + 1, unwrapped_a, excluded)?;
    let d2 = advance_phase(d_at, lm, arg_m, lb, arg_b, depth + 1, unwrapped_a + d1, excluded)?;
    Ok(d1 + d2)
}

fn wrap_to_pi(d: f64) -> f64 {
    let mut r = d % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r < -PI {
        r += 2.0 * PI;
    }
    r
}

/// Log-determinant pipeline:
/// xi(lambda) = [(arg D+ - arg D-) - i (ln|D+| - ln|D-|)] / (2 pi),
/// extrapolated over the eps ladder (analytic determinants evaluate at a
/// single tiny eps instead).
pub fn ssf_via_logdet(
    handle: &OperatorHandle,
    grid: &[f64],
    eps_schedule: &[f64],
    exclusions: &[(f64, f64)],
) -> Result<SsfCurve> {
    let schedule: Vec<f64> = if has_analytic_determinant(handle) {
        vec![1e-10]
    } else {
        eps_schedule.to_vec()
    };
    let mut per_eps: Vec<Vec<c64>> = Vec::new();
    let mut flags = vec![NodeFlag::Ok; grid.len()];
    let mut tracks = Vec::new();
    for &eps in &schedule {
        let track = track_determinant_phase(handle, grid, eps, exclusions)?;
        let vals: Vec<c64> = (0..grid.len())
            .map(|i| {
                let d_arg = track.unwrapped_plus[i] - track.unwrapped_minus[i];
                let d_log = track.log_abs_plus[i] - track.log_abs_minus[i];
                c64::new(d_arg, -d_log) * (0.5 / PI)
            })
            .collect();
        for i in 0..grid.len() {
            if track.flags[i] == NodeFlag::Excluded {
                flags[i] = NodeFlag::Excluded;
            }
        }
        per_eps.push(vals);
        tracks.push(track);
    }
    let xi: Vec<c64> = if schedule.len() == 1 {
        per_eps.pop().unwrap()
    } else {
        (0..grid.len())
            .map(|i| {
                let ys: Vec<c64> = per_eps.iter().map(|v| v[i]).collect();
                let (v, spread) = quad::extrapolate_to_zero(&schedule, &ys);
                if spread > 1e-4 * v.norm().max(1.0) && flags[i] == NodeFlag::Ok {
                    flags[i] = NodeFlag::ExtrapolationWeak;
                }
                v
            })
            .collect()
    };
    SsfCurve::new(
        grid.to_vec(),
        xi,
        None,
        flags,
        SsfMeta {
            pipeline: Pipeline::LogDeterminant,
            eps_schedule: schedule,
            resolution: format!("grid:{}", grid.len()),
            anchor: grid[0],
            mollifier_width: None,
            exclusions: exclusions.to_vec(),
        },
    )
}

/// Cumulative reconstruction: xi(t) = -<xi', smoothed 1_{[anchor, t]}>.
/// Step locations are resolved only to the mollifier width.
pub fn ssf_cumulative_from_pairings(
    handle: &OperatorHandle,
    grid: &[f64],
    mollifier_width: f64,
    mode: PairingMode,
) -> Result<SsfCurve> {
    let smin = handle.spectral_min();
    let anchor = grid[0];
    if anchor >= smin - 0.5 * mollifier_width {
        return Err(SsfError::ConfigInvalid {
            msg: format!("anchor {anchor} must sit left of the spectrum (min {smin})"),
        });
    }
    let xi: Vec<c64> = grid
        .par_iter()
        .map(|&t| {
            if t <= anchor + mollifier_width {
                return Ok(c64::new(0.0, 0.0));
            }
            let ind = smoothed_indicator(anchor, t, mollifier_width);
            Ok(-ssf_pairing(handle, &ind, mode)?)
        })
        .collect::<Result<Vec<c64>>>()?;
    let flags = grid
        .iter()
        .map(|&t| if t <= anchor + mollifier_width { NodeFlag::Excluded } else { NodeFlag::Ok })
        .collect();
    SsfCurve::new(
        grid.to_vec(),
        xi,
        None,
        flags,
        SsfMeta {
            pipeline: Pipeline::TracePairing,
            eps_schedule: Vec::new(),
            resolution: format!("grid:{}", grid.len()),
            anchor,
            mollifier_width: Some(mollifier_width),
            exclusions: Vec::new(),
        },
    )
}

/// Adjoint handle (H* = H0 + V*).
pub fn adjoint_handle(handle: &OperatorHandle) -> Result<OperatorHandle> {
    match handle {
        OperatorHandle::Finite(f) => crate::operators::build_operator(
            &crate::operators::OperatorSpec::Finite {
                h0: f.h0.clone(),
                v: linalg::adjoint(&f.v),
            },
        ),
        OperatorHandle::RankOne(r) => crate::operators::build_operator(
            &crate::operators::OperatorSpec::RankOne { gamma: r.gamma.conj(), profile: r.profile },
        ),
        OperatorHandle::Schrodinger(_) => Err(SsfError::UnsupportedSpec {
            msg: "adjoint check for Schrodinger models uses conjugated potentials".into(),
        }),
    }
}

/// max over the grid of |xi(lambda; H*, H0) - conj xi(lambda; H, H0)|.
pub fn adjoint_ssf_check(
    handle: &OperatorHandle,
    grid: &[f64],
    eps_schedule: &[f64],
    exclusions: &[(f64, f64)],
) -> Result<f64> {
    let adj = adjoint_handle(handle)?;
    let xi = ssf_via_logdet(handle, grid, eps_schedule, exclusions)?;
    let xi_adj = ssf_via_logdet(&adj, grid, eps_schedule, exclusions)?;
    let mut max_dev = 0.0f64;
    for i in 0..grid.len() {
        if xi.flags[i] == NodeFlag::Excluded {
            continue;
        }
        max_dev = max_dev.max((xi_adj.xi[i] - xi.xi[i].conj()).norm());
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aax::standard_bump;
    use crate::operators::{build_operator, OperatorSpec, RankOneProfile};
    use crate::toy_models::{self, FiniteToy, RankOneToy};
    use faer::Mat;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn scalar_pair(lambda0: f64, v: c64) -> OperatorHandle {
        build_operator(
            &FiniteToy::Diagonal { lambdas: vec![lambda0], vs: vec![v] }.spec(),
        )
        .unwrap()
    }

    #[test]
    fn pairing_scalar_real_shift() {
        // Tr(f(H) - f(H0)) = f(l0 + v) - f(l0).
        let h = scalar_pair(0.2, c(0.5, 0.0));
        let f = standard_bump(0.3, 0.6);
        let expected = f.eval(0.7) - f.eval(0.2);
        for mode in [PairingMode::EigenFast, PairingMode::Quadrature] {
            let got = ssf_pairing(&h, &f, mode).unwrap();
            assert!(
                (got - c(expected, 0.0)).norm() < 2e-6,
                "{mode:?}: {got:?} vs {expected}"
            );
        }
    }

    #[test]
    fn pairing_scalar_complex_shift() {
        // v complex: pairing = -f(l0).
        let h = scalar_pair(0.2, c(0.1, 0.4));
        let f = standard_bump(0.3, 0.6);
        let expected = -f.eval(0.2);
        for mode in [PairingMode::EigenFast, PairingMode::Quadrature] {
            let got = ssf_pairing(&h, &f, mode).unwrap();
            assert!(
                (got - c(expected, 0.0)).norm() < 2e-6,
                "{mode:?}: {got:?} vs {expected}"
            );
        }
    }

    #[test]
    fn pairing_jordan_vanishes() {
        let h = build_operator(&FiniteToy::Jordan { lambda: 0.4, v: 0.8 }.spec()).unwrap();
        let f = standard_bump(0.4, 0.5);
        let got = ssf_pairing(&h, &f, PairingMode::Quadrature).unwrap();
        assert!(got.norm() < 1e-9, "Jordan pairing {got:?}");
    }

    #[test]
    fn bv_pairing_matches_trace_pairing() {
        let h0 = Mat::from_fn(3, 3, |i, j| {
            if i == j { c(i as f64 * 0.8, 0.0) } else { c(0.05, 0.02 * (i as f64 - j as f64)) }
        });
        let h0 = Mat::from_fn(3, 3, |i, j| (h0[(i, j)] + h0[(j, i)].conj()) * 0.5);
        let v = Mat::from_fn(3, 3, |i, j| c(0.1 * ((i * j) as f64).cos(), 0.08 * ((i + j) as f64).sin()));
        let h = build_operator(&OperatorSpec::Finite { h0, v }).unwrap();
        let f = standard_bump(0.8, 0.7);
        let a = ssf_pairing(&h, &f, PairingMode::Quadrature).unwrap();
        let eps = default_eps_schedule(2.0);
        let b = bv_pairing(&h, &f, &eps).unwrap();
        assert!((a - b).norm() < 1e-4, "pairing {a:?} vs bv {b:?}");
    }

    #[test]
    fn derivative_bv_vanishes_in_gaps_and_for_v_zero() {
        let h = scalar_pair(0.0, c(1.0, 0.0));
        let grid = vec![-2.0, -1.5, 1.6, 2.0, 2.4];
        let eps = default_eps_schedule(1.0);
        let curve = ssf_derivative_bv(&h, &grid, &eps).unwrap();
        for d in curve.derivative_xi.as_ref().unwrap() {
            assert!(d.norm() < 1e-8, "gap derivative {d:?}");
        }
        let hz = scalar_pair(0.3, c(0.0, 0.0));
        let curve = ssf_derivative_bv(&hz, &grid, &eps).unwrap();
        for (x, d) in curve.xi.iter().zip(curve.derivative_xi.as_ref().unwrap()) {
            assert!(x.norm() < 1e-12 && d.norm() < 1e-12);
        }
    }

    #[test]
    fn bv_curve_reconstructs_scalar_step() {
        // xi = 1_{[0.2, 0.7]} for the scalar pair, away from the jumps.
        let h = scalar_pair(0.2, c(0.5, 0.0));
        let grid = linear_grid(-0.5, 1.2, 18);
        let eps = default_eps_schedule(1.0);
        let curve = ssf_derivative_bv(&h, &grid, &eps).unwrap();
        for (i, &lam) in grid.iter().enumerate() {
            if (lam - 0.2).abs() < 0.08 || (lam - 0.7).abs() < 0.08 {
                continue;
            }
            let expected = if lam > 0.2 && lam < 0.7 { 1.0 } else { 0.0 };
            assert!(
                (curve.xi[i] - c(expected, 0.0)).norm() < 1e-3,
                "lambda {lam}: {:?} vs {expected}",
                curve.xi[i]
            );
        }
    }

    #[test]
    fn bv_derivative_matches_interacting_closed_form_slope() {
        // beta = 0.2, lambda = 0.3: xi' equals d/dlambda of the closed form.
        let toy = RankOneToy::interacting(0.2);
        let h = build_operator(&toy.spec()).unwrap();
        let grid = vec![-0.5, 0.3, 0.45];
        let curve = ssf_derivative_bv(&h, &grid, &[1e-10]).unwrap();
        let d_bv = curve.derivative_xi.as_ref().unwrap()[1];
        let hstep = 1e-5;
        let fd = (toy_models::interacting_ssf_closed_form(0.2, 0.3 + hstep).unwrap()
            - toy_models::interacting_ssf_closed_form(0.2, 0.3 - hstep).unwrap())
            / c(2.0 * hstep, 0.0);
        assert!((d_bv - fd).norm() < 1e-5 * fd.norm().max(1.0), "bv {d_bv:?} vs fd {fd:?}");
    }

    #[test]
    fn phase_track_disjoint_toy() {
        // gamma = i beta: unwrapped arg(D+) climbs to 2 pi, minus side stays
        // within (-pi/2, pi/2).
        let toy = RankOneToy::disjoint(c(0.0, 1.0));
        let h = build_operator(&toy.spec()).unwrap();
        let grid = linear_grid(-40.0, 40.0, 400);
        let track = track_determinant_phase(&h, &grid, 1e-10, &[]).unwrap();
        let last = *track.unwrapped_plus.last().unwrap();
        assert!((last - 2.0 * PI).abs() < 0.1, "arg+ ends at {last}");
        for v in &track.unwrapped_minus {
            assert!(v.abs() < std::f64::consts::FRAC_PI_2 + 1e-6);
        }
        assert!(track.unwrapped_plus[0].abs() < 0.05);
    }

    #[test]
    fn phase_track_zero_perturbation() {
        let h = scalar_pair(0.3, c(0.0, 0.0));
        let grid = linear_grid(-1.0, 1.0, 40);
        let track = track_determinant_phase(&h, &grid, 1e-6, &[]).unwrap();
        for i in 0..grid.len() {
            assert!(track.unwrapped_plus[i].abs() < 1e-12);
            assert!(track.unwrapped_minus[i].abs() < 1e-12);
            assert!(track.log_abs_plus[i].abs() < 1e-12);
        }
    }

    #[test]
    fn logdet_disjoint_toy_step() {
        // gamma = i: xi = 1_{[0, inf)} a.e.
        let toy = RankOneToy::disjoint(c(0.0, 1.0));
        let h = build_operator(&toy.spec()).unwrap();
        let grid = linear_grid(-30.0, 30.0, 301);
        let curve = ssf_via_logdet(&h, &grid, &[], &[]).unwrap();
        for (i, &lam) in grid.iter().enumerate() {
            if lam.abs() < 0.3 {
                continue;
            }
            let expected = if lam > 0.0 { 1.0 } else { 0.0 };
            // the 1e-10 evaluation height leaves O(eps/lambda + 1/|grid end|)
            // residue; the anchor itself carries O(beta/|lambda_min|)
            assert!(
                (curve.xi[i] - c(expected, 0.0)).norm() < 0.05,
                "lambda {lam}: {:?}",
                curve.xi[i]
            );
        }
    }

    #[test]
    fn logdet_interacting_matches_closed_form() {
        for &beta in &[0.2, 0.4] {
            let toy = RankOneToy::interacting(beta);
            let h = build_operator(&toy.spec()).unwrap();
            let grid = linear_grid(-0.5, 1.5, 401);
            let curve = ssf_via_logdet(&h, &grid, &[], &[]).unwrap();
            let mut max_dev = 0.0f64;
            for (i, &lam) in grid.iter().enumerate() {
                if lam.abs() < 1e-3 || (lam - 1.0).abs() < 1e-3 {
                    continue;
                }
                let closed = toy_models::interacting_ssf_closed_form(beta, lam).unwrap();
                max_dev = max_dev.max((curve.xi[i] - closed).norm());
            }
            assert!(max_dev < 1e-6, "beta {beta}: max dev {max_dev:.3e}");
        }
    }

    #[test]
    fn cumulative_reproduces_four_by_four() {
        let toy = FiniteToy::Diagonal {
            lambdas: vec![0.0, 1.0, 2.0, 3.5],
            vs: vec![c(0.4, 0.0), c(-0.3, 0.0), c(0.0, 0.25), c(0.0, 0.0)],
        };
        let h = build_operator(&toy.spec()).unwrap();
        let oracle = toy_models::finite_ssf_closed_form(&toy).unwrap();
        let grid = linear_grid(-1.0, 4.5, 160);
        let width = 1e-2;
        let curve = ssf_cumulative_from_pairings(&h, &grid, width, PairingMode::Auto).unwrap();
        for (i, &lam) in grid.iter().enumerate() {
            if oracle.distance_to_jump(lam) < 2.0 * width {
                continue;
            }
            let expected = oracle.eval(lam);
            assert!(
                (curve.xi[i] - expected).norm() < 1e-4,
                "lambda {lam}: {:?} vs {expected:?}",
                curve.xi[i]
            );
        }
    }

    #[test]
    fn cumulative_matches_quadrature_pairing_path() {
        // quadrature and eigen fast path agree on a complex-perturbed model
        let toy = FiniteToy::Diagonal {
            lambdas: vec![0.0, 1.0],
            vs: vec![c(0.3, 0.0), c(0.0, 0.3)],
        };
        let h = build_operator(&toy.spec()).unwrap();
        for &t in &[0.6, 1.4, 2.2] {
            let ind = smoothed_indicator(-0.8, t, 1e-2);
            let a = ssf_pairing(&h, &ind, PairingMode::EigenFast).unwrap();
            let b = ssf_pairing(&h, &ind, PairingMode::Quadrature).unwrap();
            assert!((a - b).norm() < 2e-5, "t={t}: eig {a:?} vs quad {b:?}");
        }
    }

    #[test]
    fn adjoint_check_toys() {
        let toy = RankOneToy::interacting(0.3);
        let h = build_operator(&toy.spec()).unwrap();
        let grid = linear_grid(-0.6, 1.6, 101);
        let dev = adjoint_ssf_check(&h, &grid, &[], &[]).unwrap();
        assert!(dev < 1e-8, "interacting adjoint dev {dev:.3e}");
    }

    #[test]
    fn adjoint_check_finite_hermitian_real_curve() {
        let toy = FiniteToy::Diagonal { lambdas: vec![0.0, 1.0], vs: vec![c(0.5, 0.0), c(-0.2, 0.0)] };
        let h = build_operator(&toy.spec()).unwrap();
        let grid = linear_grid(-1.0, 2.0, 61);
        let eps = default_eps_schedule(1.5);
        let dev = adjoint_ssf_check(&h, &grid, &eps, &[]).unwrap();
        assert!(dev < 1e-8, "hermitian adjoint dev {dev:.3e}");
        // and Im xi = 0 for Hermitian V
        let curve = ssf_via_logdet(&h, &grid, &eps, &[]).unwrap();
        for x in &curve.xi {
            assert!(x.im.abs() < 1e-8);
        }
    }

    #[test]
    fn pipeline_agreement_distributional() {
        // <xi', f> from the three pipelines agrees on a finite model with a
        // complex eigenvalue: pairing, bv-pairing, and logdet integrated
        // against f'.
        let toy = FiniteToy::Diagonal {
            lambdas: vec![0.0, 0.9, 2.0],
            vs: vec![c(0.35, 0.0), c(0.0, 0.3), c(-0.25, 0.0)],
        };
        let h = build_operator(&toy.spec()).unwrap();
        let f = standard_bump(0.9, 0.85);
        let a = ssf_pairing(&h, &f, PairingMode::Quadrature).unwrap();
        let eps = default_eps_schedule(2.0);
        let b = bv_pairing(&h, &f, &eps).unwrap();
        // int xi f' with the logdet curve via fine trapezoid
        let grid = linear_grid(-0.6, 2.6, 1201);
        let curve = ssf_via_logdet(&h, &grid, &eps, &[]).unwrap();
        let mut cint = c(0.0, 0.0);
        for i in 0..grid.len() - 1 {
            let lm = 0.5 * (grid[i] + grid[i + 1]);
            let dl = grid[i + 1] - grid[i];
            let fp = f.eval_derivative(1, lm);
            cint += (curve.xi[i] + curve.xi[i + 1]) * 0.5 * fp * dl;
        }
        assert!((a - b).norm() < 1e-4, "pairing {a:?} vs bv {b:?}");
        assert!((a - cint).norm() < 1e-4, "pairing {a:?} vs logdet-integrated {cint:?}");
    }

    #[test]
    fn imaginary_sign_toy_family() {
        // V = i beta Pi0, beta > 0: Im xi >= -tol across the grid.
        let toy = RankOneToy::interacting(0.25);
        let h = build_operator(&toy.spec()).unwrap();
        let grid = linear_grid(-0.5, 1.5, 201);
        let curve = ssf_via_logdet(&h, &grid, &[], &[]).unwrap();
        for x in &curve.xi {
            assert!(x.im > -1e-9, "Im xi {x:?}");
        }
    }

    #[test]
    fn hermitian_matches_kreins_counting() {
        let toy = FiniteToy::Diagonal {
            lambdas: vec![0.0, 0.7, 1.5],
            vs: vec![c(0.3, 0.0), c(0.25, 0.0), c(-0.4, 0.0)],
        };
        let h = build_operator(&toy.spec()).unwrap();
        let fin = h.finite().unwrap();
        let grid = linear_grid(-0.5, 2.2, 90);
        let width = 1e-2;
        let curve = ssf_cumulative_from_pairings(&h, &grid, width, PairingMode::Auto).unwrap();
        for (i, &lam) in grid.iter().enumerate() {
            let n0 = fin.eig_h0.iter().filter(|e| **e <= lam).count() as f64;
            let n = fin.real_eigenvalues_of_h().iter().filter(|e| **e <= lam).count() as f64;
            let expected = n0 - n;
            let near_jump = fin
                .eig_h0
                .iter()
                .copied()
                .chain(fin.real_eigenvalues_of_h())
                .any(|e| (e - lam).abs() < 2.0 * width);
            if near_jump {
                continue;
            }
            assert!(
                (curve.xi[i] - c(expected, 0.0)).norm() < 1e-6,
                "counting mismatch at {lam}: {:?} vs {expected}",
                curve.xi[i]
            );
        }
    }
}
