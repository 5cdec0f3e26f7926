//! Helffer–Sjostrand functional calculus for non-self-adjoint matrices:
//! Riesz projections, real/complex spectral splitting, strip-quadrature
//! evaluation of f(H), the Stone-type boundary-value formula, and the
//! resolvent reconstruction identity.

use crate::aax::{admissible_extension, Aax, TestFn};
use crate::error::{Result, SsfError};
use crate::linalg::{self, CMat};
use crate::operators::IM_TOL;
use crate::quad;
use faer::c64;
use rayon::prelude::*;

/// Node budget cap for the strip quadrature.
pub const NODE_CAP: usize = 1 << 22;

/// Relative convergence target for panel doubling.
pub const QUAD_RTOL: f64 = 1e-6;

/// Options for the strip quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub rel_tol: f64,
    pub node_cap: usize,
    /// Truncation height: layers stop once their contribution is negligible
    /// or y drops below this floor.
    pub y_floor: f64,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { rel_tol: QUAD_RTOL, node_cap: NODE_CAP, y_floor: 1e-9 }
    }
}

/// Strip integral (1/pi) int dbar f~(z) g(z) dx dy for a matrix-valued g.
///
/// Adaptive tensor Gauss–Legendre on a quadtree of rectangles: each cell is
/// estimated with nested 8- and 12-point rules and split in four while the
/// two disagree. Cells grade automatically toward the real-axis spectrum,
/// where the resolvent develops structure at scale |Im z| while the dbar
/// factor damps the integrand like |Im z|^N. The final pass re-evaluates the
/// accepted cells in a deterministic order with pairwise accumulation.
pub fn strip_integral<G>(ext: &Aax, g: &G, dim: usize, opts: &QuadOpts) -> Result<CMat>
where
    G: Fn(c64) -> CMat + Sync,
{
    let (sa, sb) = ext.f.support();
    let y_max = ext.chi_height(sa.abs().max(sb.abs()));

    // Pass 1: scale estimate from a coarse fixed grid.
    let coarse = cell_value(ext, g, dim, sa, sb, -y_max, y_max, 8);
    let mut scale = linalg::frob(&coarse).max(1e-14);

    // Pass 2: adaptive subdivision with a per-cell absolute budget.
    let mut accepted: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut queue: Vec<(f64, f64, f64, f64, usize)> = vec![
        (sa, sb, 0.0, y_max, 0),
        (sa, sb, -y_max, 0.0, 0),
    ];
    let mut nodes = 0usize;
    while let Some((xa, xb, ya, yb, depth)) = queue.pop() {
        let lo = cell_value(ext, g, dim, xa, xb, ya, yb, 8);
        let hi = cell_value(ext, g, dim, xa, xb, ya, yb, 12);
        nodes += 64 + 144;
        if nodes > opts.node_cap {
            return Err(SsfError::QuadratureNotConverged {
                nodes,
                rel: linalg::frob(&(&hi - &lo)) / scale,
            });
        }
        let err = linalg::frob(&(&hi - &lo));
        let mag = linalg::frob(&hi);
        scale = scale.max(mag);
        let tol_cell = opts.rel_tol * scale / 256.0;
        // stop splitting cells thinner than the truncation floor: the
        // integrand there is analytically below target by the |y|^N bound
        let thin = (yb - ya).abs() < opts.y_floor;
        if err <= tol_cell || depth >= 30 || (thin && mag <= tol_cell) {
            accepted.push((xa, xb, ya, yb));
        } else {
            let xm = 0.5 * (xa + xb);
            let ym = 0.5 * (ya + yb);
            queue.push((xa, xm, ya, ym, depth + 1));
            queue.push((xm, xb, ya, ym, depth + 1));
            queue.push((xa, xm, ym, yb, depth + 1));
            queue.push((xm, xb, ym, yb, depth + 1));
        }
    }

    // Pass 3: deterministic evaluation of accepted cells.
    accepted.sort_by(|a, b| (a.0, a.2).partial_cmp(&(b.0, b.2)).unwrap());
    let partials: Vec<CMat> = accepted
        .par_iter()
        .map(|&(xa, xb, ya, yb)| cell_value(ext, g, dim, xa, xb, ya, yb, 12))
        .collect();
    let mut total = linalg::czeros(dim, dim);
    for p in &partials {
        total += p;
    }
    Ok(linalg::scale_mat(&total, c64::new(1.0 / std::f64::consts::PI, 0.0)))
}

fn cell_value<G>(
    ext: &Aax,
    g: &G,
    dim: usize,
    xa: f64,
    xb: f64,
    ya: f64,
    yb: f64,
    order: usize,
) -> CMat
where
    G: Fn(c64) -> CMat,
{
    let rule = quad::gauss_legendre(order);
    let xm = 0.5 * (xa + xb);
    let xh = 0.5 * (xb - xa);
    let ym = 0.5 * (ya + yb);
    let yh = 0.5 * (yb - ya);
    let mut acc = linalg::czeros(dim, dim);
    for (xi, wx) in rule.nodes.iter().zip(&rule.weights) {
        let x = xm + xh * xi;
        for (yi, wy) in rule.nodes.iter().zip(&rule.weights) {
            let y = ym + yh * yi;
            let z = c64::new(x, y);
            let d = ext.dbar(z);
            if d.norm() == 0.0 {
                continue;
            }
            let w = d * (wx * wy * xh * yh);
            let gm = g(z);
            // acc += w * gm
            for i in 0..dim {
                for j in 0..dim {
                    acc[(i, j)] += w * gm[(i, j)];
                }
            }
        }
    }
    acc
}

/// Scalar variant of `strip_integral` for trace-valued integrands.
pub fn strip_integral_scalar<G>(ext: &Aax, g: &G, opts: &QuadOpts) -> Result<c64>
where
    G: Fn(c64) -> c64 + Sync,
{
    let m = strip_integral(ext, &|z| {
        let mut out = linalg::czeros(1, 1);
        out[(0, 0)] = g(z);
        out
    }, 1, opts)?;
    Ok(m[(0, 0)])
}

/// f(H) = (1/pi) int dbar f~(z) (H - z)^{-1} dx dy.
///
/// The complex-eigenvalue block contributes nothing when the extension is
/// admissible, so the plain resolvent can be integrated directly.
pub fn apply_function(h: &CMat, ext: &Aax, opts: &QuadOpts) -> Result<CMat> {
    let n = h.nrows();
    if n <= 32 {
        strip_integral(ext, &|z| linalg::small_resolvent(h, z), n, opts)
    } else {
        strip_integral(ext, &|z| linalg::resolvent_matrix_raw(h, z), n, opts)
    }
}

/// Fast path through a (well-conditioned) eigendecomposition: complex
/// eigenvalues are assigned f = 0, real ones f(Re lambda).
pub fn apply_function_via_eig(
    eig: &[c64],
    p: &CMat,
    p_inv: &CMat,
    f: &TestFn,
    scale: f64,
) -> CMat {
    let n = p.nrows();
    let mut d = linalg::czeros(n, n);
    for (i, ev) in eig.iter().enumerate() {
        if ev.im.abs() <= IM_TOL * scale.max(1.0) {
            d[(i, i)] = c64::new(f.eval(ev.re), 0.0);
        }
    }
    &(p * &d) * p_inv
}

/// Riesz projection (1/2 pi i) oint (z - H)^{-1} dz over the circle
/// C(lambda, r), by trapezoidal contour quadrature with node doubling until
/// the idempotency defect drops below 1e-10.
pub fn riesz_projection(h: &CMat, lambda: c64, radius: f64) -> Result<CMat> {
    let n = h.nrows();
    let mut m = 16usize;
    let mut best: Option<(CMat, f64)> = None;
    while m <= 4096 {
        let nodes: Vec<usize> = (0..m).collect();
        let terms: Vec<CMat> = nodes
            .par_iter()
            .map(|&k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let e = c64::new(theta.cos(), theta.sin());
                let z = lambda + e * radius;
                // (z - H)^{-1} = -(H - z)^{-1}
                let r = if n <= 32 {
                    linalg::small_resolvent(h, z)
                } else {
                    linalg::resolvent_matrix_raw(h, z)
                };
                let w = e * (radius / m as f64);
                let mut t = linalg::czeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        t[(i, j)] = -r[(i, j)] * w;
                    }
                }
                t
            })
            .collect();
        let mut pi_mat = linalg::czeros(n, n);
        for t in &terms {
            pi_mat += t;
        }
        // conditioning gate: circle must stay well inside the resolvent set
        let probe = linalg::resolvent_matrix(h, lambda + c64::new(radius, 0.0), 1e14);
        if probe.is_err() {
            return Err(SsfError::ContourHitsSpectrum { center: lambda, radius });
        }
        let defect = linalg::frob(&(&(&pi_mat * &pi_mat) - &pi_mat));
        if defect < 1e-10 {
            return Ok(pi_mat);
        }
        best = Some(match best {
            Some((b, d)) if d < defect => (b, d),
            _ => (pi_mat, defect),
        });
        m *= 2;
    }
    let (_, defect) = best.unwrap();
    Err(SsfError::NonIdempotent { defect })
}

/// Result of splitting H over an interval I: the finite-rank projector onto
/// the non-real spectrum with real part in I, and the two restrictions.
pub struct SpectralSplit {
    pub projector: CMat,
    /// Restriction of H to Ran(projector), in the returned basis.
    pub h_complex: CMat,
    pub basis_complex: CMat,
    /// Restriction of H to Ran(I - projector), in the returned basis.
    pub h_real: CMat,
    pub basis_real: CMat,
    pub eigenvalues_complex: Vec<c64>,
}

/// Sum of Riesz projections over non-real eigenvalues with real part in I.
pub fn spectral_split(h: &CMat, eig: &[c64], interval: (f64, f64)) -> Result<SpectralSplit> {
    let n = h.nrows();
    let scale = eig.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let complex_eigs: Vec<c64> = eig
        .iter()
        .copied()
        .filter(|e| e.im.abs() > IM_TOL * scale && e.re > interval.0 && e.re < interval.1)
        .collect();
    // cluster coincident eigenvalues
    let mut clusters: Vec<c64> = Vec::new();
    for &e in &complex_eigs {
        if !clusters.iter().any(|c| (*c - e).norm() < 1e-8 * scale) {
            clusters.push(e);
        }
    }
    let mut projector = linalg::czeros(n, n);
    for &lam in &clusters {
        let gap = eig
            .iter()
            .filter(|e| (**e - lam).norm() > 1e-8 * scale)
            .map(|e| (*e - lam).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = (0.5 * gap).min(0.25 * scale).max(1e-6);
        projector += riesz_projection(h, lam, radius)?;
    }
    let (h_complex, basis_complex) = restrict(h, &projector, true);
    let mut complement = linalg::cidentity(n) - &projector;
    // symmetrize tiny numerical noise
    if linalg::frob(&projector) == 0.0 {
        complement = linalg::cidentity(n);
    }
    let (h_real, basis_real) = restrict(h, &complement, false);
    Ok(SpectralSplit {
        projector,
        h_complex,
        basis_complex,
        h_real,
        basis_real,
        eigenvalues_complex: complex_eigs,
    })
}

/// Restriction of H to the range of a projector P: columns of an SVD basis of
/// Ran(P), Galerkin-compressed (exact for invariant subspaces).
fn restrict(h: &CMat, p: &CMat, small: bool) -> (CMat, CMat) {
    let n = h.nrows();
    let svd = p.svd().expect("projector svd");
    let mut rank = 0usize;
    for i in 0..n {
        if svd.S()[i].re > 0.5 {
            rank += 1;
        }
    }
    if rank == 0 {
        let dim = if small { 0 } else { n };
        if dim == 0 {
            return (linalg::czeros(0, 0), linalg::czeros(n, 0));
        }
    }
    let u = svd.U();
    let basis = CMat::from_fn(n, rank, |i, j| u[(i, j)]);
    // h_restricted = (B^H B)^{-1} B^H H B
    let bh = linalg::adjoint(&basis);
    let gram = &bh * &basis;
    let rhs = &bh * &(h * &basis);
    let lu = linalg::Lu::new(&gram);
    (lu.solve_mat(&rhs), basis)
}

/// Empirical resolvent-growth probe: fits log ||R_H|| against log |Im z| on a
/// geometric ladder inside the strip and returns the smallest integer n such
/// that ||R|| |y|^{n+1} / <x>^n stays bounded toward the axis.
pub fn probe_resolvent_growth(
    h: &CMat,
    eig: &[c64],
    region: &crate::operators::StripRegion,
    samples: usize,
) -> Result<usize> {
    let scale = eig.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let (s0, s1) = region.interval;
    // the bound is a sup over the strip: sample a grid plus the abscissas of
    // the spectrum, where resolvent growth is worst
    let mut xs: Vec<f64> =
        (0..samples).map(|i| s0 + (s1 - s0) * (i as f64 + 0.5) / samples as f64).collect();
    for e in eig {
        if e.re > s0 && e.re < s1 && e.im.abs() <= region.half_height {
            xs.push(e.re);
        }
    }
    // avoid declared non-real eigenvalues
    for &x in &xs {
        for e in eig {
            if e.im.abs() > IM_TOL * scale && (e.re - x).abs() < 1e-6 && e.im.abs() < region.half_height {
                return Err(SsfError::ConfigInvalid {
                    msg: "probe region contains a non-real eigenvalue".into(),
                });
            }
        }
    }
    let levels = 18usize;
    let mut norms = vec![vec![0.0f64; xs.len()]; levels];
    let mut ys = vec![0.0f64; levels];
    for (j, y_slot) in ys.iter_mut().enumerate() {
        let y = region.half_height * 0.5f64.powi(j as i32);
        *y_slot = y;
        for (i, &x) in xs.iter().enumerate() {
            let z = c64::new(x, y);
            let mut shifted = h.clone();
            for d in 0..h.nrows() {
                shifted[(d, d)] -= z;
            }
            let smin = linalg::smallest_singular_value(&shifted);
            norms[j][i] = 1.0 / smin.max(1e-300);
        }
    }
    let cap = 20usize;
    for n in 0..=cap {
        // q = ||R|| y^{n+1} / <x>^n must not grow toward the axis
        let q = |j: usize| -> f64 {
            let y: f64 = ys[j];
            xs.iter()
                .enumerate()
                .map(|(i, &x)| norms[j][i] * y.powi(n as i32 + 1) / (1.0 + x * x).powf(n as f64 / 2.0))
                .fold(0.0f64, f64::max)
        };
        let q_last = q(levels - 1);
        let q_prev = q(levels - 3);
        if q_last <= q_prev * 1.1 {
            return Ok(n);
        }
    }
    Err(SsfError::GrowthUnbounded { cap })
}

/// Builds an admissible extension with the default order N = n_est + 2.
pub fn default_extension(h: &CMat, eig: &[c64], f: &TestFn) -> Result<Aax> {
    let (sa, sb) = f.support();
    let region = crate::operators::StripRegion::new((sa, sb), 0.5)?;
    let n_est = probe_resolvent_growth(h, eig, &region, 5).unwrap_or(2);
    admissible_extension(f.clone(), (n_est + 2).min(f.max_order() - 1), eig)
}

/// Stone-type formula: (1/2 pi i) int f(lambda) (R(l + i e) - R(l - i e)) dl,
/// Richardson-extrapolated over the epsilon ladder.
pub fn stone_formula(
    h: &CMat,
    eig: &[c64],
    f: &TestFn,
    eps_schedule: &[f64],
) -> Result<CMat> {
    let n = h.nrows();
    let (sa, sb) = f.support();
    let scale = eig.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    // check clearance from non-real eigenvalues
    for e in eig {
        if e.im.abs() > IM_TOL * scale && e.re > sa && e.re < sb {
            let eps_max = eps_schedule.iter().cloned().fold(0.0f64, f64::max);
            if e.im.abs() <= eps_max {
                return Err(SsfError::ConfigInvalid {
                    msg: format!("support contains non-real eigenvalue {e} within the eps ladder"),
                });
            }
        }
    }
    // panel boundaries: support split at real parts of spectrum
    let mut cuts: Vec<f64> = vec![sa, sb];
    for e in eig {
        if e.re > sa && e.re < sb {
            cuts.push(e.re);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut values: Vec<CMat> = Vec::new();
    for &eps in eps_schedule {
        let mut total = linalg::czeros(n, n);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            total += segment_stone(h, f, a, b, eps, n);
        }
        values.push(linalg::scale_mat(&total, c64::new(0.0, -0.5 / std::f64::consts::PI)));
    }
    // entrywise Neville extrapolation to eps = 0
    let mut out = linalg::czeros(n, n);
    let mut max_spread = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let ys: Vec<c64> = values.iter().map(|m| m[(i, j)]).collect();
            let (v, spread) = quad::extrapolate_to_zero(eps_schedule, &ys);
            out[(i, j)] = v;
            max_spread = max_spread.max(spread);
        }
    }
    let scale_out = linalg::frob(&out).max(1e-12);
    if max_spread > 0.05 * scale_out {
        return Err(SsfError::ExtrapolationDiverged { spread: max_spread / scale_out });
    }
    Ok(out)
}

fn segment_stone(h: &CMat, f: &TestFn, a: f64, b: f64, eps: f64, n: usize) -> CMat {
    // adaptive dyadic refinement toward the segment ends (where eigenvalues
    // sit); resolves the Lorentzian width eps.
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    subdivide(a, b, eps, 0, &mut pieces);
    let parts: Vec<CMat> = pieces
        .par_iter()
        .map(|&(pa, pb)| {
            let rule = quad::gauss_legendre(12);
            let mid = 0.5 * (pa + pb);
            let half = 0.5 * (pb - pa);
            let mut acc = linalg::czeros(n, n);
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let lam = mid + half * t;
                let fv = f.eval(lam);
                if fv == 0.0 {
                    continue;
                }
                let (rp, rm) = if n <= 32 {
                    (linalg::small_resolvent(h, c64::new(lam, eps)),
                     linalg::small_resolvent(h, c64::new(lam, -eps)))
                } else {
                    (linalg::resolvent_matrix_raw(h, c64::new(lam, eps)),
                     linalg::resolvent_matrix_raw(h, c64::new(lam, -eps)))
                };
                let w = c64::new(fv * w * half, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc[(i, j)] += w * (rp[(i, j)] - rm[(i, j)]);
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = linalg::czeros(n, n);
    for p in parts {
        out += &p;
    }
    out
}

fn subdivide(a: f64, b: f64, eps: f64, depth: usize, out: &mut Vec<(f64, f64)>) {
    let len = b - a;
    // resolve structure at scale ~eps near both endpoints
    if len <= eps.max(1e-12) * 2.0 || depth >= 22 {
        out.push((a, b));
        return;
    }
    let third = len / 3.0;
    subdivide(a, a + third, eps, depth + 1, out);
    out.push((a + third, b - third));
    subdivide(b - third, b, eps, depth + 1, out);
}

/// r_omega(H) = R_H(omega)(Id - Pi_complex(H)); verifies the reconstruction
/// R_H(omega) = r_omega(H) + sum (lambda - omega)^{-1} Pi_lambda.
pub fn resolvent_via_calculus(h: &CMat, eig: &[c64], omega: c64) -> Result<CMat> {
    let n = h.nrows();
    let scale = eig.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let interval = (f64::NEG_INFINITY, f64::INFINITY);
    let split = spectral_split(h, eig, interval)?;
    let r = linalg::resolvent_matrix(h, omega, crate::operators::COND_CAP)?;
    let r_omega = &r * &(linalg::cidentity(n) - &split.projector);
    // reconstruction check
    let mut rec = r_omega.clone();
    let mut clusters: Vec<c64> = Vec::new();
    for &e in &split.eigenvalues_complex {
        if !clusters.iter().any(|c| (*c - e).norm() < 1e-8 * scale) {
            clusters.push(e);
        }
    }
    for &lam in &clusters {
        let gap = eig
            .iter()
            .filter(|e| (**e - lam).norm() > 1e-8 * scale)
            .map(|e| (*e - lam).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = (0.5 * gap).min(0.25 * scale).max(1e-6);
        let pi_lam = riesz_projection(h, lam, radius)?;
        let w = (lam - omega).inv();
        for i in 0..n {
            for j in 0..n {
                rec[(i, j)] += w * pi_lam[(i, j)];
            }
        }
    }
    let defect = linalg::frob(&(&rec - &r)) / linalg::frob(&r).max(1e-300);
    if defect > 1e-8 {
        return Err(SsfError::NonIdempotent { defect });
    }
    Ok(r_omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aax::{build_extension, standard_bump, CutoffParams};
    use faer::Mat;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn diag(entries: &[c64]) -> CMat {
        let n = entries.len();
        Mat::from_fn(n, n, |i, j| if i == j { entries[i] } else { c(0.0, 0.0) })
    }

    /// Cauchy–Pompeiu / 1x1 Helffer–Sjostrand oracle: apply_function on the
    /// scalar operator [w] reconstructs f(w) to 1e-6 at order N = 4.
    #[test]
    fn scalar_reconstruction_oracle() {
        let f = standard_bump(0.0, 1.0);
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.5), &[]).unwrap();
        for &w in &[0.3, -0.5, 0.0] {
            let h = diag(&[c(w, 0.0)]);
            let out = apply_function(&h, &ext, &QuadOpts::default()).unwrap();
            assert!(
                (out[(0, 0)] - c(f.eval(w), 0.0)).norm() < 1e-6,
                "w={w}: {:?} vs {}",
                out[(0, 0)],
                f.eval(w)
            );
        }
    }

    #[test]
    fn diagonal_functional_calculus() {
        // H = diag(0, 1), bump at 0 with half-width 0.4 -> diag(f(0), 0).
        let f = standard_bump(0.0, 0.4);
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.3), &[]).unwrap();
        let h = diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let out = apply_function(&h, &ext, &QuadOpts::default()).unwrap();
        assert!((out[(0, 0)] - c(f.eval(0.0), 0.0)).norm() < 1e-6);
        assert!(out[(1, 1)].norm() < 1e-8);
        assert!(out[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn jordan_block_functional_calculus() {
        // f(H) = f(lam) I + f'(lam) N for the Jordan pair.
        let lam = 0.3;
        let v = 0.8;
        let h = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                c(lam, 0.0)
            } else if i == 0 && j == 1 {
                c(v, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let f = standard_bump(0.2, 0.7);
        // Jordan growth exponent 1 -> order >= 3; use 4.
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let out = apply_function(&h, &ext, &QuadOpts::default()).unwrap();
        let f0 = f.eval(lam);
        let f1 = f.eval_derivative(1, lam);
        assert!((out[(0, 0)] - c(f0, 0.0)).norm() < 1e-6);
        assert!((out[(1, 1)] - c(f0, 0.0)).norm() < 1e-6);
        assert!((out[(0, 1)] - c(v * f1, 0.0)).norm() < 1e-6, "{:?} vs {}", out[(0, 1)], v * f1);
        assert!(out[(1, 0)].norm() < 1e-10);
    }

    #[test]
    fn riesz_projection_diagonal() {
        let h = diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let p = riesz_projection(&h, c(1.0, 0.0), 0.5).unwrap();
        assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(p[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn riesz_projection_jordan_full_space() {
        let lam = c(0.7, 0.0);
        let h = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                lam
            } else if i == 0 && j == 1 {
                c(0.5, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let p = riesz_projection(&h, lam, 0.3).unwrap();
        let defect = linalg::frob(&(&p - &linalg::cidentity(2)));
        assert!(defect < 1e-10, "projection should be I2, defect {defect}");
    }

    #[test]
    fn riesz_projection_rank_one_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        // well-separated eigenvalues via diagonal + small perturbation
        let base = diag(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.5), c(5.0, 0.0)]);
        let pert = Mat::from_fn(n, n, |_, _| c(0.05 * (rng.gen::<f64>() - 0.5), 0.05 * (rng.gen::<f64>() - 0.5)));
        let h = &base + &pert;
        let eig = linalg::eigenvalues(&h);
        // project onto the eigenvalue near 4 + 0.5i
        let lam = eig.iter().copied().min_by(|a, b| {
            (a - c(4.0, 0.5)).norm().total_cmp(&(b - c(4.0, 0.5)).norm())
        }).unwrap();
        let p = riesz_projection(&h, lam, 0.4).unwrap();
        let tr = linalg::trace(&p);
        assert!((tr - c(1.0, 0.0)).norm() < 1e-10, "rank-1 projector trace {tr:?}");
    }

    #[test]
    fn spectral_split_hermitian_is_trivial() {
        let h = diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let split = spectral_split(&h, &eig, (-1.0, 2.0)).unwrap();
        assert!(linalg::frob(&split.projector) == 0.0);
        assert_eq!(split.h_real.nrows(), 2);
        assert!(split.eigenvalues_complex.is_empty());
    }

    #[test]
    fn spectral_split_complex_entry() {
        // diag with v3 complex: projector is rank one onto coordinate 3.
        let h = diag(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.25), c(3.5, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let split = spectral_split(&h, &eig, (-1.0, 4.0)).unwrap();
        let p = &split.projector;
        assert!((p[(2, 2)] - c(1.0, 0.0)).norm() < 1e-10);
        assert!((linalg::trace(p) - c(1.0, 0.0)).norm() < 1e-10);
        // invariants
        let defect = linalg::frob(&(&(p * p) - p));
        assert!(defect < 1e-8);
        let comm = linalg::frob(&(&(&h * p) - &(p * &h)));
        assert!(comm < 1e-8 * linalg::frob(&h));
        assert_eq!(split.h_real.nrows(), 3);
        assert_eq!(split.h_complex.nrows(), 1);
    }

    #[test]
    fn split_two_conjugate_pairs_rank_four() {
        let h = diag(&[
            c(0.0, 0.0),
            c(1.0, 0.4),
            c(1.0, -0.4),
            c(2.0, 0.3),
            c(2.0, -0.3),
            c(3.0, 0.0),
        ]);
        let eig = linalg::eigenvalues(&h);
        let split = spectral_split(&h, &eig, (-1.0, 4.0)).unwrap();
        let tr = linalg::trace(&split.projector);
        assert!((tr - c(4.0, 0.0)).norm() < 1e-9, "rank should be 4, trace {tr:?}");
    }

    #[test]
    fn growth_probe_hermitian_and_jordan() {
        let h = diag(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let region = crate::operators::StripRegion::new((-0.5, 1.5), 0.5).unwrap();
        assert_eq!(probe_resolvent_growth(&h, &eig, &region, 4).unwrap(), 0);

        let hj = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                c(0.5, 0.0)
            } else if i == 0 && j == 1 {
                c(0.7, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let eigj = linalg::eigenvalues(&hj);
        let region = crate::operators::StripRegion::new((0.0, 1.0), 0.5).unwrap();
        assert_eq!(probe_resolvent_growth(&hj, &eigj, &region, 4).unwrap(), 1);
    }

    #[test]
    fn stone_matches_apply_function_diagonal() {
        let h = diag(&[c(0.1, 0.0), c(0.6, 0.0), c(1.2, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let f = standard_bump(0.4, 0.5);
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let via_quad = apply_function(&h, &ext, &QuadOpts::default()).unwrap();
        let eps: Vec<f64> = (0..7).map(|k| 1e-2 / 2f64.powi(k)).collect();
        let via_stone = stone_formula(&h, &eig, &f, &eps).unwrap();
        let diff = linalg::frob(&(&via_quad - &via_stone));
        assert!(diff < 1e-5, "stone vs quad diff {diff}");
    }

    #[test]
    fn stone_jordan_closed_form() {
        let lam = 0.5;
        let v = 0.6;
        let h = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                c(lam, 0.0)
            } else if i == 0 && j == 1 {
                c(v, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let eig = vec![c(lam, 0.0), c(lam, 0.0)];
        let f = standard_bump(0.4, 0.5);
        let eps: Vec<f64> = (0..7).map(|k| 1e-2 / 2f64.powi(k)).collect();
        let out = stone_formula(&h, &eig, &f, &eps).unwrap();
        let f0 = f.eval(lam);
        let f1 = f.eval_derivative(1, lam);
        assert!((out[(0, 0)] - c(f0, 0.0)).norm() < 1e-6);
        assert!((out[(0, 1)] - c(v * f1, 0.0)).norm() < 1e-5, "{:?} vs {}", out[(0, 1)], v * f1);
    }

    #[test]
    fn resolvent_reconstruction_with_complex_block() {
        let h = diag(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.4), c(3.5, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let omega = c(0.0, 3.0);
        let r_omega = resolvent_via_calculus(&h, &eig, omega).unwrap();
        // equals R(omega) with the complex entry zeroed
        assert!((r_omega[(0, 0)] - (c(0.0, 0.0) - omega).inv()).norm() < 1e-12);
        assert!(r_omega[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn hermitian_resolvent_via_calculus_is_full() {
        let h = diag(&[c(0.0, 0.0), c(2.0, 0.0)]);
        let eig = linalg::eigenvalues(&h);
        let omega = c(0.5, 1.0);
        let r_omega = resolvent_via_calculus(&h, &eig, omega).unwrap();
        let r = linalg::resolvent_matrix(&h, omega, 1e12).unwrap();
        assert!(linalg::frob(&(&r_omega - &r)) < 1e-12);
    }

    #[test]
    fn morphism_and_vanishing() {
        let h = diag(&[c(0.2, 0.0), c(0.7, 0.0), c(1.5, 0.0)]);
        let f = standard_bump(0.45, 0.45);
        let g = standard_bump(0.45, 0.6);
        let fg = crate::aax::product_fn(f.clone(), g.clone());
        let e_f = build_extension(f, 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let e_g = build_extension(g, 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let e_fg = build_extension(fg, 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let opts = QuadOpts::default();
        let mf = apply_function(&h, &e_f, &opts).unwrap();
        let mg = apply_function(&h, &e_g, &opts).unwrap();
        let mfg = apply_function(&h, &e_fg, &opts).unwrap();
        let defect = linalg::frob(&(&mfg - &(&mf * &mg)));
        assert!(defect < 1e-5, "morphism defect {defect}");

        // vanishing: supp f disjoint from spectrum
        let f_off = standard_bump(3.0, 0.5);
        let e_off = build_extension(f_off, 4, CutoffParams::new(3.0, 0.4), &[]).unwrap();
        let m_off = apply_function(&h, &e_off, &opts).unwrap();
        assert!(linalg::frob(&m_off) < 1e-8);
    }

    #[test]
    fn eig_fast_path_matches_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        // real-spectrum diagonalizable: P D P^{-1}
        let d = diag(&[c(0.0, 0.0), c(0.3, 0.0), c(0.8, 0.0), c(1.1, 0.0), c(1.7, 0.0), c(2.2, 0.0)]);
        let p = Mat::from_fn(n, n, |i, j| {
            if i == j { c(1.0, 0.0) } else { c(0.25 * (rng.gen::<f64>() - 0.5), 0.25 * (rng.gen::<f64>() - 0.5)) }
        });
        let lu = linalg::Lu::new(&p);
        let h = &(&p * &d) * &lu.inverse();
        let f = standard_bump(0.7, 0.6);
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        let via_quad = apply_function(&h, &ext, &QuadOpts::default()).unwrap();
        let (vals, pp) = linalg::eigen_pairs(&h);
        let ppinv = linalg::Lu::new(&pp).inverse();
        let via_eig = apply_function_via_eig(&vals, &pp, &ppinv, &f, 2.2);
        let rel = linalg::frob(&(&via_quad - &via_eig)) / linalg::frob(&via_eig).max(1e-300);
        assert!(rel < 1e-4, "fast path vs quadrature rel {rel}");
    }
}
