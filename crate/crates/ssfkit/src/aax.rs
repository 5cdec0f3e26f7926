//! Compactly supported smooth test functions and their admissible
//! almost-analytic extensions.
//!
//! An extension of order N of f is
//!   f~(x, y) = sum_{k<=N} f^(k)(x) (iy)^k / k!  * chi(x, y),
//! with chi(x, y) = tau(psi(x, y)), psi(x, y) = (y / b) <a> / <x>,
//! and tau a smooth step equal to 1 on |s| < 1/2 and 0 on |s| > 1.
//! The dbar derivative then vanishes like |Im z|^N at the real axis.

use crate::error::{Result, SsfError};
use crate::jet::Jet;
use faer::c64;
use std::sync::Arc;

/// A smooth compactly supported test function with derivative access.
pub trait TestFunction: Send + Sync {
    /// Closed support [a, b]; all derivatives vanish outside.
    fn support(&self) -> (f64, f64);
    /// Highest derivative order available at full accuracy.
    fn max_order(&self) -> usize;
    /// Taylor jet of the function at x, to the given order.
    fn jet(&self, x: f64, order: usize) -> Jet;

    fn eval(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    fn eval_derivative(&self, k: usize, x: f64) -> f64 {
        self.jet(x, k).derivative(k)
    }
}

pub type TestFn = Arc<dyn TestFunction>;

/// exp(-1/u) for u > 0, else 0, as a jet in u.
fn flat_exp_jet(u: &Jet) -> Jet {
    if u.value() <= 0.0 {
        return Jet::constant(0.0, u.order());
    }
    u.recip().scale(-1.0).exp()
}

/// The standard bump exp(-1/(1-t^2)) on |t| < 1 with t = (x-center)/half_width.
#[derive(Debug, Clone)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

/// `standard_bump(center, half_width)`: the classical C_c^infinity bump.
pub fn standard_bump(center: f64, half_width: f64) -> TestFn {
    assert!(half_width > 0.0, "half_width must be positive");
    Arc::new(Bump { center, half_width })
}

impl TestFunction for Bump {
    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    fn max_order(&self) -> usize {
        14
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        let t0 = (x - self.center) / self.half_width;
        if t0.abs() >= 1.0 {
            return Jet::constant(0.0, order);
        }
        let mut t = Jet::variable(t0, order);
        // d t / d x = 1 / half_width.
        if order >= 1 {
            t.c[1] = 1.0 / self.half_width;
        }
        let one = Jet::constant(1.0, order);
        let u = one.sub(&t.mul(&t));
        flat_exp_jet(&u)
    }
}

/// Smoothed indicator of [a, b]: rises from 0 to 1 across [a - w/2, a + w/2],
/// equals exactly 1 on [a + w/2, b - w/2], falls back to 0 across
/// [b - w/2, b + w/2]. Plateau values are exact by construction.
#[derive(Debug, Clone)]
pub struct SmoothedIndicator {
    pub a: f64,
    pub b: f64,
    pub width: f64,
}

pub fn smoothed_indicator(a: f64, b: f64, width: f64) -> TestFn {
    assert!(width > 0.0 && b - a > width, "indicator needs b - a > width");
    Arc::new(SmoothedIndicator { a, b, width })
}

/// Smooth step s(u) = h(u) / (h(u) + h(1-u)) with h(u) = exp(-1/u); exactly 0
/// for u <= 0 and exactly 1 for u >= 1.
fn smooth_step_jet(u: &Jet) -> Jet {
    let order = u.order();
    if u.value() <= 0.0 {
        return Jet::constant(0.0, order);
    }
    if u.value() >= 1.0 {
        return Jet::constant(1.0, order);
    }
    let h = flat_exp_jet(u);
    let one = Jet::constant(1.0, order);
    let h1 = flat_exp_jet(&one.sub(u));
    h.div(&h.add(&h1))
}

impl TestFunction for SmoothedIndicator {
    fn support(&self) -> (f64, f64) {
        (self.a - 0.5 * self.width, self.b + 0.5 * self.width)
    }

    fn max_order(&self) -> usize {
        12
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        let w = self.width;
        let mut up = Jet::variable((x - (self.a - 0.5 * w)) / w, order);
        if order >= 1 {
            up.c[1] = 1.0 / w;
        }
        let mut down = Jet::variable(((self.b + 0.5 * w) - x) / w, order);
        if order >= 1 {
            down.c[1] = -1.0 / w;
        }
        smooth_step_jet(&up).mul(&smooth_step_jet(&down))
    }
}

/// Pointwise product of two test functions (used by the algebra-morphism checks).
pub struct ProductFn {
    pub f: TestFn,
    pub g: TestFn,
}

pub fn product_fn(f: TestFn, g: TestFn) -> TestFn {
    Arc::new(ProductFn { f, g })
}

impl TestFunction for ProductFn {
    fn support(&self) -> (f64, f64) {
        let (a1, b1) = self.f.support();
        let (a2, b2) = self.g.support();
        (a1.max(a2), b1.min(b2).max(a1.max(a2)))
    }

    fn max_order(&self) -> usize {
        self.f.max_order().min(self.g.max_order())
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        self.f.jet(x, order).mul(&self.g.jet(x, order))
    }
}

/// Linear combination a*f + b*g.
pub struct LinCombFn {
    pub a: f64,
    pub f: TestFn,
    pub b: f64,
    pub g: TestFn,
}

pub fn lincomb_fn(a: f64, f: TestFn, b: f64, g: TestFn) -> TestFn {
    Arc::new(LinCombFn { a, f, b, g })
}

impl TestFunction for LinCombFn {
    fn support(&self) -> (f64, f64) {
        let (a1, b1) = self.f.support();
        let (a2, b2) = self.g.support();
        (a1.min(a2), b1.max(b2))
    }

    fn max_order(&self) -> usize {
        self.f.max_order().min(self.g.max_order())
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        self.f.jet(x, order).scale(self.a).add(&self.g.jet(x, order).scale(self.b))
    }
}

/// Cutoff parameters of the plateau region: chi = tau((y/b_height) <a_scale>/<x>).
#[derive(Debug, Clone, Copy)]
pub struct CutoffParams {
    /// Horizontal scale parameter (the paper's fraktur a).
    pub a_scale: f64,
    /// Plateau height parameter (the paper's fraktur b).
    pub b_height: f64,
}

impl CutoffParams {
    pub fn new(a_scale: f64, b_height: f64) -> Self {
        assert!(b_height > 0.0);
        CutoffParams { a_scale, b_height }
    }
}

fn angle_bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// An almost-analytic extension of order N of a test function.
pub struct AlmostAnalyticExtension {
    pub f: TestFn,
    pub order: usize,
    pub cutoff: CutoffParams,
}

pub type Aax = Arc<AlmostAnalyticExtension>;

/// Builds an extension of order `n`, checking admissibility against the
/// declared non-real eigenvalues: the support of chi must not contain any.
pub fn build_extension(
    f: TestFn,
    n: usize,
    cutoff: CutoffParams,
    declared_eigenvalues: &[c64],
) -> Result<Aax> {
    if n + 1 > f.max_order() {
        return Err(SsfError::OrderTooHigh { requested: n, available: f.max_order() });
    }
    let ext = AlmostAnalyticExtension { f, order: n, cutoff };
    for &ev in declared_eigenvalues {
        if ev.im != 0.0 && ext.in_chi_support(ev.re, ev.im) {
            return Err(SsfError::InadmissibleCutoff { eig: ev });
        }
    }
    Ok(Arc::new(ext))
}

/// Picks a plateau height below the declared non-real eigenvalues and builds
/// an admissible extension automatically.
pub fn admissible_extension(f: TestFn, n: usize, declared_eigenvalues: &[c64]) -> Result<Aax> {
    let (a, b) = f.support();
    let a_scale = a.abs().max(b.abs()).max(1.0);
    let mut b_height = 0.5 * a.abs().max(b.abs()).max(1.0);
    for &ev in declared_eigenvalues {
        if ev.im != 0.0 {
            // keep supp chi strictly below the eigenvalue at its abscissa
            let cap = 0.4 * ev.im.abs() * angle_bracket(a_scale) / angle_bracket(ev.re);
            b_height = b_height.min(cap);
        }
    }
    if b_height <= 0.0 || !b_height.is_finite() {
        return Err(SsfError::InadmissibleCutoff {
            eig: declared_eigenvalues.first().copied().unwrap_or(c64::new(0.0, 0.0)),
        });
    }
    build_extension(f, n, CutoffParams::new(a_scale, b_height), declared_eigenvalues)
}

impl AlmostAnalyticExtension {
    /// psi(x, y) = (y / b) <a> / <x>; supp chi = { |psi| <= 1 }.
    fn psi(&self, x: f64, y: f64) -> f64 {
        (y / self.cutoff.b_height) * angle_bracket(self.cutoff.a_scale) / angle_bracket(x)
    }

    pub fn in_chi_support(&self, x: f64, y: f64) -> bool {
        self.psi(x, y).abs() < 1.0
    }

    /// Height of the chi support above abscissa x.
    pub fn chi_height(&self, x: f64) -> f64 {
        self.cutoff.b_height * angle_bracket(x) / angle_bracket(self.cutoff.a_scale)
    }

    fn tau_pair(&self, s: f64) -> (f64, f64) {
        // tau(s) = step(2(1 - |s|)), tau' by chain rule with sign(s).
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let mut u = Jet::variable(2.0 * (1.0 - s.abs()), 1);
        u.c[1] = -2.0 * sign;
        let t = smooth_step_jet(&u);
        (t.derivative(0), t.derivative(1))
    }

    /// chi and its (dx, dy) gradient at (x, y).
    fn chi_grad(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let psi = self.psi(x, y);
        if psi.abs() >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let (tau, dtau) = self.tau_pair(psi);
        let ax = angle_bracket(self.cutoff.a_scale);
        let bx = angle_bracket(x);
        let psi_x = -(y / self.cutoff.b_height) * ax * x / (bx * bx * bx);
        let psi_y = ax / (self.cutoff.b_height * bx);
        (tau, dtau * psi_x, dtau * psi_y)
    }

    /// f~(z): the truncated Taylor sum times chi.
    pub fn value(&self, z: c64) -> c64 {
        let (x, y) = (z.re, z.im);
        let (chi, _, _) = self.chi_grad(x, y);
        if chi == 0.0 {
            return c64::new(0.0, 0.0);
        }
        self.taylor_sum(x, y) * chi
    }

    fn taylor_sum(&self, x: f64, y: f64) -> c64 {
        let jet = self.f.jet(x, self.order);
        let iy = c64::new(0.0, y);
        // sum_k f^(k)(x) (iy)^k / k! = sum_k c_k (iy)^k with jet coefficients.
        let mut acc = c64::new(0.0, 0.0);
        for k in (0..=self.order).rev() {
            acc = acc * iy + c64::new(jet.c[k], 0.0);
        }
        acc
    }

    /// dbar f~(z) = 1/2 f^(N+1)(x) (iy)^N / N! chi
    ///            + 1/2 [sum_{k<=N} f^(k)(x)(iy)^k/k!] (chi_x + i chi_y).
    /// Exactly zero outside supp chi and outside supp f x R.
    pub fn dbar(&self, z: c64) -> c64 {
        let (x, y) = (z.re, z.im);
        let (sa, sb) = self.f.support();
        if x <= sa || x >= sb {
            return c64::new(0.0, 0.0);
        }
        let (chi, chi_x, chi_y) = self.chi_grad(x, y);
        if chi == 0.0 && chi_x == 0.0 && chi_y == 0.0 {
            return c64::new(0.0, 0.0);
        }
        let jet = self.f.jet(x, self.order + 1);
        let iy = c64::new(0.0, y);
        // leading term: c_{N+1} * (N+1) * (iy)^N  ==  f^(N+1)(x) (iy)^N / N!
        let mut iy_pow = c64::new(1.0, 0.0);
        let mut sum = c64::new(0.0, 0.0);
        for k in 0..=self.order {
            sum += c64::new(jet.c[k], 0.0) * iy_pow;
            if k < self.order {
                iy_pow *= iy;
            }
        }
        // iy_pow now holds (iy)^N.
        let lead = c64::new(jet.c[self.order + 1] * (self.order as f64 + 1.0), 0.0) * iy_pow;
        let dbar_chi = c64::new(chi_x, chi_y);
        (lead * chi + sum * dbar_chi) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_adaptive;

    #[test]
    fn bump_value_at_center() {
        let f = standard_bump(0.0, 1.0);
        assert!((f.eval(0.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bump_flat_at_edges() {
        let f = standard_bump(0.0, 1.0);
        for k in 0..=8 {
            assert_eq!(f.eval_derivative(k, 1.0), 0.0);
            assert_eq!(f.eval_derivative(k, -1.0), 0.0);
            assert!(f.eval_derivative(k, 0.9999).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn bump_derivative_integrates_to_zero() {
        let f = standard_bump(0.3, 0.7);
        let (int, ok) = integrate_adaptive(&|x| f.eval_derivative(1, x), -0.5, 1.1, 1e-13, 1 << 12);
        assert!(ok);
        assert!(int.abs() < 1e-12);
    }

    #[test]
    fn derivative_finite_difference_consistency() {
        // |f^(k)(x+h) - f^(k)(x) - h f^(k+1)(x)| = O(h^2) spot checks.
        let f = standard_bump(0.0, 1.0);
        for &x in &[-0.6, -0.2, 0.1, 0.5, 0.8] {
            for k in 0..=5 {
                let h = 1e-5;
                let lhs = f.eval_derivative(k, x + h) - f.eval_derivative(k, x)
                    - h * f.eval_derivative(k + 1, x);
                let scale = f.eval_derivative(k + 2, x).abs().max(1.0);
                assert!(lhs.abs() < 5.0 * h * h * scale, "k={k} x={x} lhs={lhs:.3e}");
            }
        }
    }

    #[test]
    fn indicator_plateau_exact() {
        let f = smoothed_indicator(0.0, 1.0, 0.1);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.08), 1.0);
        assert_eq!(f.eval(-0.08), 0.0);
        assert_eq!(f.eval(1.2), 0.0);
        assert!(f.eval(0.0) > 0.0 && f.eval(0.0) < 1.0);
    }

    #[test]
    fn extension_restricts_to_f_on_axis() {
        let f = standard_bump(0.2, 0.8);
        let ext = build_extension(f.clone(), 4, CutoffParams::new(1.0, 0.5), &[]).unwrap();
        for i in 0..1000 {
            let x = -0.7 + 1.9 * (i as f64) / 999.0;
            let v = ext.value(c64::new(x, 0.0));
            assert_eq!(v.im, 0.0);
            assert!((v.re - f.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn dbar_vanishes_on_axis_and_off_support() {
        let f = standard_bump(0.0, 1.0);
        let ext = build_extension(f, 3, CutoffParams::new(1.0, 0.4), &[]).unwrap();
        assert_eq!(ext.dbar(c64::new(0.3, 0.0)).norm(), 0.0);
        assert_eq!(ext.dbar(c64::new(2.5, 0.1)).norm(), 0.0);
        assert_eq!(ext.dbar(c64::new(0.3, 5.0)).norm(), 0.0);
    }

    #[test]
    fn dbar_decay_order() {
        // log |dbar f~| vs log |y| slope >= N - 0.1 as y -> 0.
        for n in [2usize, 3, 4] {
            let f = standard_bump(0.0, 1.0);
            let ext = build_extension(f, n, CutoffParams::new(1.0, 0.4), &[]).unwrap();
            let xs = [-0.5, -0.1, 0.2, 0.6];
            let mut min_slope = f64::INFINITY;
            for &x in &xs {
                let y1 = 1e-3;
                let y2 = 1e-4;
                let d1 = ext.dbar(c64::new(x, y1)).norm();
                let d2 = ext.dbar(c64::new(x, y2)).norm();
                if d1 > 0.0 && d2 > 0.0 {
                    min_slope = min_slope.min((d1 / d2).ln() / (y1 / y2).ln());
                }
            }
            assert!(min_slope >= n as f64 - 0.1, "N={n} slope={min_slope}");
        }
    }

    #[test]
    fn admissibility_geometry() {
        // Declared eigenvalue at 0.5 + 0.1i: plateau height 0.05 admissible,
        // 0.2 not.
        let ev = [c64::new(0.5, 0.1)];
        let f = standard_bump(0.5, 0.4);
        assert!(build_extension(f.clone(), 3, CutoffParams::new(0.5, 0.05), &ev).is_ok());
        let bad = build_extension(f, 3, CutoffParams::new(0.5, 0.2), &ev);
        assert!(matches!(bad, Err(SsfError::InadmissibleCutoff { .. })));
    }

    /// dbar must be the actual Wirtinger derivative of `value`:
    /// dbar f~ = (d/dx + i d/dy) f~ / 2, checked by central differences.
    /// (The Cauchy–Pompeiu reconstruction oracle lives with the strip
    /// quadrature in the functional-calculus tests.)
    #[test]
    fn dbar_matches_finite_difference() {
        let f = standard_bump(0.1, 0.9);
        let ext = build_extension(f, 4, CutoffParams::new(1.0, 0.5), &[]).unwrap();
        let h = 1e-5;
        for &(x, y) in &[(0.1, 0.2), (-0.4, 0.1), (0.5, -0.3), (0.3, 0.45), (0.0, 0.6)] {
            let fx = (ext.value(c64::new(x + h, y)) - ext.value(c64::new(x - h, y)))
                / c64::new(2.0 * h, 0.0);
            let fy = (ext.value(c64::new(x, y + h)) - ext.value(c64::new(x, y - h)))
                / c64::new(2.0 * h, 0.0);
            let fd = (fx + c64::new(0.0, 1.0) * fy) * 0.5;
            let db = ext.dbar(c64::new(x, y));
            assert!(
                (fd - db).norm() < 1e-7 + 1e-4 * db.norm(),
                "at ({x},{y}): fd {fd:?} vs dbar {db:?}"
            );
        }
    }
}
