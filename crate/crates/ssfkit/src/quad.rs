//! Gauss–Legendre rules and small quadrature utilities.

use faer::c64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn gl_cache() -> &'static Mutex<HashMap<usize, Arc<GaussLegendre>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// n-point rule, cached. Nodes via Newton on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    assert!(n >= 1);
    if let Some(r) = gl_cache().lock().unwrap().get(&n) {
        return r.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    let rule = Arc::new(GaussLegendre { nodes, weights });
    gl_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    if n == 1 {
        return (x, 1.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed n-point GL integral of f over [a, b].
pub fn integrate_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Complex-valued fixed GL integral.
pub fn integrate_gl_c<F: Fn(f64) -> c64>(f: &F, a: f64, b: f64, n: usize) -> c64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = c64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += f(mid + half * x) * *w;
    }
    s * c64::new(half, 0.0)
}

/// Adaptive panel-doubling GL quadrature for complex integrands.
/// Doubles the panel count until successive values agree to `rel_tol`.
pub fn integrate_adaptive_c<F: Fn(f64) -> c64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> (c64, bool) {
    let order = 16;
    let mut panels = 2usize;
    let mut prev = panel_sum_c(f, a, b, panels, order);
    loop {
        panels *= 2;
        let cur = panel_sum_c(f, a, b, panels, order);
        let scale = cur.norm().max(1e-300);
        if (cur - prev).norm() <= rel_tol * scale.max(1e-14) {
            return (cur, true);
        }
        if panels >= max_panels {
            return (cur, false);
        }
        prev = cur;
    }
}

fn panel_sum_c<F: Fn(f64) -> c64>(f: &F, a: f64, b: f64, panels: usize, order: usize) -> c64 {
    let h = (b - a) / panels as f64;
    let vals: Vec<c64> = (0..panels)
        .map(|i| integrate_gl_c(f, a + i as f64 * h, a + (i + 1) as f64 * h, order))
        .collect();
    pairwise_sum(&vals)
}

/// Real adaptive quadrature (wraps the complex one).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> (f64, bool) {
    let (v, ok) = integrate_adaptive_c(&|x| c64::new(f(x), 0.0), a, b, rel_tol, max_panels);
    (v.re, ok)
}

/// Deterministic pairwise summation: the reduction tree depends only on the
/// slice length, so results are reproducible for a fixed node set.
pub fn pairwise_sum(v: &[c64]) -> c64 {
    match v.len() {
        0 => c64::new(0.0, 0.0),
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Polynomial (Neville) extrapolation of samples (x_i, y_i) to x = 0.
/// Returns (value, spread of the last two column entries) as a crude error cue.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[c64]) -> (c64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut tab: Vec<c64> = ys.to_vec();
    let mut last_diag = tab[n - 1];
    let mut prev_diag = tab[n - 1];
    for level in 1..n {
        for i in (level..n).rev() {
            let xi = xs[i];
            let xil = xs[i - level];
            // Lagrange update for P(0).
            tab[i] = (tab[i] * xil - tab[i - 1] * xi) * (1.0 / (xil - xi));
        }
        prev_diag = last_diag;
        last_diag = tab[n - 1];
    }
    ((last_diag), (last_diag - prev_diag).norm())
}
