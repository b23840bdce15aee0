//! One-dimensional quadrature used by the kernel construction and the oracles.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Rule applied on `panels` equal sub-intervals of `[a, b]`.
    pub fn composite(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(&f, lo, lo + h)
            })
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980523733,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

fn kronrod21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = half * XGK[i];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod (10/21) integration to absolute tolerance `tol`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Estimate { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = kronrod21(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut error = e;
    while error > tol && pieces.len() < MAX_INTERVALS {
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let (v, _) = kronrod21(&f, lo, hi);
            pieces.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = kronrod21(&f, lo, mid);
        let (v2, e2) = kronrod21(&f, mid, hi);
        error += e1 + e2 - pe;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
        if pieces.len() % 64 == 0 {
            error = pieces.iter().map(|p| p.3).sum();
        }
    }
    let value = pieces.iter().map(|p| p.2).sum();
    error = pieces.iter().map(|p| p.3).sum();
    Estimate { value, error, converged: error <= tol }
}

/// Adaptive integration over consecutive breakpoints, sharing the tolerance.
pub fn adaptive_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Estimate {
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    let mut out = Estimate { value: 0.0, error: 0.0, converged: true };
    for w in breaks.windows(2) {
        let e = adaptive(&f, w[0], w[1], tol / pieces);
        out.value += e.value;
        out.error += e.error;
        out.converged &= e.converged;
    }
    out
}

/// Tanh-sinh (double exponential) quadrature on a finite interval.
///
/// Tolerates integrable singularities at either endpoint. `f` receives the
/// abscissa together with its distance to the nearer endpoint, so callers can
/// evaluate singular factors without cancellation once the abscissa itself
/// rounds onto the endpoint. Non-finite values are dropped.
pub fn tanh_sinh(f: impl Fn(f64, f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    let half = 0.5 * (b - a);
    let t_max = 4.0;
    let eval = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let cs = s.cosh();
        // Distance from the nearer endpoint in units of `half`.
        let gap = 1.0 / (s.abs().exp() * cs);
        let w = 0.5 * PI * t.cosh() / (cs * cs);
        let dist = half * gap;
        let x = if t < 0.0 { a + dist } else { b - dist };
        if dist <= 0.0 {
            return 0.0;
        }
        let v = f(x, dist);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut value = half * h * sum;
    let mut error = f64::INFINITY;
    for _ in 0..10 {
        h *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            extra += eval(t) + eval(-t);
            k += 2;
        }
        sum += extra;
        let next = half * h * sum;
        error = (next - value).abs();
        value = next;
        if error <= tol {
            break;
        }
    }
    Estimate { value, error, converged: error <= tol }
}
