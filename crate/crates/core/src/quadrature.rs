//! Gauss–Legendre rules and power-law substitutions for weakly singular integrands.

use std::sync::OnceLock;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Build an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
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
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

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

/// Shared 32-point rule.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Shared 8-point rule.
pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// `∫_a^b f(u) (u − s)^(alpha − 1) du` for `s ≤ a < b`, `alpha > 0`.
///
/// Substitutes `w = (u − s)^alpha`, which turns the weight into a constant,
/// and applies `rule` on `panels` equal pieces of the transformed interval.
pub fn left_power<F: FnMut(f64) -> f64>(
    mut f: F,
    s: f64,
    alpha: f64,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    panels: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let wa = (a - s).max(0.0).powf(alpha);
    let wb = (b - s).powf(alpha);
    let inv = 1.0 / alpha;
    let step = (wb - wa) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = wa + p as f64 * step;
        let hi = if p + 1 == panels { wb } else { lo + step };
        total += rule.integrate(lo, hi, |w| f(s + w.powf(inv)));
    }
    total * inv
}

/// `∫_a^b f(u) (s − u)^(alpha − 1) du` for `a < b ≤ s`, `alpha > 0`.
pub fn right_power<F: FnMut(f64) -> f64>(
    mut f: F,
    s: f64,
    alpha: f64,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    panels: usize,
) -> f64 {
    left_power(|v| f(s - v), 0.0, alpha, s - b, s - a, rule, panels)
}

/// `∫_a^b f(u) (u − s)^(alpha − 1) du` for `s ≤ a < b` on geometrically graded
/// panels, so that the smooth factor `f` may vary on the scale of `u − s` or `s`.
pub fn left_power_graded<F: FnMut(f64) -> f64>(
    mut f: F,
    s: f64,
    alpha: f64,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let span = b - s;
    let mut d = a - s;
    let mut total = 0.0;
    if d <= 0.0 {
        // First panel touches the singularity; size it by the distance to the
        // origin, where the kernel's other power factor lives.
        let first = span.min(s.abs().max(span * 1e-12));
        total += left_power(&mut f, s, alpha, s, s + first, rule, 1);
        d = first;
    }
    while d < span {
        let next = (2.0 * d).min(span);
        total += left_power(&mut f, s, alpha, s + d, s + next, rule, 1);
        d = next;
    }
    total
}

/// `∫_a^b g(r) dr` where `g(r) ≈ (r − a)^pa` near `a` and `(b − r)^pb` near `b`,
/// with `pa, pb > −1`. Each half of the interval is mapped with the matching
/// power substitution.
pub fn endpoint_power<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, pa: f64, pb: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let rule = gl32();
    let left = left_power(|u| g(u) * (u - a).powf(-pa), a, pa + 1.0, a, m, rule, panels);
    let right = right_power(|u| g(u) * (b - u).powf(-pb), b, pb + 1.0, m, b, rule, panels);
    left + right
}

/// Nodes and weights for `∫_a^b g(r) dr` when `g(r) ≈ (r − a)^(alpha − 1)`
/// near `a` (`from_left`) or `(b − r)^(alpha − 1)` near `b` (otherwise).
/// The Jacobian of the power substitution is folded into the weights.
pub fn power_nodes(a: f64, b: f64, alpha: f64, from_left: bool, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let inv = 1.0 / alpha;
    let wb = (b - a).powf(alpha);
    rule.mapped(0.0, wb)
        .map(|(w, wt)| {
            let d = w.powf(inv);
            let jac = inv * w.powf(inv - 1.0);
            let x = if from_left { a + d } else { b - d };
            (x, wt * jac)
        })
        .collect()
}
