//! Adaptive Simpson integration, cumulative Hermite tables and bisection.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;

/// Integral of `f` over `[a, b]` to absolute tolerance `tol` (signed for `b < a`).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    // tolerances below round-off of the partial sum cannot be met
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || diff.abs() <= 15.0 * tol.max(floor) {
        left + right + diff / 15.0
    } else {
        refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Bisection for a root of `f` bracketed by `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bisection(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Running integral `F(s) = int_{origin}^{s} f` tabulated on a lattice and
/// evaluated between nodes by cubic Hermite interpolation (`F' = f` is known
/// exactly at every node).
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CumulativeTable {
    pub fn build<F: Fn(f64) -> f64>(f: &F, nodes: Vec<f64>, origin: f64, tol: f64) -> Self {
        assert!(nodes.len() >= 2);
        let span = nodes[nodes.len() - 1] - nodes[0];
        let mut values = Vec::with_capacity(nodes.len());
        let offset = adaptive_simpson(f, origin, nodes[0], tol * 0.1);
        let mut acc = offset;
        values.push(acc);
        for w in nodes.windows(2) {
            let local = tol * (w[1] - w[0]) / span;
            acc += adaptive_simpson(f, w[0], w[1], local);
            values.push(acc);
        }
        let slopes = nodes.iter().map(|&s| f(s)).collect();
        Self { nodes, values, slopes }
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn eval(&self, s: f64) -> Option<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        let slack = 1e-12 * (hi - lo).max(1.0);
        if !(s >= lo - slack && s <= hi + slack) {
            return None;
        }
        let s = s.clamp(lo, hi);
        let k = match self.nodes.partition_point(|&n| n <= s) {
            0 => 0,
            p if p >= self.nodes.len() => self.nodes.len() - 2,
            p => p - 1,
        };
        let h = self.nodes[k + 1] - self.nodes[k];
        let u = (s - self.nodes[k]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        Some(h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_gaussian() {
        let cubic = |x: f64| x * x * x - 2.0 * x + 1.0;
        assert!((adaptive_simpson(&cubic, 0.0, 2.0, 1e-12) - 2.0).abs() < 1e-13);
        let gauss = |x: f64| (-x * x).exp();
        let v = adaptive_simpson(&gauss, -8.0, 8.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        assert_eq!(adaptive_simpson(&gauss, 1.0, 1.0, 1e-9), 0.0);
        assert!((adaptive_simpson(&gauss, 1.0, 0.0, 1e-12) + adaptive_simpson(&gauss, 0.0, 1.0, 1e-12)).abs() < 1e-14);
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn table_matches_direct_integration() {
        let f = |x: f64| 1.0 / (1.0 - 0.95 * (-(x - 2.0) * (x - 2.0)).exp());
        let nodes: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let t = CumulativeTable::build(&f, nodes, 0.0, 1e-11);
        for &s in &[0.0, 0.123, 1.9999, 2.0005, 3.3333, 4.0] {
            let direct = adaptive_simpson(&f, 0.0, s, 1e-12);
            assert!((t.eval(s).unwrap() - direct).abs() < 1e-9, "{s}");
        }
        assert!(t.eval(4.5).is_none());
        assert!(t.eval(-0.1).is_none());
    }
}
