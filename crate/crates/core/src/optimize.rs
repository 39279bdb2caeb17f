//! One-dimensional minimization: grid pre-scan followed by golden-section.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// Coarse grid index of the pre-scan winner (`None` for a bare golden search).
    pub grid_index: Option<usize>,
    pub grid_len: usize,
}

impl Minimum {
    /// True when the coarse scan put the minimum on the first or last grid point.
    pub fn on_grid_edge(&self) -> bool {
        matches!(self.grid_index, Some(k) if k == 0 || k + 1 == self.grid_len)
    }
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    let (x, value) = if fc <= fd { (c, fc) } else { (d, fd) };
    Minimum { x, value, grid_index: None, grid_len: 0 }
}

/// Evaluates `f` on `points` uniform nodes spanning `[lo, hi]`, then refines the
/// best node's neighbourhood by golden-section search.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Minimum {
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let node = |k: usize| if k + 1 == points { hi } else { lo + step * k as f64 };
    let mut best = (0, f64::INFINITY);
    for k in 0..points {
        let v = f(node(k));
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    let a = node(k.saturating_sub(1));
    let b = node((k + 1).min(points - 1));
    let mut refined = golden_section(&mut f, a, b, tol);
    if best.1 < refined.value {
        refined.x = node(k);
        refined.value = best.1;
    }
    refined.grid_index = Some(k);
    refined.grid_len = points;
    refined
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let m = golden_section(|x| (x - 1.234).powi(2) + 3.0, -5.0, 5.0, 1e-10);
        // a smooth minimum is only resolvable to ~sqrt(machine epsilon)
        assert!((m.x - 1.234).abs() < 1e-7);
        assert!((m.value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn finds_kink() {
        let m = golden_section(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((m.x - 0.3).abs() < 1e-11);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        // shallow well at -2, deep well at 3
        let f = |x: f64| -(-(x + 2.0).powi(2)).exp() - 2.0 * (-(x - 3.0).powi(2) * 4.0).exp();
        let m = scan_then_golden(f, -5.0, 5.0, 64, 1e-10);
        assert!((m.x - 3.0).abs() < 1e-6);
        assert!(!m.on_grid_edge());
    }

    #[test]
    fn reports_edge() {
        let m = scan_then_golden(|x| x, 0.0, 1.0, 16, 1e-10);
        assert!(m.on_grid_edge());
        assert!(m.x < 1e-9);
    }
}
