//! Cubic polynomials on short intervals, with exact `L¹` integrals.

/// `c[0] + c[1] t + c[2] t² + c[3] t³` in a local variable `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub c: [f64; 4],
}

impl Cubic {
    pub const ZERO: Cubic = Cubic { c: [0.0; 4] };

    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        Self { c: [c0, c1, c2, c3] }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }

    /// Hermite cubic on `[0, w]` with the given end values and slopes.
    pub fn hermite(w: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> Self {
        let dy = y1 - y0;
        Self::new(
            y0,
            m0,
            (3.0 * dy - w * (2.0 * m0 + m1)) / (w * w),
            (w * (m0 + m1) - 2.0 * dy) / (w * w * w),
        )
    }

    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.c;
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    pub fn derivative(&self) -> Cubic {
        let c = &self.c;
        Cubic::new(c[1], 2.0 * c[2], 3.0 * c[3], 0.0)
    }

    pub fn scale(&self, s: f64) -> Cubic {
        let c = &self.c;
        Cubic::new(s * c[0], s * c[1], s * c[2], s * c[3])
    }

    pub fn add_constant(&self, v: f64) -> Cubic {
        let mut out = *self;
        out.c[0] += v;
        out
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let c = &self.c;
        (((c[3] / 4.0 * t + c[2] / 3.0) * t + c[1] / 2.0) * t + c[0]) * t
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Roots of the derivative strictly inside `(a, b)`, sorted.
    fn critical_points(&self, a: f64, b: f64) -> Vec<f64> {
        let d = self.derivative().c;
        let (qa, qb, qc) = (d[2], d[1], d[0]);
        let mut r = Vec::with_capacity(2);
        if qa == 0.0 {
            if qb != 0.0 {
                r.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                let q = -0.5 * (qb + qb.signum() * s);
                if q != 0.0 {
                    r.push(q / qa);
                    r.push(qc / q);
                } else {
                    r.push(0.0);
                }
            }
        }
        r.retain(|&t| t > a && t < b && t.is_finite());
        r.sort_by(f64::total_cmp);
        r
    }

    /// Sign changes inside `(a, b)`, located by bisection on monotone pieces.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut knots = vec![a];
        knots.extend(self.critical_points(a, b));
        knots.push(b);
        let mut roots = Vec::new();
        for w in knots.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            let lo_neg = flo < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (self.eval(mid) < 0.0) == lo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
    }

    /// `∫_a^b |p|`, split at the sign changes.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.roots_in(a, b));
        cuts.push(b);
        cuts.windows(2).map(|w| self.integral(w[0], w[1]).abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_matches_ends() {
        let p = Cubic::hermite(0.3, 1.0, -2.0, 0.5, 4.0);
        let d = p.derivative();
        assert!((p.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((d.eval(0.0) + 2.0).abs() < 1e-15);
        assert!((p.eval(0.3) - 0.5).abs() < 1e-14);
        assert!((d.eval(0.3) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn abs_integral_examples() {
        // t² − 1/4 on [0, 1]: roots at 1/2.
        let p = Cubic::new(-0.25, 0.0, 1.0, 0.0);
        // 1/12 on [0, 1/2] plus 1/6 on [1/2, 1].
        assert!((p.abs_integral(0.0, 1.0) - 0.25).abs() < 1e-15);
        // (t − 0.2)(t − 0.5)(t − 0.9), three sign changes.
        let q = Cubic::new(-0.09, 0.73, -1.6, 1.0);
        let r = q.roots_in(0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (x, e) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((x - e).abs() < 1e-12);
        }
        let fine: f64 = (0..200_000).map(|k| q.eval((k as f64 + 0.5) / 200_000.0).abs()).sum::<f64>() / 200_000.0;
        assert!((q.abs_integral(0.0, 1.0) - fine).abs() < 1e-9);
    }
}
