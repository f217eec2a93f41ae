//! Piecewise-constant functions on a bounded interval `[0, length]`.
//!
//! Used both for BV data along an arc and for node traces along `[0, T]`.
//! Adjacent pieces with equal values are always merged, so the
//! representation is canonical.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    length: f64,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(length: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidField(format!("length {length} must be positive")));
        }
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidField(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("value {v} is not finite")));
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b > prev) || !(b < length) {
                return Err(Error::InvalidField(format!(
                    "breakpoints must increase strictly inside (0, {length}); got {b} after {prev}"
                )));
            }
            prev = b;
        }
        Ok(Self::merged(length, breakpoints, values))
    }

    pub fn constant(length: f64, value: f64) -> Result<Self> {
        Self::new(length, Vec::new(), vec![value])
    }

    /// Builds from consecutive segments `(right_end, value)` covering
    /// `[0, length]` in increasing order. Segments of nonpositive width are
    /// dropped and segments reaching past `length` are clipped.
    pub fn from_segments(length: f64, segments: &[(f64, f64)]) -> Result<Self> {
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        let mut left = 0.0;
        for &(end, v) in segments {
            let end = end.min(length);
            if !(end > left) {
                continue;
            }
            if !values.is_empty() {
                breakpoints.push(left);
            }
            values.push(v);
            left = end;
            if left >= length {
                break;
            }
        }
        if values.is_empty() {
            return Err(Error::InvalidField("no segment of positive width".into()));
        }
        if left < length {
            return Err(Error::InvalidField(format!(
                "segments end at {left}, short of {length}"
            )));
        }
        Self::new(length, breakpoints, values)
    }

    fn merged(length: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        let mut bs = Vec::with_capacity(breakpoints.len());
        let mut vs = Vec::with_capacity(values.len());
        vs.push(values[0]);
        for (b, &v) in breakpoints.into_iter().zip(&values[1..]) {
            if v != *vs.last().expect("nonempty") {
                bs.push(b);
                vs.push(v);
            }
        }
        Self {
            length,
            breakpoints: bs,
            values: vs,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Jumps `v_{k+1} − v_k` located at the breakpoints.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.breakpoints
            .iter()
            .zip(self.values.windows(2))
            .map(|(&b, w)| (b, w[1] - w[0]))
            .collect()
    }

    /// Left-limit value; at `x = 0` the first value.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b < x)]
    }

    pub fn eval_right(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    /// `(left, right, value)` for every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |k| {
            let a = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
            let b = if k == self.breakpoints.len() {
                self.length
            } else {
                self.breakpoints[k]
            };
            (a, b, self.values[k])
        })
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn integral(&self) -> f64 {
        self.pieces().map(|(a, b, v)| (b - a) * v).sum()
    }

    /// `∫_a^b` of the function, for `0 ≤ a ≤ b ≤ length`.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        self.pieces()
            .map(|(l, r, v)| {
                let (lo, hi) = (l.max(a), r.min(b));
                if hi > lo {
                    (hi - lo) * v
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.pieces().map(|(a, b, v)| (b - a) * v.abs()).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise combination over the union of breakpoints. All inputs must
    /// share the same length.
    pub fn combine(fields: &[&PiecewiseConstant], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidField("nothing to combine".into()))?;
        let length = first.length;
        if fields.iter().any(|g| g.length != length) {
            return Err(Error::InvalidField("combined fields differ in length".into()));
        }
        let mut cuts: Vec<f64> = fields.iter().flat_map(|g| g.breakpoints.iter().copied()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut segments = Vec::with_capacity(cuts.len() + 1);
        let mut left = 0.0;
        let mut buf = vec![0.0; fields.len()];
        for end in cuts.into_iter().chain(std::iter::once(length)) {
            let mid = 0.5 * (left + end);
            for (slot, g) in buf.iter_mut().zip(fields) {
                *slot = g.eval(mid);
            }
            segments.push((end, f(&buf)));
            left = end;
        }
        Self::from_segments(length, &segments)
    }

    /// Exact `∫|self − other|`.
    pub fn l1_distance(&self, other: &PiecewiseConstant) -> Result<f64> {
        Ok(Self::combine(&[self, other], |v| (v[0] - v[1]).abs())?.integral())
    }
}
