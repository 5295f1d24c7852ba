//! Nondecreasing piecewise-linear partial functions on `[domain_start, ∞)`.
//!
//! A function is a list of breakpoints `(x, v)` plus a slope for the linear
//! tail after the last one. Breakpoints sharing an `x` encode a jump:
//!
//! * two entries `(x, a), (x, b)`: left limit `a`, value and right limit `b`;
//! * three entries `(x, a), (x, m), (x, b)`: left limit `a`, value `m`, right limit `b`.
//!
//! The three-entry form is needed for costs that are left-continuous at a jump.

use crate::tol::Tol;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlError {
    #[error("a function needs at least one breakpoint")]
    Empty,
    #[error("breakpoint {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("breakpoint {0} has a negative abscissa")]
    NegativeX(usize),
    #[error("breakpoint {0} lies left of its predecessor")]
    Unordered(usize),
    #[error("breakpoint {0} decreases the value")]
    Decreasing(usize),
    #[error("more than three breakpoints share x = {0}")]
    Crowded(f64),
    #[error("a jump cannot sit at the start of the domain")]
    JumpAtStart,
    #[error("final slope must be finite and nonnegative, got {0}")]
    BadSlope(f64),
}

/// Closure of a generalized inverse image `f^{-1}(h)`; `hi` may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ValueInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    x: f64,
    left: f64,
    at: f64,
    right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonePL {
    breakpoints: Vec<(f64, f64)>,
    final_slope: f64,
    nodes: Vec<Node>,
}

impl MonotonePL {
    pub fn new(breakpoints: Vec<(f64, f64)>, final_slope: f64) -> Result<Self, PlError> {
        if breakpoints.is_empty() {
            return Err(PlError::Empty);
        }
        if !final_slope.is_finite() || final_slope < 0.0 {
            return Err(PlError::BadSlope(final_slope));
        }
        for (k, &(x, v)) in breakpoints.iter().enumerate() {
            if !x.is_finite() || !v.is_finite() {
                return Err(PlError::NonFinite(k));
            }
            if x < 0.0 {
                return Err(PlError::NegativeX(k));
            }
            if k > 0 {
                let (px, pv) = breakpoints[k - 1];
                if x < px {
                    return Err(PlError::Unordered(k));
                }
                if v < pv {
                    return Err(PlError::Decreasing(k));
                }
            }
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut k = 0;
        while k < breakpoints.len() {
            let x = breakpoints[k].0;
            let mut end = k;
            while end + 1 < breakpoints.len() && breakpoints[end + 1].0 == x {
                end += 1;
            }
            let group = &breakpoints[k..=end];
            let node = match group.len() {
                1 => Node { x, left: group[0].1, at: group[0].1, right: group[0].1 },
                2 => Node { x, left: group[0].1, at: group[1].1, right: group[1].1 },
                3 => Node { x, left: group[0].1, at: group[1].1, right: group[2].1 },
                _ => return Err(PlError::Crowded(x)),
            };
            if nodes.is_empty() && node.left != node.right {
                return Err(PlError::JumpAtStart);
            }
            nodes.push(node);
            k = end + 1;
        }
        Ok(MonotonePL { breakpoints, final_slope, nodes })
    }

    /// `x ↦ x`.
    pub fn identity() -> Self {
        Self::affine(0.0, 1.0)
    }

    /// `x ↦ intercept + slope·x` on `[0, ∞)`.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self::new(vec![(0.0, intercept)], slope).expect("valid affine function")
    }

    /// `x ↦ c` on `[0, ∞)`.
    pub fn constant(c: f64) -> Self {
        Self::affine(c, 0.0)
    }

    /// `x ↦ min(x, cap)` for `cap >= 0`.
    pub fn capped_identity(cap: f64) -> Self {
        Self::new(vec![(0.0, 0.0), (cap, cap)], 0.0).expect("valid capped identity")
    }

    pub fn domain_start(&self) -> f64 {
        self.nodes[0].x
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn final_slope(&self) -> f64 {
        self.final_slope
    }

    /// Value at the start of the domain.
    pub fn start_value(&self) -> f64 {
        self.nodes[0].at
    }

    /// Supremum of the values taken; `+∞` unless the tail is flat.
    pub fn sup_value(&self) -> f64 {
        if self.final_slope > 0.0 {
            f64::INFINITY
        } else {
            self.nodes.last().unwrap().right
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.nodes.iter().all(|n| n.left == n.at && n.at == n.right)
    }

    /// True when no value is taken twice.
    pub fn is_strictly_increasing(&self) -> bool {
        if self.final_slope <= 0.0 {
            return false;
        }
        self.pieces().all(|(x0, v0, x1, v1)| x1 == x0 || v1 > v0)
    }

    /// Largest slope over all pieces; `+∞` when the function jumps.
    pub fn lipschitz(&self) -> f64 {
        if !self.is_continuous() {
            return f64::INFINITY;
        }
        self.pieces()
            .filter(|(x0, _, x1, _)| x1 > x0)
            .map(|(x0, v0, x1, v1)| (v1 - v0) / (x1 - x0))
            .fold(self.final_slope, f64::max)
    }

    /// Every value at which some inverse changes shape.
    pub fn critical_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().flat_map(|n| [n.left, n.at, n.right])
    }

    /// Bounded pieces as `(x0, right value at x0, x1, left value at x1)`.
    fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0].x, w[0].right, w[1].x, w[1].left))
    }

    /// `f(x)`, or `None` below the domain.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let first = &self.nodes[0];
        if x < first.x || x.is_nan() {
            return None;
        }
        let idx = self.nodes.partition_point(|n| n.x <= x) - 1;
        let node = &self.nodes[idx];
        if x == node.x {
            return Some(node.at);
        }
        match self.nodes.get(idx + 1) {
            Some(next) => {
                let t = (x - node.x) / (next.x - node.x);
                Some(node.right + t * (next.left - node.right))
            }
            None => Some(node.right + self.final_slope * (x - node.x)),
        }
    }

    /// Closure of `{x ≥ domain_start : f(x) = h}`, or `None` if `h` is not attained.
    pub fn inverse_interval(&self, h: f64, tol: Tol) -> Option<ValueInterval> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut add = |a: f64, b: f64| {
            lo = lo.min(a);
            hi = hi.max(b);
        };
        for (k, node) in self.nodes.iter().enumerate() {
            if tol.eq(node.at, h) {
                add(node.x, node.x);
            }
            let (x0, v0) = (node.x, node.right);
            match self.nodes.get(k + 1) {
                Some(next) => {
                    let (x1, v1) = (next.x, next.left);
                    if x1 == x0 {
                        continue;
                    }
                    if v1 == v0 {
                        if tol.eq(v0, h) {
                            add(x0, x1);
                        }
                    } else if h > v0 && h < v1 && !tol.eq(h, v0) && !tol.eq(h, v1) {
                        let x = x0 + (h - v0) / (v1 - v0) * (x1 - x0);
                        add(x, x);
                    }
                }
                None => {
                    if self.final_slope == 0.0 {
                        if tol.eq(v0, h) {
                            add(x0, f64::INFINITY);
                        }
                    } else if h > v0 && !tol.eq(h, v0) {
                        let x = x0 + (h - v0) / self.final_slope;
                        add(x, x);
                    }
                }
            }
        }
        (lo <= hi).then_some(ValueInterval { lo, hi })
    }

    /// `sup{x : f(x) ≤ h}` for continuous `f`: `None` below the start value,
    /// `+∞` when the whole graph stays at or below `h`.
    pub fn reach(&self, h: f64) -> Option<f64> {
        let k = self.nodes.partition_point(|n| n.at <= h);
        if k == 0 {
            return None;
        }
        let node = &self.nodes[k - 1];
        match self.nodes.get(k) {
            Some(next) => {
                if next.left <= node.right {
                    return Some(next.x);
                }
                let t = ((h - node.right) / (next.left - node.right)).clamp(0.0, 1.0);
                Some(node.x + t * (next.x - node.x))
            }
            None if self.final_slope == 0.0 => Some(f64::INFINITY),
            None => Some(node.x + (h - node.right).max(0.0) / self.final_slope),
        }
    }

    pub fn is_plateau_height(&self, h: f64, tol: Tol) -> bool {
        self.inverse_interval(h, tol).map_or(false, |iv| iv.len() > 0.0)
    }

    /// Values of all flat stretches of positive length, ascending.
    pub fn plateau_heights(&self, tol: Tol) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .pieces()
            .filter(|&(x0, v0, x1, v1)| x1 > x0 && v1 == v0)
            .map(|(_, v0, _, _)| v0)
            .collect();
        if self.final_slope == 0.0 {
            out.push(self.nodes.last().unwrap().right);
        }
        out.dedup_by(|a, b| tol.eq(*a, *b));
        out
    }

    pub fn shares_plateau(&self, other: &MonotonePL, tol: Tol) -> bool {
        let theirs = other.plateau_heights(tol);
        self.plateau_heights(tol)
            .iter()
            .any(|a| theirs.iter().any(|b| tol.eq(*a, *b)))
    }

    /// `∫_{domain_start}^{upto} f`; zero when `upto` is at or below the domain start.
    pub fn integral(&self, upto: f64) -> f64 {
        let mut total = 0.0;
        for (x0, v0, x1, v1) in self.pieces() {
            if upto <= x0 {
                return total;
            }
            if x1 == x0 {
                continue;
            }
            let end = upto.min(x1);
            let vend = v0 + (v1 - v0) * (end - x0) / (x1 - x0);
            total += 0.5 * (v0 + vend) * (end - x0);
        }
        let last = self.nodes.last().unwrap();
        if upto > last.x {
            let len = upto - last.x;
            total += last.right * len + 0.5 * self.final_slope * len * len;
        }
        total
    }
}
