/// Relative comparison tolerance: `a` and `b` are equal iff
/// `|a - b| <= eps * max(1, |a|, |b|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tol(pub f64);

impl Default for Tol {
    fn default() -> Self {
        Tol(1e-9)
    }
}

impl Tol {
    pub fn eps(self) -> f64 {
        self.0
    }

    /// Absolute slack at the magnitude of `a` and `b`.
    pub fn slack(self, a: f64, b: f64) -> f64 {
        self.0 * 1f64.max(a.abs()).max(b.abs())
    }

    pub fn eq(self, a: f64, b: f64) -> bool {
        if a == b {
            return true;
        }
        if !a.is_finite() || !b.is_finite() {
            return false;
        }
        (a - b).abs() <= self.slack(a, b)
    }

    pub fn le(self, a: f64, b: f64) -> bool {
        a <= b || self.eq(a, b)
    }

    /// `a < b` by more than the tolerance.
    pub fn lt(self, a: f64, b: f64) -> bool {
        !self.le(b, a)
    }
}
