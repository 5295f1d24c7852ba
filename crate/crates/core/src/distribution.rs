//! Distribution constraints: type masses `μ^R` that must be split over their
//! resources so that every resource `j` receives a total in `[t_j, T_j]`.
//!
//! A constraint is satisfiable iff it is normal, i.e. for every nonempty `S`
//! `t_C(S) ≤ M_C(S)` and `m_C(S) ≤ T_C(S)`, where `m_C(S)` is the mass confined
//! to `S` and `M_C(S)` the mass of types meeting `S`. [`satisfy`] builds a
//! witness by eliminating the highest resource: mass is moved from types
//! `R ⊋ {n}` to the singleton `{n}` while normality allows, then `n` is merged
//! away and the smaller constraint is solved recursively.
//!
//! [`satisfy`]: DistributionConstraint::satisfy

use crate::subset::{ResourceSet, MAX_RESOURCES};
use crate::tol::Tol;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `t_C(S) > M_C(S)`: the types meeting `S` cannot fill the lower bounds of `S`.
    Lower(ResourceSet),
    /// `m_C(S) > T_C(S)`: the types confined to `S` overflow the upper bounds of `S`.
    Upper(ResourceSet),
}

impl Violation {
    pub fn set(self) -> ResourceSet {
        match self {
            Violation::Lower(s) | Violation::Upper(s) => s,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Lower(s) => write!(f, "t_C({s}) > M_C({s})"),
            Violation::Upper(s) => write!(f, "m_C({s}) > T_C({s})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("a constraint needs between 1 and {MAX_RESOURCES} resources, got {0}")]
    BadSize(usize),
    #[error("interval {0} is malformed")]
    BadInterval(usize),
    #[error("type {0} is empty, out of range or has a bad mass")]
    BadType(ResourceSet),
    #[error("type {0} must strictly contain the highest resource")]
    BadMoveType(ResourceSet),
    #[error("constraint is not normal: {0}")]
    NotNormal(Violation),
    #[error("mass elimination did not terminate after {0} moves")]
    NonTermination(usize),
    #[error("internal witness check failed: {0}")]
    BadWitness(String),
}

/// Per-type consumption vectors over all resources.
pub type Witness = BTreeMap<ResourceSet, Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionConstraint {
    n: usize,
    masses: BTreeMap<ResourceSet, f64>,
    intervals: Vec<(f64, f64)>,
}

impl DistributionConstraint {
    pub fn new<I>(masses: I, intervals: Vec<(f64, f64)>) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (ResourceSet, f64)>,
    {
        let n = intervals.len();
        if n == 0 || n > MAX_RESOURCES {
            return Err(DistributionError::BadSize(n));
        }
        for (j, &(t, big_t)) in intervals.iter().enumerate() {
            if !(t.is_finite() && big_t.is_finite() && 0.0 <= t && t <= big_t) {
                return Err(DistributionError::BadInterval(j));
            }
        }
        let full = ResourceSet::full(n);
        let mut map = BTreeMap::new();
        for (r, m) in masses {
            if r.is_empty() || !r.is_subset(full) || !m.is_finite() || m < 0.0 {
                return Err(DistributionError::BadType(r));
            }
            if m > 0.0 {
                *map.entry(r).or_insert(0.0) += m;
            }
        }
        Ok(DistributionConstraint { n, masses: map, intervals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &BTreeMap<ResourceSet, f64> {
        &self.masses
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    fn dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; 1 << self.n];
        for (r, &m) in &self.masses {
            d[r.bits() as usize] = m;
        }
        d
    }

    fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    /// The first violated inequality in bitmask order, if any.
    pub fn is_normal(&self, tol: Tol) -> Result<(), Violation> {
        match Table::new(&self.dense(), &self.intervals).first_violation(tol) {
            Some(v) => Err(v),
            None => Ok(()),
        }
    }

    /// Largest mass of type `r` that can move to the singleton of the highest
    /// resource while keeping the constraint normal.
    pub fn may_bound(&self, r: ResourceSet, tol: Tol) -> Result<f64, DistributionError> {
        let top = self.n - 1;
        if !r.contains(top) || r.len() < 2 || !r.is_subset(ResourceSet::full(self.n)) {
            return Err(DistributionError::BadMoveType(r));
        }
        let table = Table::new(&self.dense(), &self.intervals);
        if let Some(v) = table.first_violation(tol) {
            return Err(DistributionError::NotNormal(v));
        }
        Ok(table.may(r.bits() as usize).max(0.0))
    }

    /// A witness split, or the violated inequality.
    pub fn satisfy(&self, tol: Tol) -> Result<Witness, DistributionError> {
        self.is_normal(tol).map_err(DistributionError::NotNormal)?;
        let eps = tol.slack(self.total(), 0.0);
        let rows = solve(self.dense(), &self.intervals, eps)?;
        let mut w = Witness::new();
        for &r in self.masses.keys() {
            let mut row = rows[r.bits() as usize].clone();
            for x in &mut row {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
            w.insert(r, row);
        }
        self.check_witness(&w, tol).map_err(DistributionError::BadWitness)?;
        Ok(w)
    }

    /// Row simplex membership and column interval membership within tolerance.
    pub fn check_witness(&self, w: &Witness, tol: Tol) -> Result<(), String> {
        let eps = tol.slack(self.total(), 0.0);
        let mut cols = vec![0.0; self.n];
        for (&r, &m) in &self.masses {
            let row = w.get(&r).ok_or_else(|| format!("no row for {r}"))?;
            if row.len() != self.n {
                return Err(format!("row for {r} has the wrong length"));
            }
            for (j, &x) in row.iter().enumerate() {
                if x < -eps || (!r.contains(j) && x > eps) {
                    return Err(format!("row {r} has entry {x} at resource {}", j + 1));
                }
                cols[j] += x;
            }
            let s: f64 = row.iter().sum();
            if (s - m).abs() > eps {
                return Err(format!("row {r} sums to {s}, mass is {m}"));
            }
        }
        for (j, (&c, &(t, big_t))) in cols.iter().zip(&self.intervals).enumerate() {
            if c < t - eps || c > big_t + eps {
                return Err(format!("column {} sums to {c}, outside [{t}, {big_t}]", j + 1));
            }
        }
        Ok(())
    }
}

/// Dense subset sums for one constraint.
struct Table<'a> {
    n: usize,
    intervals: &'a [(f64, f64)],
    /// `m_C(S)` for every bitmask `S`.
    confined: Vec<f64>,
    total: f64,
}

impl<'a> Table<'a> {
    fn new(masses: &[f64], intervals: &'a [(f64, f64)]) -> Self {
        let n = intervals.len();
        let mut confined = masses.to_vec();
        for b in 0..n {
            for s in 0..confined.len() {
                if s >> b & 1 == 1 {
                    confined[s] += confined[s ^ (1 << b)];
                }
            }
        }
        let total = confined[confined.len() - 1];
        Table { n, intervals, confined, total }
    }

    fn full(&self) -> usize {
        (1 << self.n) - 1
    }

    /// `M_C(S)`: mass of types meeting `S`.
    fn meeting(&self, s: usize) -> f64 {
        self.total - self.confined[self.full() & !s]
    }

    fn lower(&self, s: usize) -> f64 {
        ResourceSet(s as u64).iter().map(|j| self.intervals[j].0).sum()
    }

    fn upper(&self, s: usize) -> f64 {
        ResourceSet(s as u64).iter().map(|j| self.intervals[j].1).sum()
    }

    fn first_violation(&self, tol: Tol) -> Option<Violation> {
        for s in 1..=self.full() {
            if !tol.le(self.lower(s), self.meeting(s)) {
                return Some(Violation::Lower(ResourceSet(s as u64)));
            }
            if !tol.le(self.confined[s], self.upper(s)) {
                return Some(Violation::Upper(ResourceSet(s as u64)));
            }
        }
        None
    }

    fn may(&self, r: usize) -> f64 {
        let top = 1usize << (self.n - 1);
        let mut best = f64::INFINITY;
        for s in 1..=self.full() {
            if s & top == 0 {
                if s & r != 0 {
                    best = best.min(self.meeting(s) - self.lower(s));
                }
            } else if r & !s != 0 {
                best = best.min(self.upper(s) - self.confined[s]);
            }
        }
        best
    }
}

/// Rows indexed by bitmask, each of length `n`.
fn solve(mut masses: Vec<f64>, intervals: &[(f64, f64)], eps: f64) -> Result<Vec<Vec<f64>>, DistributionError> {
    let n = intervals.len();
    let size = 1usize << n;
    let mut rows = vec![vec![0.0; n]; size];
    if n == 1 {
        rows[1][0] = masses[1];
        return Ok(rows);
    }
    let top = 1usize << (n - 1);
    let original_single = masses[top];
    let mut moved = vec![0.0; size];
    // Each type is picked at most once: afterwards either its mass or its bound is spent.
    let limit = top;
    let mut moves = 0;
    loop {
        let table = Table::new(&masses, intervals);
        let pick = (top + 1..size)
            .filter(|&r| r & top != 0 && masses[r] > eps)
            .map(|r| (r, table.may(r)))
            .find(|&(_, may)| may > eps);
        let Some((r, may)) = pick else { break };
        moves += 1;
        if moves > limit {
            return Err(DistributionError::NonTermination(moves));
        }
        let delta = may.min(masses[r]);
        masses[r] -= delta;
        masses[top] += delta;
        moved[r] += delta;
    }
    let mut merged = vec![0.0; top];
    for r in 1..top {
        merged[r] = masses[r] + masses[r | top];
    }
    let sub = solve(merged.clone(), &intervals[..n - 1], eps)?;
    for r in 1..top {
        if merged[r] <= 0.0 {
            continue;
        }
        for (side, share) in [(r, masses[r] / merged[r]), (r | top, masses[r | top] / merged[r])] {
            for j in 0..n - 1 {
                rows[side][j] = share * sub[r][j];
            }
        }
    }
    for r in top + 1..size {
        rows[r][n - 1] += moved[r];
    }
    rows[top][n - 1] = original_single;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ix: &[usize]) -> ResourceSet {
        ResourceSet::from_indices(ix.iter().map(|j| j - 1))
    }

    fn three_units(intervals: Vec<(f64, f64)>) -> DistributionConstraint {
        DistributionConstraint::new([(set(&[1]), 1.0), (set(&[2]), 1.0), (set(&[1, 2]), 1.0)], intervals).unwrap()
    }

    #[test]
    fn normality_examples() {
        let t = Tol::default();
        assert_eq!(three_units(vec![(1.0, 2.0), (1.0, 2.0)]).is_normal(t), Ok(()));
        assert_eq!(
            three_units(vec![(3.0, 3.0), (0.0, 2.0)]).is_normal(t),
            Err(Violation::Lower(set(&[1])))
        );
        let single = DistributionConstraint::new([(set(&[1]), 2.0)], vec![(0.0, 3.0)]).unwrap();
        assert_eq!(single.is_normal(t), Ok(()));
    }

    #[test]
    fn may_bound_examples() {
        let t = Tol::default();
        let c = DistributionConstraint::new([(set(&[1, 2]), 2.0)], vec![(0.0, 2.0), (0.0, 2.0)]).unwrap();
        assert_eq!(c.may_bound(set(&[1, 2]), t), Ok(2.0));
        let tight = DistributionConstraint::new([(set(&[1, 2]), 2.0)], vec![(2.0, 2.0), (0.0, 0.0)]).unwrap();
        assert_eq!(tight.may_bound(set(&[1, 2]), t), Ok(0.0));
        assert_eq!(c.may_bound(set(&[2]), t), Err(DistributionError::BadMoveType(set(&[2]))));
        let bad = DistributionConstraint::new([(set(&[1, 2]), 2.0)], vec![(3.0, 3.0), (0.0, 0.0)]).unwrap();
        assert!(matches!(bad.may_bound(set(&[1, 2]), t), Err(DistributionError::NotNormal(_))));
    }

    #[test]
    fn satisfy_examples() {
        let t = Tol::default();
        let single = DistributionConstraint::new([(set(&[1]), 2.0)], vec![(0.0, 3.0)]).unwrap();
        assert_eq!(single.satisfy(t).unwrap()[&set(&[1])], vec![2.0]);

        let c = three_units(vec![(1.0, 2.0), (1.0, 2.0)]);
        let w = c.satisfy(t).unwrap();
        assert!(c.check_witness(&w, t).is_ok());

        let bad = DistributionConstraint::new([(set(&[1, 2]), 2.0)], vec![(3.0, 3.0), (0.0, 0.0)]).unwrap();
        assert_eq!(bad.satisfy(t), Err(DistributionError::NotNormal(Violation::Lower(set(&[1])))));
    }

    #[test]
    fn satisfy_pushes_mass_to_the_eliminated_resource() {
        let t = Tol::default();
        let c = DistributionConstraint::new(
            [(set(&[1, 2, 3]), 3.0), (set(&[1]), 1.0)],
            vec![(1.0, 1.0), (0.0, 3.0), (2.0, 2.0)],
        )
        .unwrap();
        let w = c.satisfy(t).unwrap();
        assert_eq!(w[&set(&[1])], vec![1.0, 0.0, 0.0]);
        assert!((w[&set(&[1, 2, 3])][2] - 2.0).abs() < 1e-12);
    }
}
