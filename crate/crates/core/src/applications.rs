//! Fractional marriages and interval-constrained transport triples.

use crate::game::Game;
use crate::monotone_fn::MonotonePL;
use crate::solver::{self, SolverError, SolverOptions};
use crate::subset::ResourceSet;
use crate::tol::Tol;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarriageError {
    #[error("woman {} has an empty or out-of-range acceptable set", .0 + 1)]
    BadSet(usize),
    #[error("{women} women cannot cover {men} men")]
    TooFewWomen { women: usize, men: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("certificate check failed: |I| = {i} but |R^I| = {ri}")]
    BadCertificate { i: usize, ri: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarriageInstance {
    pub n: usize,
    /// Men acceptable to each woman.
    pub acceptable: Vec<ResourceSet>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MarriageOutcome {
    /// Woman-by-man matrix: rows on acceptable sets summing to one, columns summing to one.
    Perfect(Vec<Vec<f64>>),
    /// Women `women` whose acceptable men `men` are fewer than them.
    Violation { women: Vec<usize>, men: ResourceSet },
}

impl MarriageInstance {
    pub fn new(n: usize, acceptable: Vec<ResourceSet>) -> Result<Self, MarriageError> {
        let full = ResourceSet::full(n);
        if let Some(i) = acceptable.iter().position(|r| r.is_empty() || !r.is_subset(full)) {
            return Err(MarriageError::BadSet(i));
        }
        Ok(MarriageInstance { n, acceptable })
    }

    /// Identity costs and one unit of mass per woman, merged by acceptable set.
    pub fn to_game(&self) -> Result<Game, SolverError> {
        let mut masses: BTreeMap<ResourceSet, f64> = BTreeMap::new();
        for &r in &self.acceptable {
            *masses.entry(r).or_insert(0.0) += 1.0;
        }
        Ok(Game::new(vec![MonotonePL::identity(); self.n], masses)?)
    }
}

pub fn fractional_marriage(inst: &MarriageInstance, opts: &SolverOptions) -> Result<MarriageOutcome, MarriageError> {
    if inst.acceptable.len() < inst.n {
        return Err(MarriageError::TooFewWomen { women: inst.acceptable.len(), men: inst.n });
    }
    let game = inst.to_game()?;
    let report = solver::construct_equilibrium(&game, opts)?;
    if report.heights.iter().all(|&h| opts.tol.eq(h, 1.0)) {
        let profile = report.equilibrium.expect("constructed equilibrium");
        let rows = inst
            .acceptable
            .iter()
            .map(|r| {
                let count = game.mass(*r);
                profile.get(*r).expect("every type has a row").iter().map(|x| x / count).collect()
            })
            .collect();
        return Ok(MarriageOutcome::Perfect(rows));
    }
    let top = report.stopping_order[0].resources;
    let women: Vec<usize> = (0..inst.acceptable.len()).filter(|&i| inst.acceptable[i].is_subset(top)).collect();
    let men = women.iter().fold(ResourceSet::EMPTY, |acc, &i| acc.union(inst.acceptable[i]));
    if women.len() <= men.len() {
        return Err(MarriageError::BadCertificate { i: women.len(), ri: men.len() });
    }
    Ok(MarriageOutcome::Violation { women, men })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspError {
    #[error("malformed interval at {0}")]
    MalformedInterval(String),
    #[error("expected {rows}x{columns} cells")]
    Shape { rows: usize, columns: usize },
    #[error("solution failed verification: {0}")]
    Verification(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CspTriple {
    pub rows: Vec<(f64, f64)>,
    pub columns: Vec<(f64, f64)>,
    pub cells: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    Ceiling,
    Floor,
}

/// Where the sequential algorithm got stuck. Not a minimal witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stuck {
    /// The row cannot place its mandatory mass within its cell caps.
    Row(usize),
    /// The row's upper bound is below the sum of its cell floors.
    RowFloors(usize),
    /// The column's upper bound is below the sum of its cell floors.
    ColumnFloors(usize),
    Piston { column: usize, pass: Pass },
}

impl fmt::Display for Stuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Stuck::Row(i) => write!(f, "row {} cannot place its lower bound", i + 1),
            Stuck::RowFloors(i) => write!(f, "row {} upper bound is below its cell floors", i + 1),
            Stuck::ColumnFloors(j) => write!(f, "column {} upper bound is below its cell floors", j + 1),
            Stuck::Piston { column, pass: Pass::Ceiling } => write!(f, "piston {} cannot reach its upper bound", column + 1),
            Stuck::Piston { column, pass: Pass::Floor } => write!(f, "piston {} cannot reach its lower bound", column + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CspOutcome {
    Solution(Vec<Vec<f64>>),
    Infeasible(Stuck),
}

fn check_interval(what: String, (lo, hi): (f64, f64)) -> Result<(), CspError> {
    if lo.is_finite() && lo >= 0.0 && !hi.is_nan() && lo <= hi {
        Ok(())
    } else {
        Err(CspError::MalformedInterval(what))
    }
}

impl CspTriple {
    pub fn new(rows: Vec<(f64, f64)>, columns: Vec<(f64, f64)>, cells: Vec<Vec<(f64, f64)>>) -> Result<Self, CspError> {
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != columns.len()) {
            return Err(CspError::Shape { rows: rows.len(), columns: columns.len() });
        }
        for (i, &iv) in rows.iter().enumerate() {
            check_interval(format!("row {}", i + 1), iv)?;
        }
        for (j, &iv) in columns.iter().enumerate() {
            check_interval(format!("column {}", j + 1), iv)?;
        }
        for (i, row) in cells.iter().enumerate() {
            for (j, &iv) in row.iter().enumerate() {
                check_interval(format!("cell ({}, {})", i + 1, j + 1), iv)?;
            }
        }
        Ok(CspTriple { rows, columns, cells })
    }

    /// The perfect fractional marriage question as a triple.
    pub fn hall(inst: &MarriageInstance) -> Self {
        let cells = inst
            .acceptable
            .iter()
            .map(|r| (0..inst.n).map(|j| (0.0, if r.contains(j) { 1.0 } else { 0.0 })).collect())
            .collect();
        CspTriple { rows: vec![(1.0, 1.0); inst.acceptable.len()], columns: vec![(1.0, 1.0); inst.n], cells }
    }

    /// Checks every row, column and cell bound of `q`.
    pub fn check(&self, q: &[Vec<f64>], tol: Tol) -> Result<(), String> {
        let inside = |x: f64, (lo, hi): (f64, f64)| tol.le(lo, x) && tol.le(x, hi);
        for (i, row) in q.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !inside(x, self.cells[i][j]) {
                    return Err(format!("cell ({}, {}) = {x}", i + 1, j + 1));
                }
            }
            let s: f64 = row.iter().sum();
            if !inside(s, self.rows[i]) {
                return Err(format!("row {} sums to {s}", i + 1));
            }
        }
        for j in 0..self.columns.len() {
            let s: f64 = q.iter().map(|r| r[j]).sum();
            if !inside(s, self.columns[j]) {
                return Err(format!("column {} sums to {s}", j + 1));
            }
        }
        Ok(())
    }
}

/// Normalized state: cell floors removed, optional row mass parked in slack.
struct Pistons {
    q: Vec<Vec<f64>>,
    cap: Vec<Vec<f64>>,
    slack: Vec<f64>,
    slack_cap: Vec<f64>,
    eps: f64,
}

enum Step {
    Cell(usize, usize, usize),
    ToSlack(usize, usize),
    FromSlack(usize, usize),
}

impl Pistons {
    fn col(&self, j: usize) -> f64 {
        self.q.iter().map(|r| r[j]).sum()
    }

    /// Chain moving liquid out of column `j` into a column with `room`, else into slack.
    fn push_path(&self, j: usize, room: &dyn Fn(usize) -> f64) -> Option<Vec<Step>> {
        let (k, n) = (self.q.len(), self.cap.first().map_or(0, |r| r.len()));
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[j] = true;
        let mut queue = VecDeque::from([j]);
        let mut order = vec![j];
        while let Some(u) = queue.pop_front() {
            for i in 0..k {
                if self.q[i][u] <= self.eps {
                    continue;
                }
                for v in 0..n {
                    if !seen[v] && self.cap[i][v] - self.q[i][v] > self.eps {
                        seen[v] = true;
                        pred[v] = Some((u, i));
                        if room(v) > self.eps {
                            return Some(self.unwind(&pred, j, v, None));
                        }
                        queue.push_back(v);
                        order.push(v);
                    }
                }
            }
        }
        for &u in &order {
            for i in 0..k {
                if self.q[i][u] > self.eps && self.slack_cap[i] - self.slack[i] > self.eps {
                    return Some(self.unwind(&pred, j, u, Some(Step::ToSlack(i, u))));
                }
            }
        }
        None
    }

    /// Chain pulling liquid into column `j` from slack or from a column above `floor`.
    fn pull_path(&self, j: usize, floor: &dyn Fn(usize) -> f64) -> Option<Vec<Step>> {
        let (k, n) = (self.q.len(), self.cap.first().map_or(0, |r| r.len()));
        // succ[v] = (u, i): liquid of row i moves from v toward u.
        let mut succ: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[j] = true;
        let mut queue = VecDeque::from([j]);
        while let Some(u) = queue.pop_front() {
            for i in 0..k {
                if self.cap[i][u] - self.q[i][u] <= self.eps {
                    continue;
                }
                if self.slack[i] > self.eps {
                    let mut steps = vec![Step::FromSlack(i, u)];
                    steps.extend(self.rewind(&succ, j, u));
                    return Some(steps);
                }
                for v in 0..n {
                    if !seen[v] && self.q[i][v] > self.eps {
                        seen[v] = true;
                        succ[v] = Some((u, i));
                        if self.col(v) - floor(v) > self.eps {
                            return Some(self.rewind(&succ, j, v));
                        }
                        queue.push_back(v);
                    }
                }
            }
        }
        None
    }

    fn unwind(&self, pred: &[Option<(usize, usize)>], j: usize, mut v: usize, tail: Option<Step>) -> Vec<Step> {
        let mut steps = Vec::new();
        while v != j {
            let (u, i) = pred[v].expect("path node has a predecessor");
            steps.push(Step::Cell(i, u, v));
            v = u;
        }
        steps.reverse();
        steps.extend(tail);
        steps
    }

    fn rewind(&self, succ: &[Option<(usize, usize)>], j: usize, mut v: usize) -> Vec<Step> {
        let mut steps = Vec::new();
        while v != j {
            let (u, i) = succ[v].expect("path node has a successor");
            steps.push(Step::Cell(i, v, u));
            v = u;
        }
        steps
    }

    fn bottleneck(&self, steps: &[Step]) -> f64 {
        steps
            .iter()
            .map(|s| match *s {
                Step::Cell(i, u, v) => self.q[i][u].min(self.cap[i][v] - self.q[i][v]),
                Step::ToSlack(i, u) => self.q[i][u].min(self.slack_cap[i] - self.slack[i]),
                Step::FromSlack(i, v) => self.slack[i].min(self.cap[i][v] - self.q[i][v]),
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn apply(&mut self, steps: &[Step], x: f64) {
        for s in steps {
            match *s {
                Step::Cell(i, u, v) => {
                    self.q[i][u] = (self.q[i][u] - x).max(0.0);
                    self.q[i][v] += x;
                }
                Step::ToSlack(i, u) => {
                    self.q[i][u] = (self.q[i][u] - x).max(0.0);
                    self.slack[i] += x;
                }
                Step::FromSlack(i, v) => {
                    self.slack[i] = (self.slack[i] - x).max(0.0);
                    self.q[i][v] += x;
                }
            }
        }
    }
}

const MAX_AUGMENTATIONS: usize = 100_000;

/// Sequential pistons: every column is lowered to its upper bound, then raised to its lower bound.
pub fn solve_csp(triple: &CspTriple, tol: Tol) -> Result<CspOutcome, CspError> {
    let (k, n) = (triple.rows.len(), triple.columns.len());
    let floor_row: Vec<f64> = triple.cells.iter().map(|r| r.iter().map(|c| c.0).sum()).collect();
    let floor_col: Vec<f64> = (0..n).map(|j| triple.cells.iter().map(|r| r[j].0).sum()).collect();
    for i in 0..k {
        if tol.lt(triple.rows[i].1, floor_row[i]) {
            return Ok(CspOutcome::Infeasible(Stuck::RowFloors(i)));
        }
    }
    for j in 0..n {
        if tol.lt(triple.columns[j].1, floor_col[j]) {
            return Ok(CspOutcome::Infeasible(Stuck::ColumnFloors(j)));
        }
    }
    let cap: Vec<Vec<f64>> = triple.cells.iter().map(|r| r.iter().map(|&(lo, hi)| hi - lo).collect()).collect();
    let lower_col: Vec<f64> = (0..n).map(|j| (triple.columns[j].0 - floor_col[j]).max(0.0)).collect();
    let upper_col: Vec<f64> = (0..n).map(|j| (triple.columns[j].1 - floor_col[j]).max(0.0)).collect();
    let need: f64 = lower_col.iter().sum();

    let scale = triple
        .rows
        .iter()
        .chain(&triple.columns)
        .chain(triple.cells.iter().flatten())
        .flat_map(|&(lo, hi)| [lo, hi])
        .filter(|x| x.is_finite())
        .fold(1.0f64, |a, x| a.max(x.abs()));
    let mut st = Pistons { q: vec![vec![0.0; n]; k], cap, slack: vec![0.0; k], slack_cap: vec![0.0; k], eps: 1e-13 * scale };

    for i in 0..k {
        let lo = (triple.rows[i].0 - floor_row[i]).max(0.0);
        let reachable: f64 = (0..n).map(|j| st.cap[i][j].min(upper_col[j])).sum();
        let hi = (triple.rows[i].1 - floor_row[i]).min(reachable).min(lo + need).max(lo);
        let mut left = hi;
        for j in 0..n {
            let x = left.min(st.cap[i][j]);
            st.q[i][j] = x;
            left -= x;
        }
        st.slack[i] = left;
        st.slack_cap[i] = hi - lo;
        if left > hi - lo + st.eps {
            return Ok(CspOutcome::Infeasible(Stuck::Row(i)));
        }
    }

    let mut rounds = 0;
    for j in 0..n {
        loop {
            let excess = st.col(j) - upper_col[j];
            if excess <= st.eps {
                break;
            }
            let room = |v: usize| {
                if v < j {
                    upper_col[v] - st.col(v)
                } else {
                    f64::INFINITY
                }
            };
            let Some(path) = st.push_path(j, &room) else {
                return Ok(CspOutcome::Infeasible(Stuck::Piston { column: j, pass: Pass::Ceiling }));
            };
            let end_room = match path.last() {
                Some(Step::Cell(_, _, v)) => room(*v),
                _ => f64::INFINITY,
            };
            let x = excess.min(st.bottleneck(&path)).min(end_room);
            st.apply(&path, x);
            rounds += 1;
            if rounds > MAX_AUGMENTATIONS {
                return Err(CspError::Verification("augmentation limit reached".into()));
            }
        }
    }
    for j in 0..n {
        loop {
            let deficit = lower_col[j] - st.col(j);
            if deficit <= st.eps {
                break;
            }
            let floor = |v: usize| if v < j { lower_col[v] } else { 0.0 };
            let Some(path) = st.pull_path(j, &floor) else {
                return Ok(CspOutcome::Infeasible(Stuck::Piston { column: j, pass: Pass::Floor }));
            };
            let surplus = match path.first() {
                Some(Step::Cell(_, v, _)) => st.col(*v) - floor(*v),
                _ => f64::INFINITY,
            };
            let x = deficit.min(st.bottleneck(&path)).min(surplus);
            st.apply(&path, x);
            rounds += 1;
            if rounds > MAX_AUGMENTATIONS {
                return Err(CspError::Verification("augmentation limit reached".into()));
            }
        }
    }

    let q: Vec<Vec<f64>> = (0..k).map(|i| (0..n).map(|j| st.q[i][j] + triple.cells[i][j].0).collect()).collect();
    triple.check(&q, tol).map_err(CspError::Verification)?;
    Ok(CspOutcome::Solution(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{flow_feasibility_oracle, OracleConfig};

    fn set(ix: &[usize]) -> ResourceSet {
        ResourceSet::from_indices(ix.iter().map(|j| j - 1))
    }

    #[test]
    fn marriage_examples() {
        let o = SolverOptions::default();
        let inst = MarriageInstance::new(2, vec![set(&[1, 2]), set(&[2])]).unwrap();
        match fractional_marriage(&inst, &o).unwrap() {
            MarriageOutcome::Perfect(m) => {
                assert!((m[0][0] - 1.0).abs() < 1e-9 && m[0][1].abs() < 1e-9);
                assert!(m[1][0].abs() < 1e-9 && (m[1][1] - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }

        let inst = MarriageInstance::new(2, vec![set(&[1]), set(&[1])]).unwrap();
        assert_eq!(
            fractional_marriage(&inst, &o).unwrap(),
            MarriageOutcome::Violation { women: vec![0, 1], men: set(&[1]) }
        );

        let inst = MarriageInstance::new(3, vec![set(&[1, 2, 3]); 3]).unwrap();
        match fractional_marriage(&inst, &o).unwrap() {
            MarriageOutcome::Perfect(m) => {
                for row in &m {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
                for j in 0..3 {
                    assert!((m.iter().map(|r| r[j]).sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn marriage_needs_enough_women() {
        let inst = MarriageInstance::new(2, vec![set(&[1, 2])]).unwrap();
        assert_eq!(
            fractional_marriage(&inst, &SolverOptions::default()),
            Err(MarriageError::TooFewWomen { women: 1, men: 2 })
        );
    }

    #[test]
    fn csp_examples() {
        let t = Tol::default();
        let one = CspTriple::new(vec![(2.0, 2.0)], vec![(0.0, 3.0)], vec![vec![(0.0, 5.0)]]).unwrap();
        assert_eq!(solve_csp(&one, t).unwrap(), CspOutcome::Solution(vec![vec![2.0]]));

        let confined = CspTriple::new(
            vec![(1.0, 1.0), (1.0, 1.0)],
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![vec![(0.0, 1.0), (0.0, 0.0)], vec![(0.0, 1.0), (0.0, 0.0)]],
        )
        .unwrap();
        assert!(matches!(solve_csp(&confined, t).unwrap(), CspOutcome::Infeasible(_)));
    }

    #[test]
    fn csp_hall_agrees_with_marriage() {
        let o = SolverOptions::default();
        for acc in [vec![set(&[1, 2]), set(&[2])], vec![set(&[1]), set(&[1])], vec![set(&[1, 2, 3]); 3]] {
            let n = acc.iter().fold(ResourceSet::EMPTY, |a, &r| a.union(r)).max().unwrap() + 1;
            let inst = MarriageInstance::new(n.max(acc.len()), acc).unwrap();
            let perfect = matches!(fractional_marriage(&inst, &o).unwrap(), MarriageOutcome::Perfect(_));
            let feasible = matches!(solve_csp(&CspTriple::hall(&inst), o.tol).unwrap(), CspOutcome::Solution(_));
            assert_eq!(perfect, feasible);
        }
    }

    #[test]
    fn csp_floors_and_ceilings() {
        let t = Tol::default();
        // Column 2 must get at least 1.5 but row 1 can only send 1 there.
        let tri = CspTriple::new(
            vec![(1.0, 2.0), (0.0, 3.0)],
            vec![(0.5, 1.0), (1.5, 4.0)],
            vec![vec![(0.0, 2.0), (0.0, 1.0)], vec![(0.25, 0.5), (0.0, 0.25)]],
        )
        .unwrap();
        let got = solve_csp(&tri, t).unwrap();
        let oracle = flow_feasibility_oracle(&tri.rows, &tri.columns, &tri.cells, &OracleConfig::default()).unwrap();
        assert_eq!(matches!(got, CspOutcome::Solution(_)), oracle.is_feasible());
    }

    #[test]
    fn csp_rejects_malformed() {
        assert!(matches!(
            CspTriple::new(vec![(2.0, 1.0)], vec![(0.0, 1.0)], vec![vec![(0.0, 1.0)]]),
            Err(CspError::MalformedInterval(_))
        ));
    }
}
