//! Naive reference implementations for cross-checking the solvers.
//!
//! These deliberately share no code paths with the hydraulic algorithms: the
//! potential oracle runs block coordinate descent with bisection on `eval`, and
//! the flow oracle solves a circulation with lower bounds in scaled integers.

use crate::distribution::DistributionConstraint;
use crate::game::Game;
use crate::subset::ResourceSet;
use std::collections::VecDeque;
use thiserror::Error;

pub const ORACLE_MAX_N: usize = 4;
pub const ORACLE_MAX_TYPES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle handles at most {ORACLE_MAX_N} resources and {ORACLE_MAX_TYPES} types, got {n} and {types}")]
    TooLarge { n: usize, types: usize },
    #[error("grid resolution must be positive and the flow scale at least 1")]
    BadConfig,
    #[error("cost of resource {} has a jump", .0 + 1)]
    DiscontinuousCost(usize),
    #[error("a bound does not fit the scaled integer range")]
    ScaleOverflow,
    #[error("inconsistent instance shape")]
    BadShape,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub grid_resolution: f64,
    pub max_flow_scale: i64,
    /// Rotates the sweep order of the descent.
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { grid_resolution: 1e-11, max_flow_scale: 1 << 20, rng_seed: 0 }
    }
}

impl OracleConfig {
    fn check(&self) -> Result<(), OracleError> {
        if !(self.grid_resolution > 0.0) || self.max_flow_scale < 1 {
            return Err(OracleError::BadConfig);
        }
        Ok(())
    }
}

const MAX_SWEEPS: usize = 200_000;

/// Largest `x` in `[0, cap]` with `f(base + x) <= level`.
fn fill_to(f: &crate::MonotonePL, base: f64, cap: f64, level: f64) -> f64 {
    let at = |x: f64| f.eval(base + x).unwrap();
    if at(cap) <= level {
        return cap;
    }
    if at(0.0) > level {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) <= level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    lo
}

/// Best response of one type of mass `m` against fixed `base` loads.
fn water_fill(game: &Game, r: ResourceSet, m: f64, base: &[f64]) -> Vec<f64> {
    let members: Vec<usize> = r.iter().collect();
    let cost = |j: usize, x: f64| game.cost(j).eval(base[j] + x).unwrap();
    let mut lo = members.iter().map(|&j| cost(j, 0.0)).fold(f64::INFINITY, f64::min);
    let mut hi = members.iter().map(|&j| cost(j, m)).fold(f64::NEG_INFINITY, f64::max);
    let placed = |level: f64| -> Vec<f64> { members.iter().map(|&j| fill_to(game.cost(j), base[j], m, level)).collect() };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if placed(mid).iter().sum::<f64>() >= m {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let below = placed(lo);
    let above = placed(hi);
    let mut rest = m - below.iter().sum::<f64>();
    let mut out = vec![0.0; game.n()];
    for (k, &j) in members.iter().enumerate() {
        let extra = (above[k] - below[k]).max(0.0).min(rest.max(0.0));
        out[j] = below[k] + extra;
        rest -= extra;
    }
    out
}

/// Loads and costs of a potential minimizer, by exact block coordinate descent.
pub fn potential_min_oracle(game: &Game, cfg: &OracleConfig) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
    cfg.check()?;
    let n = game.n();
    let types: Vec<(ResourceSet, f64)> = game.masses().iter().map(|(&r, &m)| (r, m)).collect();
    if n > ORACLE_MAX_N || types.len() > ORACLE_MAX_TYPES {
        return Err(OracleError::TooLarge { n, types: types.len() });
    }
    if let Some(j) = game.costs().iter().position(|f| !f.is_continuous()) {
        return Err(OracleError::DiscontinuousCost(j));
    }
    let k = types.len();
    let mut rows: Vec<Vec<f64>> = types
        .iter()
        .map(|&(r, m)| (0..n).map(|j| if r.contains(j) { m / r.len() as f64 } else { 0.0 }).collect())
        .collect();
    let loads_of = |rows: &[Vec<f64>]| -> Vec<f64> {
        (0..n).map(|j| rows.iter().map(|row| row[j]).sum()).collect()
    };
    let offset = if k == 0 { 0 } else { (cfg.rng_seed % k as u64) as usize };
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for step in 0..k {
            let i = (step + offset) % k;
            let mut base = loads_of(&rows);
            for j in 0..n {
                base[j] -= rows[i][j];
            }
            let (r, m) = types[i];
            let fresh = water_fill(game, r, m, &base);
            for j in 0..n {
                change = change.max((fresh[j] - rows[i][j]).abs());
            }
            rows[i] = fresh;
        }
        if change < cfg.grid_resolution {
            break;
        }
    }
    let loads = loads_of(&rows);
    let costs = loads.iter().enumerate().map(|(j, &l)| game.cost(j).eval(l.max(0.0)).unwrap()).collect();
    Ok((loads, costs))
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowVerdict {
    /// Row-by-column amounts meeting every bound.
    Feasible(Vec<Vec<f64>>),
    Infeasible,
}

impl FlowVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FlowVerdict::Feasible(_))
    }
}

struct Network {
    cap: Vec<Vec<i64>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Network { cap: vec![vec![0; nodes]; nodes] }
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.cap.len();
        let mut total = 0i64;
        loop {
            let mut pred = vec![usize::MAX; n];
            pred[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    if pred[v] == usize::MAX && self.cap[u][v] > 0 {
                        pred[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if pred[t] == usize::MAX {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while v != s {
                push = push.min(self.cap[pred[v]][v]);
                v = pred[v];
            }
            let mut v = t;
            while v != s {
                let u = pred[v];
                self.cap[u][v] -= push;
                self.cap[v][u] += push;
                v = u;
            }
            total += push;
        }
    }
}

fn scaled(x: f64, scale: i64, big: i64) -> Result<i64, OracleError> {
    if x == f64::INFINITY {
        return Ok(big);
    }
    let v = (x * scale as f64).round();
    if !v.is_finite() || v.abs() > (1u64 << 52) as f64 {
        return Err(OracleError::ScaleOverflow);
    }
    Ok(v as i64)
}

/// Exact feasibility of a bipartite transport with bounds on rows, columns and cells.
pub fn flow_feasibility_oracle(
    rows: &[(f64, f64)],
    columns: &[(f64, f64)],
    cells: &[Vec<(f64, f64)>],
    cfg: &OracleConfig,
) -> Result<FlowVerdict, OracleError> {
    cfg.check()?;
    let (k, n) = (rows.len(), columns.len());
    if cells.len() != k || cells.iter().any(|r| r.len() != n) {
        return Err(OracleError::BadShape);
    }
    let scale = cfg.max_flow_scale;
    let mut finite_sum = 0.0;
    for &(lo, hi) in rows.iter().chain(columns).chain(cells.iter().flatten()) {
        if lo > hi || lo < 0.0 || lo.is_nan() || hi.is_nan() || lo.is_infinite() {
            return Err(OracleError::BadShape);
        }
        finite_sum += lo + if hi.is_finite() { hi } else { 0.0 };
    }
    let big = scaled(finite_sum + 1.0, scale, 0)?;
    big.checked_mul(4).ok_or(OracleError::ScaleOverflow)?;

    // Nodes: rows, columns, source, sink, super source, super sink.
    let (src, snk) = (k + n, k + n + 1);
    let (ss, tt) = (k + n + 2, k + n + 3);
    let mut net = Network::new(k + n + 4);
    let mut excess = vec![0i64; k + n + 4];
    let mut add = |net: &mut Network, u: usize, v: usize, lo: f64, hi: f64| -> Result<i64, OracleError> {
        let l = scaled(lo, scale, big)?;
        let h = scaled(hi, scale, big)?;
        if l > h {
            return Err(OracleError::ScaleOverflow);
        }
        net.cap[u][v] += h - l;
        excess[v] += l;
        excess[u] -= l;
        Ok(l)
    };
    for (i, &(lo, hi)) in rows.iter().enumerate() {
        add(&mut net, src, i, lo, hi)?;
    }
    let mut floors = vec![vec![0i64; n]; k];
    for i in 0..k {
        for j in 0..n {
            let (lo, hi) = cells[i][j];
            floors[i][j] = add(&mut net, i, k + j, lo, hi)?;
        }
    }
    for (j, &(lo, hi)) in columns.iter().enumerate() {
        add(&mut net, k + j, snk, lo, hi)?;
    }
    net.cap[snk][src] += big;
    let mut demand = 0i64;
    for (v, &e) in excess.iter().enumerate() {
        if e > 0 {
            net.cap[ss][v] += e;
            demand += e;
        } else if e < 0 {
            net.cap[v][tt] += -e;
        }
    }
    let original: Vec<Vec<i64>> = (0..k).map(|i| (0..n).map(|j| net.cap[i][k + j]).collect()).collect();
    if net.max_flow(ss, tt) < demand {
        return Ok(FlowVerdict::Infeasible);
    }
    let witness = (0..k)
        .map(|i| {
            (0..n)
                .map(|j| (floors[i][j] + original[i][j] - net.cap[i][k + j]) as f64 / scale as f64)
                .collect()
        })
        .collect();
    Ok(FlowVerdict::Feasible(witness))
}

/// Flow check of a distribution constraint; witness rows follow `dc.masses()` order.
pub fn distribution_oracle(dc: &DistributionConstraint, cfg: &OracleConfig) -> Result<FlowVerdict, OracleError> {
    let rows: Vec<(f64, f64)> = dc.masses().values().map(|&m| (m, m)).collect();
    let cells: Vec<Vec<(f64, f64)>> = dc
        .masses()
        .keys()
        .map(|r| (0..dc.n()).map(|j| (0.0, if r.contains(j) { f64::INFINITY } else { 0.0 })).collect())
        .collect();
    flow_feasibility_oracle(&rows, dc.intervals(), &cells, cfg)
}

/// Whether a perfect fractional marriage exists between `acceptable.len()` women and `n` men.
pub fn hall_oracle(n: usize, acceptable: &[ResourceSet], cfg: &OracleConfig) -> Result<bool, OracleError> {
    let rows = vec![(1.0, 1.0); acceptable.len()];
    let columns = vec![(1.0, 1.0); n];
    let cells: Vec<Vec<(f64, f64)>> = acceptable
        .iter()
        .map(|r| (0..n).map(|j| (0.0, if r.contains(j) { 1.0 } else { 0.0 })).collect())
        .collect();
    Ok(flow_feasibility_oracle(&rows, &columns, &cells, cfg)?.is_feasible())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MonotonePL;

    fn set(ix: &[usize]) -> ResourceSet {
        ResourceSet::from_indices(ix.iter().map(|j| j - 1))
    }

    fn close(a: &[f64], b: &[f64], eps: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps)
    }

    #[test]
    fn potential_examples() {
        let cfg = OracleConfig::default();
        let need_mg = Game::new(
            vec![MonotonePL::identity(), MonotonePL::capped_identity(2.0)],
            [(set(&[1]), 1.0), (set(&[2]), 3.0)],
        )
        .unwrap();
        let (_, costs) = potential_min_oracle(&need_mg, &cfg).unwrap();
        assert!(close(&costs, &[1.0, 2.0], 1e-6), "{costs:?}");

        let not_enough = Game::new(
            vec![MonotonePL::identity(), MonotonePL::identity()],
            [(set(&[2]), 1.0), (set(&[1, 2]), 1.0)],
        )
        .unwrap();
        let (_, costs) = potential_min_oracle(&not_enough, &cfg).unwrap();
        assert!(close(&costs, &[1.0, 1.0], 1e-6), "{costs:?}");

        let single = Game::new(vec![MonotonePL::affine(1.0, 2.0)], [(set(&[1]), 1.5)]).unwrap();
        let (loads, costs) = potential_min_oracle(&single, &cfg).unwrap();
        assert!(close(&loads, &[1.5], 1e-12) && close(&costs, &[4.0], 1e-12));
    }

    #[test]
    fn potential_rejects_large_games() {
        let g = Game::new(vec![MonotonePL::identity(); 5], [(ResourceSet::full(5), 1.0)]).unwrap();
        assert_eq!(
            potential_min_oracle(&g, &OracleConfig::default()),
            Err(OracleError::TooLarge { n: 5, types: 1 })
        );
    }

    #[test]
    fn flow_examples() {
        let cfg = OracleConfig::default();
        assert!(!hall_oracle(2, &[set(&[1]), set(&[1])], &cfg).unwrap());
        assert!(hall_oracle(2, &[set(&[1, 2]), set(&[2])], &cfg).unwrap());

        let dc = DistributionConstraint::new(
            [(set(&[1]), 1.0), (set(&[2]), 1.0), (set(&[1, 2]), 1.0)],
            vec![(1.0, 2.0), (1.0, 2.0)],
        )
        .unwrap();
        match distribution_oracle(&dc, &cfg).unwrap() {
            FlowVerdict::Feasible(w) => {
                for (row, &m) in w.iter().zip(dc.masses().values()) {
                    assert!((row.iter().sum::<f64>() - m).abs() < 1e-12);
                }
            }
            FlowVerdict::Infeasible => panic!("expected a witness"),
        }

        let verdict = flow_feasibility_oracle(
            &[(1.0, 1.0), (1.0, 1.0)],
            &[(0.0, 1.0), (0.0, 1.0)],
            &[vec![(0.0, 1.0), (0.0, 0.0)], vec![(0.0, 1.0), (0.0, 0.0)]],
            &cfg,
        )
        .unwrap();
        assert_eq!(verdict, FlowVerdict::Infeasible);
    }

    #[test]
    fn flow_overflow() {
        let cfg = OracleConfig::default();
        let r = flow_feasibility_oracle(&[(1e300, 1e300)], &[(0.0, f64::INFINITY)], &[vec![(0.0, f64::INFINITY)]], &cfg);
        assert_eq!(r, Err(OracleError::ScaleOverflow));
    }
}
