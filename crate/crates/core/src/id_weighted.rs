//! Games where each type converts its consumption into load with its own
//! positive weight per resource: `l_j = Σ_i w^i_j · s_j(i)`.
//!
//! [`w_solve_strong`] simulates descending pistons. A common ceiling `h` is
//! lowered step by step; after each step every container whose cost exceeds `h`
//! pushes liquid out along augmenting chains (converting by weight ratios) into
//! containers with room, and lossy exchange cycles are cancelled. When no push
//! helps, the ceiling is bisected to the exact stopping height and every
//! container that cannot shed load freezes there.

use crate::game::{Game, InvalidProfile, Outcome};
use crate::monotone_fn::MonotonePL;
use crate::subset::{ResourceSet, MAX_RESOURCES};
use crate::tol::Tol;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightedError {
    #[error("a weighted game needs between 1 and {MAX_RESOURCES} resources, got {0}")]
    BadSize(usize),
    #[error("cost of resource {0} must be defined from 0")]
    CostDomain(usize),
    #[error("type {0} has an empty or out-of-range resource set")]
    BadType(usize),
    #[error("type {0} needs a positive finite weight on each of its resources")]
    BadWeight(usize),
    #[error("cost of resource {} has a jump", .0 + 1)]
    DiscontinuousCost(usize),
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    InvalidProfile(#[from] InvalidProfile),
    #[error("no equilibrium after {iterations} iterations")]
    NoConvergence { iterations: usize, last: WeightedProfile },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedType {
    pub resources: ResourceSet,
    /// Length `n`; zero outside `resources`.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGame {
    costs: Vec<MonotonePL>,
    types: Vec<WeightedType>,
}

/// Per-type fraction vectors, each summing to one over the type's resources.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedProfile {
    pub fractions: Vec<Vec<f64>>,
}

impl WeightedGame {
    /// `types` pairs an allowed set with a full-length weight vector.
    pub fn new(costs: Vec<MonotonePL>, types: Vec<(ResourceSet, Vec<f64>)>) -> Result<Self, WeightedError> {
        let n = costs.len();
        if n == 0 || n > MAX_RESOURCES {
            return Err(WeightedError::BadSize(n));
        }
        if let Some(j) = costs.iter().position(|f| f.domain_start() != 0.0) {
            return Err(WeightedError::CostDomain(j));
        }
        let full = ResourceSet::full(n);
        let mut out = Vec::with_capacity(types.len());
        for (i, (r, w)) in types.into_iter().enumerate() {
            if r.is_empty() || !r.is_subset(full) {
                return Err(WeightedError::BadType(i));
            }
            if w.len() != n || r.iter().any(|j| !(w[j].is_finite() && w[j] > 0.0)) {
                return Err(WeightedError::BadWeight(i));
            }
            let weights = (0..n).map(|j| if r.contains(j) { w[j] } else { 0.0 }).collect();
            out.push(WeightedType { resources: r, weights });
        }
        Ok(WeightedGame { costs, types: out })
    }

    /// The plain game with each type `R` weighting every resource by `μ^R`.
    pub fn from_plain(game: &Game) -> Self {
        let n = game.n();
        let types = game
            .masses()
            .iter()
            .map(|(&r, &m)| (r, (0..n).map(|j| if r.contains(j) { m } else { 0.0 }).collect()))
            .collect();
        WeightedGame::new(game.costs().to_vec(), types).expect("plain games embed")
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[MonotonePL] {
        &self.costs
    }

    pub fn types(&self) -> &[WeightedType] {
        &self.types
    }

    /// Every type spread evenly over its resources.
    pub fn uniform_profile(&self) -> WeightedProfile {
        let fractions = self
            .types
            .iter()
            .map(|t| {
                let share = 1.0 / t.resources.len() as f64;
                (0..self.n()).map(|j| if t.resources.contains(j) { share } else { 0.0 }).collect()
            })
            .collect();
        WeightedProfile { fractions }
    }

    fn loads(&self, s: &WeightedProfile) -> Vec<f64> {
        let mut l = vec![0.0; self.n()];
        for (t, row) in self.types.iter().zip(&s.fractions) {
            for j in t.resources.iter() {
                l[j] += t.weights[j] * row[j];
            }
        }
        l
    }
}

fn check_profile(game: &WeightedGame, s: &WeightedProfile, tol: Tol) -> Result<(), InvalidProfile> {
    if s.fractions.len() != game.types.len() {
        return Err(InvalidProfile(format!(
            "{} fraction rows for {} types",
            s.fractions.len(),
            game.types.len()
        )));
    }
    for (i, (t, row)) in game.types.iter().zip(&s.fractions).enumerate() {
        if row.len() != game.n() {
            return Err(InvalidProfile(format!("row {} has the wrong length", i + 1)));
        }
        let slack = tol.eps();
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() || x < -slack || (!t.resources.contains(j) && x > slack) {
                return Err(InvalidProfile(format!("type {} has fraction {x} at resource {}", i + 1, j + 1)));
            }
        }
        let total: f64 = row.iter().sum();
        if !tol.eq(total, 1.0) {
            return Err(InvalidProfile(format!("fractions of type {} sum to {total}", i + 1)));
        }
    }
    Ok(())
}

pub fn w_evaluate(game: &WeightedGame, s: &WeightedProfile, tol: Tol) -> Result<Outcome, InvalidProfile> {
    check_profile(game, s, tol)?;
    let loads: Vec<f64> = game.loads(s).into_iter().map(|l| l.max(0.0)).collect();
    let costs = loads.iter().zip(&game.costs).map(|(&l, f)| f.eval(l).expect("nonnegative load")).collect();
    Ok(Outcome { loads, costs })
}

fn nash_given_costs(game: &WeightedGame, s: &WeightedProfile, costs: &[f64], tol: Tol) -> bool {
    game.types.iter().zip(&s.fractions).all(|(t, row)| {
        let cheapest = t.resources.iter().map(|j| costs[j]).fold(f64::INFINITY, f64::min);
        t.resources.iter().filter(|&k| row[k] > tol.eps()).all(|k| tol.le(costs[k], cheapest))
    })
}

pub fn w_is_nash(game: &WeightedGame, s: &WeightedProfile, tol: Tol) -> Result<bool, InvalidProfile> {
    let out = w_evaluate(game, s, tol)?;
    Ok(nash_given_costs(game, s, &out.costs, tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightedClass {
    NotNash,
    /// Nash with the strong equilibrium's costs; necessary for strongness only.
    NashCostsMatchStrong,
    /// Nash but with other costs, hence not strong.
    NashCostsDiffer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentOptions {
    /// Ceiling decrement; defaults to a thousandth of the descent range.
    pub step: Option<f64>,
    pub max_iters: usize,
    pub tol: Tol,
    /// Starting distribution; defaults to the uniform one.
    pub initial: Option<WeightedProfile>,
    pub trace: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { step: None, max_iters: 1_000_000, tol: Tol::default(), initial: None, trace: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub ceiling: f64,
    pub loads: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSolution {
    pub profile: WeightedProfile,
    pub loads: Vec<f64>,
    pub costs: Vec<f64>,
    /// Resources whose cost is a plateau height of their cost function.
    pub plateau_resources: Vec<usize>,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

pub fn w_classify(
    game: &WeightedGame,
    s: &WeightedProfile,
    opts: &DescentOptions,
) -> Result<WeightedClass, WeightedError> {
    let out = w_evaluate(game, s, opts.tol)?;
    if !nash_given_costs(game, s, &out.costs, opts.tol) {
        return Ok(WeightedClass::NotNash);
    }
    let strong = w_solve_strong(game, opts)?;
    let same = out.costs.iter().zip(&strong.costs).all(|(a, b)| opts.tol.eq(*a, *b));
    Ok(if same { WeightedClass::NashCostsMatchStrong } else { WeightedClass::NashCostsDiffer })
}

/// Fractions below this are treated as absent when searching for moves.
const TINY: f64 = 1e-13;
const RESTORE_ROUNDS: usize = 20_000;

struct Sim<'a> {
    game: &'a WeightedGame,
    s: Vec<Vec<f64>>,
    frozen: Vec<bool>,
}

#[derive(Debug)]
enum Move {
    /// Edges `(from, type, to)` ending at a container with room.
    Path(Vec<(usize, usize, usize)>),
    /// Edges of a cycle whose weight ratios multiply to less than one.
    Cycle(Vec<(usize, usize, usize)>),
}

impl<'a> Sim<'a> {
    fn n(&self) -> usize {
        self.game.n()
    }

    fn loads(&self) -> Vec<f64> {
        let mut l = vec![0.0; self.n()];
        for (t, row) in self.game.types.iter().zip(&self.s) {
            for j in t.resources.iter() {
                l[j] += t.weights[j] * row[j];
            }
        }
        l
    }

    fn caps(&self, h: f64) -> Vec<f64> {
        self.game.costs.iter().map(|f| f.reach(h).unwrap_or(0.0)).collect()
    }

    fn edges(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, t) in self.game.types.iter().enumerate() {
            for u in t.resources.iter() {
                if self.frozen[u] || self.s[i][u] <= TINY {
                    continue;
                }
                for v in t.resources.iter() {
                    if v != u && !self.frozen[v] {
                        out.push((u, i, v, (t.weights[v] / t.weights[u]).ln()));
                    }
                }
            }
        }
        out
    }

    /// Cheapest chain from `src` into room, or a lossy cycle reachable from it.
    fn find_move(&self, src: usize, room: &[f64]) -> Option<Move> {
        let n = self.n();
        let edges = self.edges();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        dist[src] = 0.0;
        let mut relaxed_at = None;
        for round in 0..n {
            relaxed_at = None;
            for &(u, i, v, w) in &edges {
                if dist[u].is_finite() && dist[u] + w < dist[v] - 1e-12 {
                    dist[v] = dist[u] + w;
                    pred[v] = Some((u, i));
                    relaxed_at = Some(v);
                }
            }
            if relaxed_at.is_none() {
                break;
            }
            if round == n - 1 {
                break;
            }
        }
        if let Some(mut v) = relaxed_at {
            for _ in 0..n {
                v = pred[v].expect("relaxed node has a predecessor").0;
            }
            let start = v;
            let mut cycle = Vec::new();
            loop {
                let (u, i) = pred[v].expect("cycle node has a predecessor");
                cycle.push((u, i, v));
                v = u;
                if v == start {
                    break;
                }
            }
            cycle.reverse();
            return Some(Move::Cycle(cycle));
        }
        let target = (0..n)
            .filter(|&v| v != src && dist[v].is_finite() && room[v] > 0.0)
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))?;
        let mut path = Vec::new();
        let mut v = target;
        while v != src {
            let (u, i) = pred[v]?;
            path.push((u, i, v));
            v = u;
        }
        path.reverse();
        Some(Move::Path(path))
    }

    /// Push up to `want` load out of the first container of `edges`.
    fn push(&mut self, edges: &[(usize, usize, usize)], want: f64, room_at_end: f64) -> f64 {
        let w = |i: usize, j: usize| self.game.types[i].weights[j];
        let mut gain = 1.0;
        let mut x = want;
        for &(u, i, v) in edges {
            x = x.min(self.s[i][u] * w(i, u) / gain);
            gain *= w(i, v) / w(i, u);
        }
        x = x.min(room_at_end / gain);
        if !(x > 0.0) {
            return 0.0;
        }
        let mut amount = x;
        for &(u, i, v) in edges {
            let frac = amount / w(i, u);
            self.s[i][u] = (self.s[i][u] - frac).max(0.0);
            self.s[i][v] += frac;
            amount = frac * w(i, v);
        }
        x
    }

    /// Bring every unfrozen container under the ceiling `h`; false if some cannot shed.
    fn restore(&mut self, h: f64) -> bool {
        let caps = self.caps(h);
        for _ in 0..RESTORE_ROUNDS {
            let loads = self.loads();
            let over: Vec<usize> = (0..self.n())
                .filter(|&j| !self.frozen[j] && loads[j] > caps[j] + 1e-12 * caps[j].max(1.0))
                .collect();
            if over.is_empty() {
                return true;
            }
            let room: Vec<f64> = (0..self.n())
                .map(|j| {
                    let r = caps[j] - loads[j];
                    if self.frozen[j] || r <= 1e-12 * caps[j].max(1.0) { 0.0 } else { r }
                })
                .collect();
            let mut progressed = false;
            for &j in &over {
                match self.find_move(j, &room) {
                    Some(Move::Cycle(c)) => {
                        progressed = self.push(&c, f64::INFINITY, f64::INFINITY) > 0.0;
                    }
                    Some(Move::Path(p)) => {
                        let end = p.last().unwrap().2;
                        progressed = self.push(&p, loads[j] - caps[j], room[end]) > 0.0;
                    }
                    None => {}
                }
                if progressed {
                    break;
                }
            }
            if !progressed {
                return false;
            }
        }
        false
    }

    /// Unfrozen containers that can neither reach room nor join a lossy cycle.
    fn stuck(&self, h: f64) -> Vec<usize> {
        let n = self.n();
        let caps = self.caps(h);
        let loads = self.loads();
        let edges = self.edges();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for &(u, _, v, w) in &edges {
            d[u][v] = d[u][v].min(w);
        }
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if d[a][k] + d[k][b] < d[a][b] {
                        d[a][b] = d[a][k] + d[k][b];
                    }
                }
            }
        }
        let mut free: Vec<bool> = (0..n)
            .map(|j| !self.frozen[j] && (caps[j] - loads[j] > 1e-12 * caps[j].max(1.0) || d[j][j] < -1e-12))
            .collect();
        loop {
            let mut changed = false;
            for &(u, _, v, _) in &edges {
                if !free[u] && free[v] {
                    free[u] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).filter(|&j| !self.frozen[j] && !free[j]).collect()
    }

    /// Freeze empty containers whose bottom is above the ceiling.
    fn freeze_bottomed(&mut self, h: f64) {
        let loads = self.loads();
        for j in 0..self.n() {
            if !self.frozen[j] && self.game.costs[j].start_value() > h && loads[j] <= 1e-12 {
                self.frozen[j] = true;
            }
        }
    }

    /// Move mass within each type toward its cheapest resources.
    fn equalize_sweep(&mut self, tol: Tol) -> bool {
        let mut moved = false;
        for i in 0..self.game.types.len() {
            let t = &self.game.types[i];
            let members: Vec<usize> = t.resources.iter().collect();
            for &u in &members {
                for &v in &members {
                    let loads = self.loads();
                    let cost = |j: usize, l: f64| self.game.costs[j].eval(l.max(0.0)).unwrap();
                    if u == v || self.s[i][u] <= TINY || !tol.lt(cost(v, loads[v]), cost(u, loads[u])) {
                        continue;
                    }
                    let (wu, wv) = (t.weights[u], t.weights[v]);
                    let ok = |d: f64| cost(u, loads[u] - wu * d) >= cost(v, loads[v] + wv * d);
                    let (mut lo, mut hi) = (0.0, self.s[i][u]);
                    if ok(hi) {
                        lo = hi;
                    } else {
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if ok(mid) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                    }
                    if lo > 0.0 {
                        self.s[i][u] -= lo;
                        self.s[i][v] += lo;
                        moved = true;
                    }
                }
            }
        }
        moved
    }
}

/// Run the piston descent from `opts.initial` (or the uniform profile).
pub fn w_solve_strong(game: &WeightedGame, opts: &DescentOptions) -> Result<WeightedSolution, WeightedError> {
    if let Some(j) = game.costs.iter().position(|f| !f.is_continuous()) {
        return Err(WeightedError::DiscontinuousCost(j));
    }
    let start = match &opts.initial {
        Some(p) => {
            check_profile(game, p, opts.tol)?;
            p.clone()
        }
        None => game.uniform_profile(),
    };
    let n = game.n();
    let mut sim = Sim { game, s: start.fractions, frozen: vec![false; n] };

    let mut top = f64::NEG_INFINITY;
    for j in 0..n {
        let most: f64 = game.types.iter().map(|t| t.weights[j]).sum();
        top = top.max(game.costs[j].eval(most).unwrap());
    }
    let bottom = game.costs.iter().map(|f| f.start_value()).fold(f64::INFINITY, f64::min);
    let step = match opts.step {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => return Err(WeightedError::BadStep(s)),
        None => 1e-3 * (top - bottom).max(1e-9),
    };

    let mut h = top;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let record = |trace: &mut Vec<TraceRow>, it: usize, h: f64, sim: &Sim| {
        if opts.trace {
            trace.push(TraceRow { iteration: it, ceiling: h, loads: sim.loads() });
        }
    };
    let ok = sim.restore(h);
    debug_assert!(ok, "every load fits under the initial ceiling");
    record(&mut trace, 0, h, &sim);

    while sim.frozen.iter().any(|f| !f) {
        iterations += 1;
        if iterations > opts.max_iters {
            return Err(WeightedError::NoConvergence { iterations, last: WeightedProfile { fractions: sim.s } });
        }
        let next = h - step;
        let saved = sim.s.clone();
        if sim.restore(next) {
            h = next;
            sim.freeze_bottomed(h);
            record(&mut trace, iterations, h, &sim);
            continue;
        }
        let (mut lo, mut hi) = (next, h);
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            sim.s = saved.clone();
            if sim.restore(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        sim.s = saved;
        sim.restore(lo);
        let mut stuck = sim.stuck(lo);
        if stuck.is_empty() {
            let loads = sim.loads();
            let caps = sim.caps(lo);
            stuck = (0..n).filter(|&j| !sim.frozen[j] && loads[j] > caps[j]).collect();
        }
        for j in stuck {
            sim.frozen[j] = true;
        }
        h = lo;
        sim.freeze_bottomed(h);
        record(&mut trace, iterations, h, &sim);
    }

    loop {
        let profile = WeightedProfile { fractions: sim.s.clone() };
        let out = w_evaluate(game, &profile, opts.tol)?;
        if nash_given_costs(game, &profile, &out.costs, opts.tol) {
            let plateau_resources =
                (0..n).filter(|&j| game.costs[j].is_plateau_height(out.costs[j], opts.tol)).collect();
            return Ok(WeightedSolution {
                profile,
                loads: out.loads,
                costs: out.costs,
                plateau_resources,
                iterations,
                trace,
            });
        }
        iterations += 1;
        if iterations > opts.max_iters || !sim.equalize_sweep(opts.tol) {
            return Err(WeightedError::NoConvergence { iterations, last: profile });
        }
    }
}
