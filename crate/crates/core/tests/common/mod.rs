#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vessel::game::Profile;
use vessel::{Game, MonotonePL, ResourceSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quarter(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> f64 {
    rng.gen_range(lo..=hi) as f64 * 0.25
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub flat_pieces: bool,
    pub flat_tail: bool,
    pub jumps: bool,
    pub start_at_zero: bool,
}

pub const STRICT: Shape = Shape { flat_pieces: false, flat_tail: false, jumps: false, start_at_zero: true };
pub const CONTINUOUS: Shape = Shape { flat_pieces: true, flat_tail: true, jumps: false, start_at_zero: true };

/// Random nondecreasing PL function with quarter-step breakpoints.
pub fn pl(rng: &mut ChaCha8Rng, shape: Shape) -> MonotonePL {
    let x0 = if shape.start_at_zero { 0.0 } else { quarter(rng, 0, 8) };
    let mut v = quarter(rng, 0, 8);
    let mut x = x0;
    let mut pts = vec![(x, v)];
    for _ in 0..rng.gen_range(0..=3) {
        x += quarter(rng, 1, 8);
        let slope = if shape.flat_pieces && rng.gen_bool(0.3) { 0.0 } else { quarter(rng, 1, 12) };
        v += slope * (pts.last().map_or(0.0, |p| x - p.0));
        pts.push((x, v));
        if shape.jumps && rng.gen_bool(0.25) {
            v += quarter(rng, 1, 8);
            pts.push((x, v));
        }
    }
    let tail = if shape.flat_tail && rng.gen_bool(0.2) { 0.0 } else { quarter(rng, 1, 12) };
    MonotonePL::new(pts, tail).expect("generated breakpoints are valid")
}

pub fn subset(rng: &mut ChaCha8Rng, n: usize) -> ResourceSet {
    loop {
        let bits = rng.gen_range(1u64..(1u64 << n));
        let s = ResourceSet(bits);
        if !s.is_empty() {
            return s;
        }
    }
}

pub fn game(rng: &mut ChaCha8Rng, max_n: usize, max_types: usize, shape: Shape) -> Game {
    let n = rng.gen_range(1..=max_n);
    let costs = (0..n).map(|_| pl(rng, shape)).collect();
    let types = rng.gen_range(1..=max_types);
    let masses: Vec<(ResourceSet, f64)> = (0..types).map(|_| (subset(rng, n), rng.gen_range(0.0..=5.0))).collect();
    Game::new(costs, masses).expect("generated game is valid")
}

/// A point of `m·Δ^R` with random weights.
pub fn split(rng: &mut ChaCha8Rng, r: ResourceSet, n: usize, m: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|j| if r.contains(j) { rng.gen_range(0.0..1.0) + 1e-3 } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| m * x / total).collect()
}

pub fn profile(rng: &mut ChaCha8Rng, g: &Game) -> Profile {
    g.masses().iter().map(|(&r, &m)| (r, split(rng, r, g.n(), m))).collect()
}

/// Random partition of `0..m` into nonempty groups.
pub fn partition(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<usize>> {
    let mut ix: Vec<usize> = (0..m).collect();
    ix.shuffle(rng);
    let groups = rng.gen_range(1..=m);
    let mut out = vec![Vec::new(); groups];
    for (k, &i) in ix.iter().enumerate() {
        out[if k < groups { k } else { rng.gen_range(0..groups) }].push(i);
    }
    out
}

pub fn close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * 1f64.max(a.abs()).max(b.abs())
}
