//! Communicating-vessel equalization of families of [`MonotonePL`] functions.
//!
//! `E[f_1..f_m](μ)` is the common value `h` reached when mass `μ` is split so
//! that every `f_k` takes the value `h` at its share.

use crate::monotone_fn::{MonotonePL, ValueInterval};
use crate::tol::Tol;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EqualizeError {
    #[error("cannot equalize an empty family")]
    EmptyFamily,
    #[error("mass must be finite and nonnegative, got {0}")]
    BadMass(f64),
    #[error("function {0} has a jump; the closed form needs continuous inputs")]
    DiscontinuousInput(usize),
    #[error("the equalization is undefined for every mass")]
    NowhereDefined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqualizeResult {
    pub height: Option<f64>,
    /// One feasible split of the mass, filling plateau slack in index order.
    pub witness: Option<Vec<f64>>,
}

pub fn equalize_at(fs: &[MonotonePL], mu: f64, tol: Tol) -> Result<EqualizeResult, EqualizeError> {
    let refs: Vec<&MonotonePL> = fs.iter().collect();
    equalize_refs(&refs, mu, tol)
}

/// [`equalize_at`] over borrowed functions.
pub fn equalize_refs(fs: &[&MonotonePL], mu: f64, tol: Tol) -> Result<EqualizeResult, EqualizeError> {
    if fs.is_empty() {
        return Err(EqualizeError::EmptyFamily);
    }
    if !mu.is_finite() || mu < 0.0 {
        return Err(EqualizeError::BadMass(mu));
    }
    Ok(match level(fs, mu, tol) {
        Some((h, ivs)) => EqualizeResult { height: Some(h), witness: Some(split(&ivs, mu)) },
        None => EqualizeResult { height: None, witness: None },
    })
}

/// The equalized height alone.
pub fn height(fs: &[&MonotonePL], mu: f64, tol: Tol) -> Option<f64> {
    level(fs, mu, tol).map(|(h, _)| h)
}

fn critical_values(fs: &[&MonotonePL], tol: Tol) -> Vec<f64> {
    let mut cs: Vec<f64> = fs.iter().flat_map(|f| f.critical_values()).collect();
    cs.sort_by(f64::total_cmp);
    cs.dedup_by(|a, b| tol.eq(*a, *b));
    cs
}

fn inverses(fs: &[&MonotonePL], h: f64, tol: Tol) -> Option<Vec<ValueInterval>> {
    fs.iter().map(|f| f.inverse_interval(h, tol)).collect()
}

fn level(fs: &[&MonotonePL], mu: f64, tol: Tol) -> Option<(f64, Vec<ValueInterval>)> {
    let cs = critical_values(fs, tol);
    for (i, &c) in cs.iter().enumerate() {
        if let Some(ivs) = inverses(fs, c, tol) {
            let lo: f64 = ivs.iter().map(|iv| iv.lo).sum();
            let hi: f64 = ivs.iter().map(|iv| iv.hi).sum();
            if tol.le(lo, mu) && tol.le(mu, hi) {
                return Some((c, ivs));
            }
        }
        let next = cs.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if let Some(found) = solve_open_piece(fs, mu, c, next, tol) {
            return Some(found);
        }
    }
    None
}

/// Between consecutive critical values every inverse is a single point moving
/// linearly with `h`, so two samples determine the total mass as a function of `h`.
fn solve_open_piece(
    fs: &[&MonotonePL],
    mu: f64,
    a: f64,
    b: f64,
    tol: Tol,
) -> Option<(f64, Vec<ValueInterval>)> {
    let (h1, h2) = if b.is_finite() {
        if tol.eq(a, b) {
            return None;
        }
        (a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0)
    } else {
        (a + 1.0, a + 2.0)
    };
    let x1: f64 = inverses(fs, h1, tol)?.iter().map(|iv| iv.lo).sum();
    let x2: f64 = inverses(fs, h2, tol)?.iter().map(|iv| iv.lo).sum();
    if !(x2 > x1) {
        return None;
    }
    let h = h1 + (mu - x1) * (h2 - h1) / (x2 - x1);
    if !(h > a && h < b) || tol.eq(h, a) || tol.eq(h, b) {
        return None;
    }
    Some((h, inverses(fs, h, tol)?))
}

fn split(ivs: &[ValueInterval], mu: f64) -> Vec<f64> {
    let mut w: Vec<f64> = ivs.iter().map(|iv| iv.lo).collect();
    let mut rest = mu - w.iter().sum::<f64>();
    if rest >= 0.0 {
        for (k, iv) in ivs.iter().enumerate() {
            if rest <= 0.0 {
                break;
            }
            let add = rest.min(iv.hi - iv.lo);
            w[k] += add;
            rest -= add;
        }
        if rest > 0.0 {
            *w.last_mut().unwrap() += rest;
        }
    } else {
        for k in (0..w.len()).rev() {
            let cut = (-rest).min(w[k]);
            w[k] -= cut;
            rest += cut;
            if rest >= 0.0 {
                break;
            }
        }
    }
    w
}

/// The equalization `μ ↦ E[fs](μ)` in closed form. Requires continuous inputs;
/// the result's domain starts at the least mass where it is defined.
pub fn equalize_fn(fs: &[MonotonePL], tol: Tol) -> Result<MonotonePL, EqualizeError> {
    if fs.is_empty() {
        return Err(EqualizeError::EmptyFamily);
    }
    if let Some(k) = fs.iter().position(|f| !f.is_continuous()) {
        return Err(EqualizeError::DiscontinuousInput(k));
    }
    if fs.len() == 1 {
        return Ok(fs[0].clone());
    }
    let refs: Vec<&MonotonePL> = fs.iter().collect();
    let h0 = fs.iter().map(|f| f.start_value()).fold(f64::NEG_INFINITY, f64::max);
    if fs.iter().any(|f| tol.lt(f.sup_value(), h0)) {
        return Err(EqualizeError::NowhereDefined);
    }
    let mut levels: Vec<f64> = critical_values(&refs, tol)
        .into_iter()
        .filter(|&c| c > h0 && !tol.eq(c, h0))
        .collect();
    levels.insert(0, h0);

    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut push = |x: f64, v: f64| {
        if let Some(&(px, pv)) = points.last() {
            if x <= px {
                if v == pv {
                    return;
                }
                // Rounding can only make a continuous result look like a jump.
                points.pop();
                points.push((px.max(x), v.max(pv)));
                return;
            }
        }
        points.push((x, v));
    };
    for &c in &levels {
        let ivs = inverses(&refs, c, tol).ok_or(EqualizeError::NowhereDefined)?;
        let lo: f64 = ivs.iter().map(|iv| iv.lo).sum();
        let hi: f64 = ivs.iter().map(|iv| iv.hi).sum();
        push(lo, c);
        if hi.is_infinite() {
            return MonotonePL::new(points, 0.0).map_err(|_| EqualizeError::NowhereDefined);
        }
        if hi > lo {
            push(hi, c);
        }
    }
    // Past the last critical value every input is on its rising tail.
    let inv_slope: f64 = fs.iter().map(|f| 1.0 / f.final_slope()).sum();
    MonotonePL::new(points, 1.0 / inv_slope).map_err(|_| EqualizeError::NowhereDefined)
}
