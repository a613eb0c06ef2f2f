//! Euclidean projection onto a box cut by up to two halfspaces with
//! non-negative coefficients.

use crate::error::{Error, Result};

/// `{x : coef . x <= bound}` with `coef >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Halfspace<'a> {
    pub coef: &'a [f64],
    pub bound: f64,
}

impl Halfspace<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn holds(&self, x: &[f64]) -> bool {
        let scale = self.bound.abs().max(1e-300);
        self.value(x) <= self.bound + 1e-12 * scale
    }
}

const BISECTION_STEPS: usize = 200;

fn shifted(y: &[f64], upper: &[f64], h: &[Halfspace], mu: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let mut v = y[i];
            for (j, hs) in h.iter().enumerate() {
                v -= mu[j] * hs.coef[i];
            }
            v.clamp(0.0, upper[i])
        })
        .collect()
}

/// Smallest multiplier that brings `coef . x(mu)` down to the bound.
fn bisect(mut f: impl FnMut(f64) -> f64, bound: f64, hi_hint: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = hi_hint.max(1e-12);
    let mut grow = 0;
    while f(hi) > bound && grow < 200 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn multiplier_hint(y: &[f64], coef: &[f64]) -> f64 {
    y.iter()
        .zip(coef)
        .filter(|(_, &a)| a > 0.0)
        .map(|(v, a)| v.max(0.0) / a)
        .fold(0.0, f64::max)
}

/// Projection of `y` onto `{0 <= x <= upper} ∩ h[0] ∩ h[1] ...` (at most two
/// halfspaces), by bisection on the KKT multipliers.
pub fn project_feasible(y: &[f64], upper: &[f64], h: &[Halfspace]) -> Result<Vec<f64>> {
    assert!(h.len() <= 2, "at most two halfspaces are supported");
    for (j, hs) in h.iter().enumerate() {
        if hs.bound < 0.0 {
            return Err(Error::Infeasible(format!(
                "constraint {j} has negative bound {}; the set is empty",
                hs.bound
            )));
        }
    }
    let zero = vec![0.0; h.len()];
    let clipped = shifted(y, upper, h, &zero);
    if h.iter().all(|hs| hs.holds(&clipped)) {
        return Ok(clipped);
    }

    // One constraint active.
    for j in 0..h.len() {
        let mut mu = zero.clone();
        let hs = h[j];
        mu[j] = bisect(
            |m| {
                let mut t = zero.clone();
                t[j] = m;
                hs.value(&shifted(y, upper, h, &t))
            },
            hs.bound,
            multiplier_hint(y, hs.coef),
        );
        let x = shifted(y, upper, h, &mu);
        if h.iter().all(|g| g.holds(&x)) {
            return Ok(x);
        }
    }

    // Both active: the outer multiplier is found against the inner optimum.
    let (h0, h1) = (h[0], h[1]);
    let inner = |m0: f64| -> f64 {
        let x0 = shifted(y, upper, h, &[m0, 0.0]);
        if h1.holds(&x0) {
            return 0.0;
        }
        bisect(
            |m1| h1.value(&shifted(y, upper, h, &[m0, m1])),
            h1.bound,
            multiplier_hint(y, h1.coef),
        )
    };
    let m0 = bisect(
        |m0| h0.value(&shifted(y, upper, h, &[m0, inner(m0)])),
        h0.bound,
        multiplier_hint(y, h0.coef),
    );
    Ok(shifted(y, upper, h, &[m0, inner(m0)]))
}

/// Projection of `y` onto `{0 <= x <= upper, sum x = 1}`. Needs
/// `sum upper >= 1`.
pub fn project_capped_simplex(y: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    let cap: f64 = upper.iter().sum();
    if cap < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!("row capacity {cap} is below one")));
    }
    let at = |tau: f64| -> Vec<f64> { y.iter().zip(upper).map(|(v, u)| (v - tau).clamp(0.0, *u)).collect() };
    let total = |tau: f64| at(tau).iter().sum::<f64>();
    let lo0 = y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Spread the bisection leftover over the free coordinates.
    let mut x = at(0.5 * (lo + hi));
    let gap = 1.0 - x.iter().sum::<f64>();
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0 && x[i] < upper[i]).collect();
    if !free.is_empty() {
        for &i in &free {
            x[i] = (x[i] + gap / free.len() as f64).clamp(0.0, upper[i]);
        }
    }
    Ok(x)
}
