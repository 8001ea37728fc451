//! Monotone bisection on positive parameters.
//!
//! Every privacy-loss search in the engine has the same shape: a
//! predicate over μ > 0 that is false below some threshold and true above
//! it. The search runs on a geometric scale because μ spans many orders
//! of magnitude.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Starting bracket `[lo, hi]`.
    pub initial: (f64, f64),
    /// Expansion stops once the bracket would leave `[floor, ceiling]`.
    pub floor: f64,
    pub ceiling: f64,
    /// Factor applied per expansion step.
    pub expansion: f64,
    /// Stop when `hi / lo - 1 <= rel_tol`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            initial: (1e-4, 1e4),
            floor: 1e-12,
            ceiling: 1e12,
            expansion: 10.0,
            rel_tol: 1e-6,
            max_iter: 500,
        }
    }
}

impl SearchOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchOutcome {
    /// Smallest satisfying value, within the relative tolerance from above.
    Found(f64),
    /// The predicate already holds at the search floor.
    AtFloor(f64),
}

impl SearchOutcome {
    pub fn value(self) -> f64 {
        match self {
            SearchOutcome::Found(x) | SearchOutcome::AtFloor(x) => x,
        }
    }
}

/// Smallest `x` in `[floor, ceiling]` for which the monotone predicate holds.
///
/// The returned value always satisfies the predicate; when the outcome is
/// `Found`, the predicate fails at `x / (1 + rel_tol)`.
pub fn smallest_satisfying<P>(predicate: P, opts: &SearchOptions) -> Result<SearchOutcome>
where
    P: Fn(f64) -> bool,
{
    let (mut lo, mut hi) = opts.initial;
    if !(lo > 0.0 && hi > lo && opts.expansion > 1.0 && opts.rel_tol > 0.0) {
        return Err(Error::Configuration(format!(
            "invalid search options {opts:?}"
        )));
    }

    if predicate(lo) {
        loop {
            let next = lo / opts.expansion;
            if next < opts.floor {
                return if predicate(opts.floor) {
                    Ok(SearchOutcome::AtFloor(opts.floor))
                } else {
                    hi = lo;
                    lo = opts.floor;
                    Ok(SearchOutcome::Found(bisect(&predicate, lo, hi, opts)))
                };
            }
            if !predicate(next) {
                hi = lo;
                lo = next;
                break;
            }
            lo = next;
        }
    } else {
        while !predicate(hi) {
            lo = hi;
            hi *= opts.expansion;
            if hi > opts.ceiling * (1.0 + 1e-9) {
                return Err(Error::BracketLimit(format!(
                    "predicate still false at {lo:e}; bracket ceiling {:e} reached",
                    opts.ceiling
                )));
            }
        }
    }
    Ok(SearchOutcome::Found(bisect(&predicate, lo, hi, opts)))
}

// Invariant: predicate(lo) is false, predicate(hi) is true.
fn bisect<P: Fn(f64) -> bool>(predicate: &P, mut lo: f64, mut hi: f64, opts: &SearchOptions) -> f64 {
    for _ in 0..opts.max_iter {
        if hi / lo - 1.0 <= opts.rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if predicate(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solve `f(x) = target` for a continuous non-decreasing `f` on `[lo, hi]`
/// by plain bisection down to floating-point resolution.
pub fn solve_increasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo <= target && target <= fhi) {
        return Err(Error::NoSolution(format!(
            "target {target} outside [{flo}, {fhi}] on [{lo}, {hi}]"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (f(lo) - target).abs() <= (f(hi) - target).abs() {
        lo
    } else {
        hi
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_threshold_inside_initial_bracket() {
        let opts = SearchOptions::default();
        let x = smallest_satisfying(|x| x >= 3.7, &opts).unwrap();
        match x {
            SearchOutcome::Found(v) => {
                assert!(v >= 3.7);
                assert!(v / 3.7 - 1.0 <= 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expands_upward_and_downward() {
        let opts = SearchOptions::default();
        let up = smallest_satisfying(|x| x >= 2.5e7, &opts).unwrap().value();
        assert!(up >= 2.5e7 && up / 2.5e7 - 1.0 <= 1e-6);
        let down = smallest_satisfying(|x| x >= 3e-9, &opts).unwrap().value();
        assert!(down >= 3e-9 && down / 3e-9 - 1.0 <= 1e-6);
    }

    #[test]
    fn vacuous_predicate_returns_floor() {
        let opts = SearchOptions::default();
        assert_eq!(
            smallest_satisfying(|_| true, &opts).unwrap(),
            SearchOutcome::AtFloor(1e-12)
        );
    }

    #[test]
    fn threshold_between_floor_and_last_expansion() {
        let opts = SearchOptions::default();
        let v = smallest_satisfying(|x| x >= 5e-12, &opts).unwrap().value();
        assert!(v >= 5e-12 && v / 5e-12 - 1.0 <= 1e-6);
    }

    #[test]
    fn impossible_predicate_hits_ceiling() {
        let opts = SearchOptions::default();
        assert!(matches!(
            smallest_satisfying(|_| false, &opts),
            Err(Error::BracketLimit(_))
        ));
    }

    #[test]
    fn solve_increasing_reaches_machine_precision() {
        let x = solve_increasing(|x| x * x * x, 2.0, 0.0, 2.0).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-15);
        assert!(solve_increasing(|x| x, 5.0, 0.0, 1.0).is_err());
    }
}
