//! Computable pieces of the global-existence argument: the integrability
//! bootstrap, its admissibility threshold, the interpolation bound for the
//! maximal-regularity constant, the window of dual exponents for which that
//! bound drops below one, and the Gronwall envelope for total mass.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::network::ReactionNetwork;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("exponent must exceed 1, got {0}")]
    ExponentTooSmall(f64),
    #[error("interpolation exponent r = {0} outside [3/2, 2]")]
    OutOfInterpolationRange(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("max_iter must be at least 1")]
    NoIterations,
}

/// `(λ − 1)(n + 2) / 2`: the smallest integrability exponent from which the
/// bootstrap reaches `L∞`.
pub fn admissible_p_threshold(n: u32, lambda: u32) -> f64 {
    (f64::from(lambda) - 1.0) * (f64::from(n) + 2.0) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub p0: f64,
    pub n: u32,
    pub lambda: u32,
    pub sequence: Vec<f64>,
    /// Index with `p_{k0}/λ > (n+2)/2`, present iff `diverged`.
    pub k0: Option<usize>,
    /// `true` when the iteration escaped past `(n+2)/2` (the `L∞` regime).
    pub diverged: bool,
    pub threshold: f64,
    pub above_threshold: bool,
}

/// Iterates `p_{k+1} = (n+2)(p_k/λ) / (n+2 − 2 p_k/λ)` until `p_k/λ > (n+2)/2`.
///
/// Stops without divergence if the sequence fails to increase strictly
/// (stagnation at or below the threshold) or after `max_iter` updates.
pub fn bootstrap_sequence(
    p0: f64,
    n: u32,
    lambda: u32,
    max_iter: usize,
) -> Result<BootstrapReport, TheoryError> {
    if !(p0 > 1.0) {
        return Err(TheoryError::ExponentTooSmall(p0));
    }
    if max_iter == 0 {
        return Err(TheoryError::NoIterations);
    }
    let nn = f64::from(n) + 2.0;
    let lam = f64::from(lambda.max(1));
    let threshold = admissible_p_threshold(n, lambda.max(1));
    let mut sequence = vec![p0];
    let mut k0 = None;
    for k in 0..=max_iter {
        let p = sequence[k];
        if p / lam > nn / 2.0 {
            k0 = Some(k);
            break;
        }
        if k == max_iter {
            break;
        }
        let q = p / lam;
        // p_k/λ = (n+2)/2 exactly sends the next exponent to infinity.
        let denom = nn - 2.0 * q;
        let next = if denom > 0.0 {
            nn * q / denom
        } else {
            f64::INFINITY
        };
        // At the threshold the map has the fixed point p = (λ−1)(n+2)/2;
        // rounding there must not count as growth.
        if !(next > p * (1.0 + 1e-12)) {
            // Record the stagnating iterate once so the fixed point is visible.
            sequence.push(next);
            break;
        }
        sequence.push(next);
    }
    Ok(BootstrapReport {
        p0,
        n,
        lambda,
        sequence,
        diverged: k0.is_some(),
        k0,
        threshold,
        above_threshold: p0 > threshold,
    })
}

/// Right-hand side of
/// `C_mr(r) ≤ mr^{−(4/r)(r − 3/2)} · C_mr(3/2)^{(3/r)(2 − r)}`.
pub fn cmr_interpolation_bound(r: f64, mr: f64, c_three_halves: f64) -> Result<f64, TheoryError> {
    if !(1.5..=2.0).contains(&r) {
        return Err(TheoryError::OutOfInterpolationRange(r));
    }
    if !(mr > 0.0) {
        return Err(TheoryError::NonPositive {
            name: "mr",
            value: mr,
        });
    }
    if !(c_three_halves > 0.0) {
        return Err(TheoryError::NonPositive {
            name: "c_three_halves",
            value: c_three_halves,
        });
    }
    let (a, b) = interpolation_exponents(r);
    Ok(libm::pow(mr, a) * libm::pow(c_three_halves, b))
}

fn interpolation_exponents(r: f64) -> (f64, f64) {
    // Endpoints are returned exactly.
    if r == 1.5 {
        (0.0, 1.0)
    } else if r == 2.0 {
        (-1.0, 0.0)
    } else {
        (-(4.0 / r) * (r - 1.5), (3.0 / r) * (2.0 - r))
    }
}

/// A sub-interval of the real line with per-endpoint openness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    fn intersect(self, other: Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}

/// Which case of `q = D·C(3/2)` against 1 produced the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualBranch {
    Above,
    Below,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualExponentWindow {
    pub d_max: f64,
    pub c_three_halves: f64,
    pub branch: DualBranch,
    /// Exact solution set of `(3/p′)(2−p′) ln q < ln D` inside `[3/2, 2]`;
    /// `None` when empty.
    pub window: Option<Interval>,
    /// The simpler sufficient branch condition (`2−p′ < ½ ln D / ln q` for
    /// `q > 1`, `2−p′ > ⅔ ln D / ln q` for `q < 1`); always inside `window`.
    pub branch_window: Option<Interval>,
}

impl DualExponentWindow {
    pub fn contains(&self, p_prime: f64) -> bool {
        self.window.is_some_and(|w| w.contains(p_prime))
    }
}

/// `(3/p′)(2−p′) ln q < ln D` with `D = d_max/2`, `q = D·c_three_halves`;
/// equivalent to the interpolation bound at `mr = D` being below one.
pub fn dual_exponent_condition(p_prime: f64, d_max: f64, c_three_halves: f64) -> bool {
    let d = d_max / 2.0;
    let q = d * c_three_halves;
    (3.0 / p_prime) * (2.0 - p_prime) * libm::log(q) < libm::log(d)
}

fn nonempty(i: Interval) -> Option<Interval> {
    (!i.is_empty()).then_some(i)
}

/// Window of `p′ ∈ [3/2, 2]` whose interpolation bound is below one.
pub fn select_dual_exponent(d_max: f64, c_three_halves: f64) -> DualExponentWindow {
    let d = d_max / 2.0;
    let q = d * c_three_halves;
    let ln_d = libm::log(d);
    let ln_q = libm::log(q);
    let base = Interval::closed(1.5, 2.0);

    // Multiply the condition by p′ > 0: 6 ln q < p′ (ln D + 3 ln q).
    let slope = ln_d + 3.0 * ln_q;
    let rhs = 6.0 * ln_q;
    let exact = if slope > 0.0 {
        Some(Interval {
            lo: rhs / slope,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        })
    } else if slope < 0.0 {
        Some(Interval {
            lo: f64::NEG_INFINITY,
            hi: rhs / slope,
            lo_closed: false,
            hi_closed: false,
        })
    } else if rhs < 0.0 {
        Some(base)
    } else {
        None
    };
    let window = exact.and_then(|i| nonempty(i.intersect(base)));

    let (branch, branch_window) = if q > 1.0 {
        // 2 − p′ < ½ ln D / ln q  ⇔  p′ > 2 − ½ ln D / ln q
        let bound = 2.0 - 0.5 * ln_d / ln_q;
        let i = Interval {
            lo: bound,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        };
        (DualBranch::Above, nonempty(i.intersect(base)))
    } else if q < 1.0 {
        // 2 − p′ > ⅔ ln D / ln q  ⇔  p′ < 2 − ⅔ ln D / ln q
        let bound = 2.0 - (2.0 / 3.0) * ln_d / ln_q;
        let i = Interval {
            lo: f64::NEG_INFINITY,
            hi: bound,
            lo_closed: false,
            hi_closed: false,
        };
        (DualBranch::Below, nonempty(i.intersect(base)))
    } else {
        // ln q = 0: the condition reads 0 < ln D, independent of p′.
        let w = (ln_d > 0.0).then_some(base);
        (DualBranch::Boundary, w)
    };

    DualExponentWindow {
        d_max,
        c_three_halves,
        branch,
        window,
        branch_window,
    }
}

/// Upper envelope for total mass under `m′ ≤ C₁ m + C₂|Ω| + B`:
/// `e^{C₁t} m₀ + ((C₂|Ω| + B)/C₁)(e^{C₁t} − 1)`, with the `C₁ → 0` limit
/// `m₀ + (C₂|Ω| + B) t`.
pub fn gronwall_mass_bound(
    c1: f64,
    c2: f64,
    m0: f64,
    domain_volume: f64,
    boundary_inflow_rate: f64,
    t: f64,
) -> f64 {
    let beta = c2 * domain_volume + boundary_inflow_rate;
    if c1 == 0.0 {
        return m0 + beta * t;
    }
    let growth = libm::expm1(c1 * t);
    m0 + m0 * growth + beta * growth / c1
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionReport {
    pub lambda: u32,
    pub n: u32,
    pub p: f64,
    pub threshold: f64,
    pub p_exceeds_threshold: bool,
    pub p_prime: f64,
    pub empirical_cmr: Option<f64>,
    /// `Some(C_mr(p′) < 1)` when an empirical value was supplied.
    pub cmr_below_one: Option<bool>,
}

impl PreconditionReport {
    /// All checkable hypotheses hold (the `C_mr` one only if supplied).
    pub fn satisfied(&self) -> bool {
        self.p_exceeds_threshold && self.cmr_below_one.unwrap_or(true)
    }
}

pub fn check_preconditions(
    network: &ReactionNetwork,
    n: u32,
    p: f64,
    empirical_cmr: Option<f64>,
) -> Result<PreconditionReport, TheoryError> {
    if !(p > 1.0) {
        return Err(TheoryError::ExponentTooSmall(p));
    }
    let lambda = network.growth_exponent();
    let threshold = admissible_p_threshold(n, lambda);
    Ok(PreconditionReport {
        lambda,
        n,
        p,
        threshold,
        p_exceeds_threshold: p > threshold,
        p_prime: p / (p - 1.0),
        empirical_cmr,
        cmr_below_one: empirical_cmr.map(|c| c < 1.0),
    })
}
