//! Reversible mass-action reaction networks.
//!
//! A network holds `I` species and `J` reactions
//! `Σ μ_mj M_m ⇌ Σ ν_mj M_m` with rate `R_j(u) = kf_j Π u^μ − kb_j Π u^ν`.
//! The source term is `f(u) = S R(u)` with `s_ij = ν_ij − μ_ij`.

mod parse;

pub use parse::{parse_network, render_network};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{abs, powu};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown species {name}")]
    UnknownSpecies { line: usize, name: String },
    #[error("duplicate species {0}")]
    DuplicateSpecies(String),
    #[error("species {name}: diffusion coefficient must be positive and finite, got {value}")]
    InvalidDiffusion { name: String, value: f64 },
    #[error("invalid species name {0:?}")]
    InvalidName(String),
    #[error("reaction {reaction}: negative rate constant {value}")]
    NegativeRate { reaction: usize, value: f64 },
    #[error("reaction {reaction}: rate constants must be finite and kf + kb > 0")]
    DegenerateRates { reaction: usize },
    #[error("reaction {reaction}: left and right sides are identical")]
    NoOpReaction { reaction: usize },
    #[error("reaction {reaction}: stoichiometry has length {found}, expected {expected}")]
    StoichiometryLength {
        reaction: usize,
        expected: usize,
        found: usize,
    },
    #[error("a network needs at least one species")]
    NoSpecies,
    #[error("reaction index {index} out of range ({count} reactions)")]
    ReactionIndex { index: usize, count: usize },
    #[error("concentration vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("concentration u[{index}] = {value} is negative or not finite")]
    NegativeConcentration { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub index: usize,
    pub diffusion: f64,
}

/// One reversible reaction. `mu` is the left-hand (forward) stoichiometry,
/// `nu` the right-hand one, both indexed by species.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub mu: Vec<u32>,
    pub nu: Vec<u32>,
    pub kf: f64,
    pub kb: f64,
}

impl Reaction {
    pub fn new(mu: Vec<u32>, nu: Vec<u32>, kf: f64, kb: f64) -> Self {
        Self { mu, nu, kf, kb }
    }

    /// Total degree of the forward monomial.
    pub fn forward_order(&self) -> u32 {
        self.mu.iter().sum()
    }

    pub fn backward_order(&self) -> u32 {
        self.nu.iter().sum()
    }

    pub fn is_reversible(&self) -> bool {
        self.kf > 0.0 && self.kb > 0.0
    }

    #[inline]
    fn rate_unchecked(&self, u: &[f64]) -> f64 {
        let forward = if self.kf == 0.0 {
            0.0
        } else {
            self.kf * monomial(&self.mu, u)
        };
        let backward = if self.kb == 0.0 {
            0.0
        } else {
            self.kb * monomial(&self.nu, u)
        };
        forward - backward
    }
}

/// `Π u_m^{e_m}` with `0^0 = 1`.
#[inline]
fn monomial(exponents: &[u32], u: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(u)
        .filter(|(e, _)| **e > 0)
        .map(|(e, x)| powu(*x, *e))
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    /// Row-major `I × J`, `s_ij = ν_ij − μ_ij`.
    stoich: Vec<i64>,
}

impl ReactionNetwork {
    /// Builds a network from `(name, diffusion)` pairs and reactions. Species
    /// indices follow the order of `species`.
    pub fn new<S: Into<String>>(
        species: impl IntoIterator<Item = (S, f64)>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, NetworkError> {
        let mut list: Vec<Species> = Vec::new();
        for (index, (name, diffusion)) in species.into_iter().enumerate() {
            let name = name.into();
            if !is_valid_name(&name) {
                return Err(NetworkError::InvalidName(name));
            }
            if list.iter().any(|s| s.name == name) {
                return Err(NetworkError::DuplicateSpecies(name));
            }
            if !(diffusion > 0.0 && diffusion.is_finite()) {
                return Err(NetworkError::InvalidDiffusion {
                    name,
                    value: diffusion,
                });
            }
            list.push(Species {
                name,
                index,
                diffusion,
            });
        }
        if list.is_empty() {
            return Err(NetworkError::NoSpecies);
        }
        let n = list.len();
        for (j, r) in reactions.iter().enumerate() {
            for side in [&r.mu, &r.nu] {
                if side.len() != n {
                    return Err(NetworkError::StoichiometryLength {
                        reaction: j,
                        expected: n,
                        found: side.len(),
                    });
                }
            }
            for k in [r.kf, r.kb] {
                if k < 0.0 {
                    return Err(NetworkError::NegativeRate {
                        reaction: j,
                        value: k,
                    });
                }
            }
            if !(r.kf.is_finite() && r.kb.is_finite()) || r.kf + r.kb <= 0.0 {
                return Err(NetworkError::DegenerateRates { reaction: j });
            }
            if r.mu == r.nu {
                return Err(NetworkError::NoOpReaction { reaction: j });
            }
        }
        let m = reactions.len();
        let mut stoich = vec![0i64; n * m];
        for (j, r) in reactions.iter().enumerate() {
            for i in 0..n {
                stoich[i * m + j] = i64::from(r.nu[i]) - i64::from(r.mu[i]);
            }
        }
        Ok(Self {
            species: list,
            reactions,
            stoich,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn diffusions(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.diffusion).collect()
    }

    /// `s_ij`.
    pub fn stoich(&self, i: usize, j: usize) -> i64 {
        self.stoich[i * self.reactions.len() + j]
    }

    /// Column sums `σ_j = Σ_i s_ij`.
    pub fn column_sums(&self) -> Vec<i64> {
        (0..self.reactions.len())
            .map(|j| (0..self.species.len()).map(|i| self.stoich(i, j)).sum())
            .collect()
    }

    /// `true` when every reaction has both rate constants positive.
    pub fn is_reversible(&self) -> bool {
        self.reactions.iter().all(Reaction::is_reversible)
    }

    fn check_state(&self, u: &[f64]) -> Result<(), NetworkError> {
        if u.len() != self.species.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.species.len(),
                found: u.len(),
            });
        }
        match u.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            Some(index) => Err(NetworkError::NegativeConcentration {
                index,
                value: u[index],
            }),
            None => Ok(()),
        }
    }

    /// `R_j(u)`. Negative components are rejected; callers clip first.
    pub fn reaction_rate(&self, j: usize, u: &[f64]) -> Result<f64, NetworkError> {
        let r = self.reactions.get(j).ok_or(NetworkError::ReactionIndex {
            index: j,
            count: self.reactions.len(),
        })?;
        self.check_state(u)?;
        Ok(r.rate_unchecked(u))
    }

    /// `f(u) = S R(u)`.
    pub fn source(&self, u: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_state(u)?;
        let mut out = vec![0.0; self.species.len()];
        self.source_into(u, &mut out);
        Ok(out)
    }

    /// Unchecked source evaluation for hot loops. `u` and `out` must have
    /// length `I`; `u` is used as given (no clipping).
    #[inline]
    pub fn source_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.species.len());
        debug_assert_eq!(out.len(), self.species.len());
        out.iter_mut().for_each(|x| *x = 0.0);
        let m = self.reactions.len();
        for (j, r) in self.reactions.iter().enumerate() {
            let rate = r.rate_unchecked(u);
            if rate == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                let s = self.stoich[i * m + j];
                if s != 0 {
                    *o += s as f64 * rate;
                }
            }
        }
    }

    /// `max_j |R_j(u)|` without validation; 0 for reaction-free networks.
    pub fn max_abs_rate(&self, u: &[f64]) -> f64 {
        self.reactions
            .iter()
            .map(|r| abs(r.rate_unchecked(u)))
            .fold(0.0, f64::max)
    }

    /// `λ = max_j max(Σ_m μ_mj, Σ_m ν_mj)`, and 1 for a network without
    /// reactions.
    pub fn growth_exponent(&self) -> u32 {
        self.reactions
            .iter()
            .map(|r| r.forward_order().max(r.backward_order()))
            .max()
            .unwrap_or(1)
            .max(1)
    }

    /// Constant in `|f_i(u)| ≤ C max(1, |u|)^λ`:
    /// `C = max_i Σ_j |s_ij| (kf_j + kb_j)`.
    pub fn growth_constant(&self) -> f64 {
        let m = self.reactions.len();
        (0..self.species.len())
            .map(|i| {
                self.reactions
                    .iter()
                    .enumerate()
                    .map(|(j, r)| abs(self.stoich[i * m + j] as f64) * (r.kf + r.kb))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Sufficient-condition classifier for `Σ_i f_i(u) ≤ C₁ Σ_i u_i + C₂`.
    ///
    /// `Σ_i f_i = Σ_j σ_j (kf Π u^μ − kb Π u^ν)`. A monomial contributes
    /// positively when `σ_j > 0` on the forward side or `σ_j < 0` on the
    /// backward side. No positive monomial gives `Dissipative`; positive
    /// monomials all of degree ≤ 1 give `MassControl`; anything else is
    /// `Unknown`.
    pub fn classify_mass_condition(&self) -> MassCondition {
        let sigma = self.column_sums();
        if sigma.iter().all(|s| *s == 0) {
            return MassCondition::Conserved;
        }
        let mut c1 = 0.0;
        let mut c2 = 0.0;
        let mut any_positive = false;
        let mut bounded = true;
        for (r, &s) in self.reactions.iter().zip(&sigma) {
            let positive = if s > 0 && r.kf > 0.0 {
                Some((r.forward_order(), r.kf))
            } else if s < 0 && r.kb > 0.0 {
                Some((r.backward_order(), r.kb))
            } else {
                None
            };
            if let Some((degree, k)) = positive {
                any_positive = true;
                let weight = abs(s as f64) * k;
                match degree {
                    0 => c2 += weight,
                    1 => c1 += weight,
                    _ => bounded = false,
                }
            }
        }
        if !any_positive {
            MassCondition::Dissipative
        } else if bounded {
            MassCondition::MassControl { c1, c2 }
        } else {
            MassCondition::Unknown
        }
    }
}

/// Outcome of [`ReactionNetwork::classify_mass_condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassCondition {
    Conserved,
    Dissipative,
    MassControl { c1: f64, c2: f64 },
    Unknown,
}

impl MassCondition {
    /// `(C₁, C₂)` usable in the mass envelope; `None` when unknown.
    pub fn constants(&self) -> Option<(f64, f64)> {
        match *self {
            MassCondition::Conserved | MassCondition::Dissipative => Some((0.0, 0.0)),
            MassCondition::MassControl { c1, c2 } => Some((c1, c2)),
            MassCondition::Unknown => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MassCondition::Conserved => "Conserved",
            MassCondition::Dissipative => "Dissipative",
            MassCondition::MassControl { .. } => "MassControl",
            MassCondition::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for MassCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassCondition::MassControl { c1, c2 } => {
                write!(f, "MassControl C\u{2081}={c1} C\u{2082}={c2}")
            }
            other => f.write_str(other.name()),
        }
    }
}

pub(crate) fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
