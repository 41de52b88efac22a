//! Time-series diagnostics and the runtime invariant checks evaluated on them.
//!
//! Every check in [`verify_invariants`] reads only the log plus static data
//! (network, grid, boundary flux), so a log reloaded from `timeseries.csv`
//! can be re-checked offline. The one exception is the equilibrium residual,
//! which needs [`LogRow::rate_residual`] and is skipped when it is not
//! available.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::{spatial_norm_lp, BoundaryFlux, Grid, StateField};
use crate::math::abs;
use crate::network::{MassCondition, ReactionNetwork};
use crate::theory::gronwall_mass_bound;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("nothing recorded")]
    Empty,
    #[error("log has {found} species columns, expected {expected}")]
    SpeciesMismatch { expected: usize, found: usize },
    #[error("log times are not strictly increasing at row {0}")]
    NonMonotoneTime(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesStats {
    pub min: f64,
    /// Discrete `L∞(Ω)` for nonnegative fields.
    pub max: f64,
    pub mass: f64,
    pub lp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub species: Vec<SpeciesStats>,
    pub total_mass: f64,
    /// `Σ_i f_i(u) − (C₁ Σ_i u_i + C₂)` at the cell with the largest `Σ_i u_i`.
    pub mass_control_residual: f64,
    pub dt: f64,
    /// `max_cells max_j |R_j|`; `NaN` when unknown (e.g. reloaded from CSV).
    pub rate_residual: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsLog {
    pub species_names: Vec<String>,
    /// Exponent of the per-species spatial norm column.
    pub lp: f64,
    pub steady_tol: f64,
    pub reached_steady: bool,
    pub stats: StepStats,
    pub rows: Vec<LogRow>,
}

impl DiagnosticsLog {
    pub fn new(network: &ReactionNetwork, lp: f64, steady_tol: f64) -> Self {
        Self {
            species_names: network.species().iter().map(|s| s.name.clone()).collect(),
            lp,
            steady_tol,
            reached_steady: false,
            stats: StepStats::default(),
            rows: Vec::new(),
        }
    }

    /// Appends one row for `state`. Values are recorded as they are; nothing
    /// is clipped.
    pub fn record(
        &mut self,
        state: &StateField,
        network: &ReactionNetwork,
        condition: &MassCondition,
        dt: f64,
    ) {
        let grid = &state.grid;
        let n = state.species_count();
        let species: Vec<SpeciesStats> = (0..n)
            .map(|s| {
                let v = state.species(s);
                SpeciesStats {
                    min: v.iter().copied().fold(f64::INFINITY, f64::min),
                    max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mass: grid.integrate(v),
                    lp: spatial_norm_lp(v, grid, self.lp).unwrap_or(f64::NAN),
                }
            })
            .collect();
        let total_mass = species.iter().map(|s| s.mass).sum();

        let (c1, c2) = match condition {
            MassCondition::MassControl { c1, c2 } => (*c1, *c2),
            _ => (0.0, 0.0),
        };
        let mut u = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut worst_cell = 0;
        let mut worst_sum = f64::NEG_INFINITY;
        let mut rate_residual: f64 = 0.0;
        for c in 0..grid.cell_count() {
            state.cell_into(c, &mut u);
            u.iter_mut().for_each(|x| *x = x.max(0.0));
            let sum: f64 = u.iter().sum();
            if sum > worst_sum {
                worst_sum = sum;
                worst_cell = c;
            }
            rate_residual = rate_residual.max(network.max_abs_rate(&u));
        }
        state.cell_into(worst_cell, &mut u);
        u.iter_mut().for_each(|x| *x = x.max(0.0));
        network.source_into(&u, &mut f);
        let mass_control_residual = f.iter().sum::<f64>() - (c1 * u.iter().sum::<f64>() + c2);

        self.rows.push(LogRow {
            t: state.time,
            species,
            total_mass,
            mass_control_residual,
            dt,
            rate_residual,
        });
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Smallest recorded concentration over all rows and species.
    pub fn min_concentration(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.species.iter().map(|s| s.min))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_i ‖u_i(t)‖∞` per row.
    pub fn sup_norms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rows.iter().map(|r| {
            (
                r.t,
                r.species.iter().map(|s| abs(s.max)).fold(0.0, f64::max),
            )
        })
    }

    fn validate(&self) -> Result<(), DiagnosticsError> {
        if self.rows.is_empty() {
            return Err(DiagnosticsError::Empty);
        }
        for (k, w) in self.rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(DiagnosticsError::NonMonotoneTime(k + 1));
            }
        }
        let expected = self.species_names.len();
        if let Some(r) = self.rows.iter().find(|r| r.species.len() != expected) {
            return Err(DiagnosticsError::SpeciesMismatch {
                expected,
                found: r.species.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: f64, bound: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value,
            bound,
            tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const GRONWALL_TOL: f64 = 1e-6;
pub const PLATEAU_TOL: f64 = 1e-3;
pub const CONSERVATION_TOL: f64 = 1e-9;

/// Evaluates the runtime invariants on a complete log.
///
/// * `positivity`: smallest recorded value ≥ 0.
/// * `gronwall_envelope`: `m(t) ≤ bound(t)·(1 + 1e−6)` (skipped for
///   `Unknown` networks). `value` is the worst relative excess `m/bound − 1`.
/// * `mass_conservation`: conserved network with zero flux,
///   `|m − m₀|/m₀ ≤ 1e−9`.
/// * `uniform_plateau`: second-half max of `‖u‖∞` ≤ first-half max
///   `·(1 + 1e−3)`.
/// * `spacetime_lp_finite`: accumulated space-time `L^p` norms are finite.
/// * `equilibrium_residual`: reversible networks that stopped at steady
///   state have `max_j |R_j| < 10·steady_tol` at the final row.
pub fn verify_invariants(
    log: &DiagnosticsLog,
    network: &ReactionNetwork,
    condition: &MassCondition,
    grid: &Grid,
    flux: &BoundaryFlux,
) -> Result<CheckReport, DiagnosticsError> {
    log.validate()?;
    if log.species_names.len() != network.species_count() {
        return Err(DiagnosticsError::SpeciesMismatch {
            expected: network.species_count(),
            found: log.species_names.len(),
        });
    }
    let mut checks = Vec::new();

    let min = log.min_concentration();
    checks.push(Check::new("positivity", min >= 0.0, min, 0.0, 0.0));

    let first = &log.rows[0];
    let m0 = first.total_mass;
    let t0 = first.t;
    if let Some((c1, c2)) = condition.constants() {
        let inflow = flux.inflow_rate(grid);
        let mut worst = f64::NEG_INFINITY;
        for r in &log.rows {
            let bound = gronwall_mass_bound(c1, c2, m0, grid.domain_volume(), inflow, r.t - t0);
            let excess = if bound > 0.0 {
                r.total_mass / bound - 1.0
            } else if r.total_mass <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(excess);
        }
        checks.push(Check::new(
            "gronwall_envelope",
            worst <= GRONWALL_TOL,
            worst,
            0.0,
            GRONWALL_TOL,
        ));
    }

    if matches!(condition, MassCondition::Conserved) && flux.values().iter().all(|b| *b == 0.0) {
        let dev = log
            .rows
            .iter()
            .map(|r| abs(r.total_mass - m0))
            .fold(0.0, f64::max);
        let rel = if m0 > 0.0 { dev / m0 } else { dev };
        checks.push(Check::new(
            "mass_conservation",
            rel <= CONSERVATION_TOL,
            rel,
            0.0,
            CONSERVATION_TOL,
        ));
    }

    let t_last = log.rows[log.rows.len() - 1].t;
    let mid = t0 + 0.5 * (t_last - t0);
    let (mut early, mut late) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (t, sup) in log.sup_norms() {
        if t <= mid {
            early = early.max(sup);
        }
        if t >= mid {
            late = late.max(sup);
        }
    }
    checks.push(Check::new(
        "uniform_plateau",
        late <= early * (1.0 + PLATEAU_TOL),
        late,
        early,
        PLATEAU_TOL,
    ));

    let mut acc = vec![0.0; log.species_names.len()];
    for w in log.rows.windows(2) {
        let dt = w[1].t - w[0].t;
        for (a, s) in acc.iter_mut().zip(&w[1].species) {
            *a += libm::pow(s.lp, log.lp) * dt;
        }
    }
    let spacetime = acc
        .iter()
        .map(|a| libm::pow(*a, 1.0 / log.lp))
        .fold(0.0, f64::max);
    let finite = spacetime.is_finite()
        && log
            .rows
            .iter()
            .all(|r| r.species.iter().all(|s| s.lp.is_finite()));
    checks.push(Check::new(
        "spacetime_lp_finite",
        finite,
        spacetime,
        spacetime,
        0.0,
    ));

    let last = &log.rows[log.rows.len() - 1];
    if network.reaction_count() > 0
        && network.is_reversible()
        && log.reached_steady
        && !last.rate_residual.is_nan()
    {
        let bound = 10.0 * log.steady_tol;
        checks.push(Check::new(
            "equilibrium_residual",
            last.rate_residual < bound,
            last.rate_residual,
            bound,
            0.0,
        ));
    }

    Ok(CheckReport { checks })
}
