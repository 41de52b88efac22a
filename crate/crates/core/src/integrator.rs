//! Operator-split time stepping: backward-Euler diffusion plus an explicit
//! reaction update evaluated on the clipped state `[u]₊`.
//!
//! A reaction update that would produce any negative component is rejected
//! and retried with half the step, so every accepted state is nonnegative
//! exactly. Diffusion is an M-matrix solve and keeps that property.

use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::DiagnosticsLog;
use crate::discretization::{BoundaryFlux, DiscretizationError, ImplicitDiffusion, StateField};
use crate::math::abs;
use crate::network::{MassCondition, ReactionNetwork};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegratorError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("initial data entry {index} is {value}; must be finite and >= 0")]
    InvalidInitialData { index: usize, value: f64 },
    #[error("state has {found} species, network has {expected}")]
    SpeciesMismatch { expected: usize, found: usize },
    #[error(
        "reaction step rejected down to dt = {dt:e} < dt_min: species {species} in cell {cell} \
         would become {value:e} (cell state {state:?})"
    )]
    StepTooSmall {
        dt: f64,
        cell: usize,
        species: usize,
        value: f64,
        state: Vec<f64>,
    },
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    #[default]
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// After a step that needed rejections, the next proposal is
    /// `safety·dt_used`.
    pub safety: f64,
    pub scheme: Splitting,
    pub t_end: f64,
    pub steady_tol: f64,
}

impl IntegratorConfig {
    /// Fixed-step configuration: `dt_init = dt_max = dt`.
    pub fn fixed(dt: f64, t_end: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt * 1e-9,
            dt_max: dt,
            safety: 1.0,
            scheme: Splitting::Lie,
            t_end,
            steady_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let c = self;
        if !(c.dt_min > 0.0 && c.dt_min <= c.dt_init && c.dt_init <= c.dt_max) {
            return Err(IntegratorError::InvalidConfig(
                "need 0 < dt_min <= dt_init <= dt_max",
            ));
        }
        if !c.dt_max.is_finite() {
            return Err(IntegratorError::InvalidConfig("dt_max must be finite"));
        }
        if !(c.safety > 0.0 && c.safety <= 1.0) {
            return Err(IntegratorError::InvalidConfig("safety must lie in (0, 1]"));
        }
        if !(c.t_end > 0.0 && c.t_end.is_finite()) {
            return Err(IntegratorError::InvalidConfig("t_end must be positive"));
        }
        if !(c.steady_tol > 0.0) {
            return Err(IntegratorError::InvalidConfig(
                "steady_tol must be positive",
            ));
        }
        Ok(())
    }
}

/// First negative entry produced by a trial reaction update.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Negative {
    cell: usize,
    species: usize,
    value: f64,
}

/// Cellwise `u ← u + dt·f([u]₊)` from `src` into `dst`.
fn try_reaction(
    network: &ReactionNetwork,
    src: &StateField,
    dst: &mut StateField,
    dt: f64,
    u: &mut [f64],
    f: &mut [f64],
) -> Result<(), Negative> {
    let cells = src.grid.cell_count();
    if network.reaction_count() == 0 {
        dst.values_mut().copy_from_slice(src.values());
        return Ok(());
    }
    for c in 0..cells {
        src.cell_into(c, u);
        for x in u.iter_mut() {
            *x = x.max(0.0);
        }
        network.source_into(u, f);
        for (s, (&ui, &fi)) in u.iter().zip(f.iter()).enumerate() {
            let v = ui + dt * fi;
            if !(v >= 0.0) {
                return Err(Negative {
                    cell: c,
                    species: s,
                    value: v,
                });
            }
            dst.values_mut()[s * cells + c] = v;
        }
    }
    Ok(())
}

/// Explicit reaction update over `dt`, halving on rejection until accepted
/// or `dt < dt_min`. Returns the new state and the step actually taken.
pub fn reaction_step(
    state: &StateField,
    network: &ReactionNetwork,
    dt: f64,
    dt_min: f64,
) -> Result<(StateField, f64), IntegratorError> {
    check_species(state, network)?;
    let n = network.species_count();
    let (mut u, mut f) = (vec![0.0; n], vec![0.0; n]);
    let mut out = state.clone();
    let mut h = dt;
    loop {
        match try_reaction(network, state, &mut out, h, &mut u, &mut f) {
            Ok(()) => {
                out.time = state.time + h;
                return Ok((out, h));
            }
            Err(neg) => {
                h *= 0.5;
                if h < dt_min {
                    return Err(too_small(state, h, neg));
                }
            }
        }
    }
}

fn too_small(state: &StateField, dt: f64, neg: Negative) -> IntegratorError {
    let mut cell_state = vec![0.0; state.species_count()];
    state.cell_into(neg.cell, &mut cell_state);
    IntegratorError::StepTooSmall {
        dt,
        cell: neg.cell,
        species: neg.species,
        value: neg.value,
        state: cell_state,
    }
}

fn check_species(state: &StateField, network: &ReactionNetwork) -> Result<(), IntegratorError> {
    if state.species_count() != network.species_count() {
        return Err(IntegratorError::SpeciesMismatch {
            expected: network.species_count(),
            found: state.species_count(),
        });
    }
    Ok(())
}

/// Reusable buffers and factored diffusion operators for one run.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    network: &'a ReactionNetwork,
    flux: &'a BoundaryFlux,
    diffusion: Vec<f64>,
    cached_dt: f64,
    operators: Vec<ImplicitDiffusion>,
    half: Option<StateField>,
    u: Vec<f64>,
    f: Vec<f64>,
    scratch: Vec<f64>,
    /// Rejections during the most recent call to [`Stepper::step`].
    pub last_rejections: u32,
}

impl<'a> Stepper<'a> {
    pub fn new(network: &'a ReactionNetwork, flux: &'a BoundaryFlux) -> Self {
        let n = network.species_count();
        Self {
            network,
            flux,
            diffusion: network.diffusions(),
            cached_dt: f64::NAN,
            operators: Vec::new(),
            half: None,
            u: vec![0.0; n],
            f: vec![0.0; n],
            scratch: Vec::new(),
            last_rejections: 0,
        }
    }

    fn diffuse(&mut self, field: &mut StateField, dt: f64) -> Result<(), IntegratorError> {
        if dt != self.cached_dt || self.operators.is_empty() {
            self.operators = self
                .diffusion
                .iter()
                .zip(self.flux.values())
                .map(|(d, b)| ImplicitDiffusion::new(&field.grid, *d, *b, dt))
                .collect::<Result<_, _>>()?;
            self.cached_dt = dt;
        }
        for (s, op) in self.operators.iter().enumerate() {
            op.step(field.species_mut(s), None, dt, &mut self.scratch);
        }
        if !field.is_finite() {
            return Err(DiscretizationError::SolveFailed.into());
        }
        Ok(())
    }

    /// One split step of size at most `dt`; returns the step taken.
    pub fn step(
        &mut self,
        state: &StateField,
        scheme: Splitting,
        dt: f64,
        dt_min: f64,
    ) -> Result<(StateField, f64), IntegratorError> {
        check_species(state, self.network)?;
        if self.flux.values().len() != state.species_count() {
            return Err(DiscretizationError::LengthMismatch {
                expected: state.species_count(),
                found: self.flux.values().len(),
            }
            .into());
        }
        self.last_rejections = 0;
        let mut out = state.clone();
        let mut h = dt;
        loop {
            let attempt = match scheme {
                Splitting::Lie => {
                    match try_reaction(self.network, state, &mut out, h, &mut self.u, &mut self.f) {
                        Ok(()) => {
                            self.diffuse(&mut out, h)?;
                            Ok(())
                        }
                        Err(neg) => Err(neg),
                    }
                }
                Splitting::Strang => self.strang(state, &mut out, h)?,
            };
            match attempt {
                Ok(()) => {
                    out.time = state.time + h;
                    return Ok((out, h));
                }
                Err(neg) => {
                    self.last_rejections += 1;
                    h *= 0.5;
                    if h < dt_min {
                        return Err(too_small(state, h, neg));
                    }
                }
            }
        }
    }

    /// Half reaction, full diffusion, half reaction. The outer `Result`
    /// carries solver failures, the inner one a rejected reaction update.
    fn strang(
        &mut self,
        state: &StateField,
        out: &mut StateField,
        h: f64,
    ) -> Result<Result<(), Negative>, IntegratorError> {
        let mut mid = self.half.take().unwrap_or_else(|| state.clone());
        let first = try_reaction(
            self.network,
            state,
            &mut mid,
            0.5 * h,
            &mut self.u,
            &mut self.f,
        );
        let result = match first {
            Ok(()) => {
                self.diffuse(&mut mid, h)?;
                try_reaction(self.network, &mid, out, 0.5 * h, &mut self.u, &mut self.f)
            }
            Err(neg) => Err(neg),
        };
        self.half = Some(mid);
        Ok(result)
    }
}

/// One split step (Lie: reaction then diffusion; Strang: half reaction,
/// diffusion, half reaction). Returns the new state and `dt_used ≤ dt`.
pub fn step(
    state: &StateField,
    network: &ReactionNetwork,
    flux: &BoundaryFlux,
    config: &IntegratorConfig,
    dt: f64,
) -> Result<(StateField, f64), IntegratorError> {
    Stepper::new(network, flux).step(state, config.scheme, dt, config.dt_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub initial: StateField,
    pub flux: BoundaryFlux,
    pub integrator: IntegratorConfig,
    /// Snapshot and log spacing; `t_end` is always recorded.
    pub output_interval: f64,
    /// Exponent of the per-species spatial norm in the log.
    pub lp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EndTime,
    SteadyState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub snapshots: Vec<StateField>,
    pub log: DiagnosticsLog,
    pub mass_condition: MassCondition,
    pub stop: StopReason,
}

const STEADY_STREAK: u32 = 3;
const GROWTH_AFTER: u32 = 10;
const GROWTH_FACTOR: f64 = 1.2;

/// Runs to `t_end` or to steady state (`max |Δu|/dt < steady_tol` on three
/// consecutive accepted steps), recording a snapshot and a log row at every
/// output time.
pub fn simulate(
    network: &ReactionNetwork,
    setup: &SimulationSetup,
) -> Result<SimulationOutcome, IntegratorError> {
    simulate_observed(network, setup, |_, _| {})
}

/// [`simulate`] with a callback after every accepted step, receiving the new
/// state and the step size used.
/// A step that would stop within this fraction of its size short of an
/// output time is stretched to land on it.
const LANDING_SLACK: f64 = 1e-9;

pub fn simulate_observed(
    network: &ReactionNetwork,
    setup: &SimulationSetup,
    mut observer: impl FnMut(&StateField, f64),
) -> Result<SimulationOutcome, IntegratorError> {
    let cfg = &setup.integrator;
    cfg.validate()?;
    if !(setup.output_interval > 0.0) {
        return Err(IntegratorError::InvalidConfig(
            "output interval must be positive",
        ));
    }
    check_species(&setup.initial, network)?;
    if let Some(index) = setup
        .initial
        .values()
        .iter()
        .position(|v| !(*v >= 0.0 && v.is_finite()))
    {
        return Err(IntegratorError::InvalidInitialData {
            index,
            value: setup.initial.values()[index],
        });
    }

    let condition = network.classify_mass_condition();
    let mut log = DiagnosticsLog::new(network, setup.lp, cfg.steady_tol);
    let mut state = setup.initial.clone();
    let t0 = state.time;
    log.record(&state, network, &condition, cfg.dt_init);
    let mut snapshots = vec![state.clone()];

    let mut stepper = Stepper::new(network, &setup.flux);
    let mut proposal = cfg.dt_init;
    let mut streak_ok = 0u32;
    let mut steady_streak = 0u32;
    let mut next_k = 1u64;
    let t_end = t0 + cfg.t_end;
    let mut stop = StopReason::EndTime;

    loop {
        let next_out = (t0 + next_k as f64 * setup.output_interval).min(t_end);
        let remaining = next_out - state.time;
        let (dt_try, lands) = if remaining <= proposal * (1.0 + LANDING_SLACK) {
            (remaining, true)
        } else {
            (proposal, false)
        };
        let (mut new_state, used) = stepper.step(&state, cfg.scheme, dt_try, cfg.dt_min)?;
        log.stats.accepted += 1;
        log.stats.rejected += u64::from(stepper.last_rejections);
        let landed = lands && used == dt_try;
        if landed {
            new_state.time = next_out;
        }

        let rate = new_state
            .values()
            .iter()
            .zip(state.values())
            .map(|(a, b)| abs(a - b))
            .fold(0.0, f64::max)
            / used;
        steady_streak = if rate < cfg.steady_tol {
            steady_streak + 1
        } else {
            0
        };

        if stepper.last_rejections > 0 {
            streak_ok = 0;
            proposal = (used * cfg.safety).max(cfg.dt_min);
        } else if !landed || used >= proposal {
            streak_ok += 1;
            if streak_ok >= GROWTH_AFTER {
                proposal = (proposal * GROWTH_FACTOR).min(cfg.dt_max);
                streak_ok = 0;
            }
        }

        observer(&new_state, used);
        state = new_state;

        let steady = steady_streak >= STEADY_STREAK;
        if landed || steady {
            log.record(&state, network, &condition, used);
            snapshots.push(state.clone());
            if landed {
                next_k += 1;
            }
        }
        if steady {
            log.reached_steady = true;
            stop = StopReason::SteadyState;
            break;
        }
        if landed && next_out >= t_end {
            break;
        }
    }

    Ok(SimulationOutcome {
        snapshots,
        log,
        mass_condition: condition,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{diffusion_step_implicit, Grid};
    use crate::network::Reaction;
    use alloc::vec;

    fn a_b() -> ReactionNetwork {
        ReactionNetwork::new(
            [("A", 1.0), ("B", 1.0)],
            vec![Reaction::new(vec![1, 0], vec![0, 1], 1.0, 1.0)],
        )
        .unwrap()
    }

    fn abc() -> ReactionNetwork {
        ReactionNetwork::new(
            [("A", 1.0), ("B", 0.5), ("C", 0.1)],
            vec![Reaction::new(vec![1, 1, 0], vec![0, 0, 1], 1.0, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn reaction_free_state_unchanged() {
        let net = ReactionNetwork::new([("A", 1.0)], vec![]).unwrap();
        let g = Grid::line(5, 1.0).unwrap();
        let s = StateField::new(g, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let (out, used) = reaction_step(&s, &net, 0.3, 1e-9).unwrap();
        assert_eq!(out.values(), s.values());
        assert_eq!(used, 0.3);
    }

    #[test]
    fn reaction_step_examples() {
        let g = Grid::line(3, 1.0).unwrap();
        let s = StateField::uniform(g, &[2.0, 0.0]);
        let (out, used) = reaction_step(&s, &a_b(), 0.1, 1e-9).unwrap();
        assert_eq!(used, 0.1);
        for c in 0..3 {
            assert!((out.species(0)[c] - 1.8).abs() < 1e-15);
            assert!((out.species(1)[c] - 0.2).abs() < 1e-15);
        }

        let (out, used) = reaction_step(&s, &a_b(), 2.0, 1e-9).unwrap();
        assert_eq!(used, 1.0);
        assert_eq!(out.species(0), &[0.0; 3]);
        assert_eq!(out.species(1), &[2.0; 3]);
    }

    #[test]
    fn reaction_step_reports_failure() {
        let g = Grid::line(3, 1.0).unwrap();
        let s = StateField::uniform(g, &[2.0, 0.0]);
        match reaction_step(&s, &a_b(), 2.0, 1.5) {
            Err(IntegratorError::StepTooSmall {
                cell,
                species,
                state,
                ..
            }) => {
                assert_eq!(cell, 0);
                assert_eq!(species, 0);
                assert_eq!(state, vec![2.0, 0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detailed_balance_is_fixed_by_step() {
        let g = Grid::rect(4, 3, 1.0, 1.0).unwrap();
        let s = StateField::uniform(g, &[1.0, 1.0, 2.0]);
        let net = abc();
        for scheme in [Splitting::Lie, Splitting::Strang] {
            let cfg = IntegratorConfig {
                scheme,
                ..IntegratorConfig::fixed(0.5, 1.0)
            };
            let (out, used) = step(&s, &net, &BoundaryFlux::zero(3), &cfg, 0.5).unwrap();
            assert_eq!(used, 0.5);
            for (a, b) in out.values().iter().zip(s.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_species_step_is_pure_diffusion() {
        let net = ReactionNetwork::new([("A", 0.7)], vec![]).unwrap();
        let g = Grid::line(12, 1.0).unwrap();
        let s = StateField::new(g, 1, g.sample(|x, _| 1.0 + x * x)).unwrap();
        let flux = BoundaryFlux::zero(1);
        let cfg = IntegratorConfig::fixed(0.01, 1.0);
        let (out, _) = step(&s, &net, &flux, &cfg, 0.01).unwrap();
        let reference = diffusion_step_implicit(&s, &[0.7], &flux, 0.01).unwrap();
        assert_eq!(out.values(), reference.values());
    }

    #[test]
    fn uniform_linear_exchange_tracks_ode() {
        let g = Grid::line(4, 1.0).unwrap();
        let setup = SimulationSetup {
            initial: StateField::uniform(g, &[2.0, 0.0]),
            flux: BoundaryFlux::zero(2),
            integrator: IntegratorConfig::fixed(1e-3, 2.0),
            output_interval: 0.1,
            lp: 2.0,
        };
        let out = simulate(&a_b(), &setup).unwrap();
        for snap in &out.snapshots {
            let exact = libm::exp(-2.0 * snap.time);
            assert!((snap.species(0)[0] - (1.0 + exact)).abs() < 5e-3);
            assert!((snap.species(1)[2] - (1.0 - exact)).abs() < 5e-3);
        }
        assert_eq!(out.snapshots.last().unwrap().time, 2.0);
        assert_eq!(out.log.rows.len(), 21);
    }

    #[test]
    fn reaction_free_uniform_run_is_steady_immediately() {
        let net = ReactionNetwork::new([("A", 1.0), ("B", 2.0)], vec![]).unwrap();
        let g = Grid::line(6, 1.0).unwrap();
        let setup = SimulationSetup {
            initial: StateField::uniform(g, &[1.0, 3.0]),
            flux: BoundaryFlux::zero(2),
            integrator: IntegratorConfig {
                steady_tol: 1e-10,
                ..IntegratorConfig::fixed(0.1, 10.0)
            },
            output_interval: 1.0,
            lp: 2.0,
        };
        let out = simulate(&net, &setup).unwrap();
        assert_eq!(out.stop, StopReason::SteadyState);
        assert_eq!(out.log.stats.accepted, 3);
        for s in &out.snapshots {
            for (a, b) in s.values().iter().zip(setup.initial.values()) {
                assert!((a - b).abs() < 1e-12 * b);
            }
        }
    }

    #[test]
    fn rejects_bad_initial_data_and_config() {
        let g = Grid::line(3, 1.0).unwrap();
        let mut initial = StateField::uniform(g, &[1.0, 1.0]);
        initial.values_mut()[4] = -1.0;
        let setup = SimulationSetup {
            initial,
            flux: BoundaryFlux::zero(2),
            integrator: IntegratorConfig::fixed(0.1, 1.0),
            output_interval: 0.5,
            lp: 2.0,
        };
        assert_eq!(
            simulate(&a_b(), &setup),
            Err(IntegratorError::InvalidInitialData {
                index: 4,
                value: -1.0
            })
        );
        let mut bad = setup.clone();
        bad.initial = StateField::uniform(g, &[1.0, 1.0]);
        bad.integrator.dt_min = 1.0;
        assert!(matches!(
            simulate(&a_b(), &bad),
            Err(IntegratorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn step_size_grows_to_cap() {
        let g = Grid::line(3, 1.0).unwrap();
        let setup = SimulationSetup {
            initial: StateField::uniform(g, &[2.0, 0.0]),
            flux: BoundaryFlux::zero(2),
            integrator: IntegratorConfig {
                dt_init: 1e-3,
                dt_min: 1e-9,
                dt_max: 5e-3,
                safety: 1.0,
                scheme: Splitting::Lie,
                t_end: 0.5,
                steady_tol: 1e-300,
            },
            output_interval: 1.0,
            lp: 2.0,
        };
        let mut largest: f64 = 0.0;
        simulate_observed(&a_b(), &setup, |_, dt| largest = largest.max(dt)).unwrap();
        assert!((largest - 5e-3).abs() < 1e-15, "{largest}");
    }
}
