//! Backward dual heat problem
//!
//! ```text
//! ψ_t + D Δψ = −θ   in (τ, T) × Ω,   ∇ψ·n = 0,   ψ(T) = 0
//! ```
//!
//! solved through `s = T − t`, which turns it into the forward problem
//! `φ_s = D Δφ + θ̃`, `φ(0) = 0`, advanced with backward Euler.
//!
//! On the uniform time grid `t_k = τ + k·dt`, `k = 0..=N`, the discrete
//! solution satisfies `(ψ_{k+1} − ψ_k)/dt = −D Δ_h ψ_k − θ_k` exactly, and
//! each level `k < N` represents the interval `[t_k, t_{k+1})` in space-time
//! norms. The maximal-regularity ratio is `‖Δ_h ψ‖_p / ‖θ‖_p` over those
//! levels; the maximum over a finite sample set is a lower estimate of the
//! true constant divided by `D`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{
    discrete_norm_lp, laplacian_apply, DiscretizationError, Grid, ImplicitDiffusion,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DualError {
    #[error("need tau < T and at least one time step")]
    InvalidHorizon,
    #[error("source θ must be finite and nonnegative (level {level}, cell {cell}: {value})")]
    NegativeSource {
        level: usize,
        cell: usize,
        value: f64,
    },
    #[error("source has {found} levels, expected {expected}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("dual exponent must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Stationary(Vec<f64>),
    Levels(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualProblem {
    pub grid: Grid,
    pub diffusion: f64,
    pub tau: f64,
    pub horizon: f64,
    pub steps: usize,
    theta: Source,
}

impl DualProblem {
    fn validate_common(
        grid: &Grid,
        diffusion: f64,
        tau: f64,
        horizon: f64,
        steps: usize,
    ) -> Result<(), DualError> {
        if !(horizon > tau) || steps == 0 || !horizon.is_finite() || !tau.is_finite() {
            return Err(DualError::InvalidHorizon);
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(DiscretizationError::InvalidDiffusion(diffusion).into());
        }
        let _ = grid;
        Ok(())
    }

    fn check_level(grid: &Grid, level: usize, values: &[f64]) -> Result<(), DualError> {
        if values.len() != grid.cell_count() {
            return Err(DiscretizationError::LengthMismatch {
                expected: grid.cell_count(),
                found: values.len(),
            }
            .into());
        }
        match values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            Some(cell) => Err(DualError::NegativeSource {
                level,
                cell,
                value: values[cell],
            }),
            None => Ok(()),
        }
    }

    /// Time-independent source `θ(x)`.
    pub fn stationary(
        grid: Grid,
        diffusion: f64,
        tau: f64,
        horizon: f64,
        steps: usize,
        theta: Vec<f64>,
    ) -> Result<Self, DualError> {
        Self::validate_common(&grid, diffusion, tau, horizon, steps)?;
        Self::check_level(&grid, 0, &theta)?;
        Ok(Self {
            grid,
            diffusion,
            tau,
            horizon,
            steps,
            theta: Source::Stationary(theta),
        })
    }

    /// Source given per time level `k = 0..steps` (at `t_k = τ + k·dt`).
    pub fn with_levels(
        grid: Grid,
        diffusion: f64,
        tau: f64,
        horizon: f64,
        theta: Vec<Vec<f64>>,
    ) -> Result<Self, DualError> {
        let steps = theta.len();
        Self::validate_common(&grid, diffusion, tau, horizon, steps)?;
        for (k, level) in theta.iter().enumerate() {
            Self::check_level(&grid, k, level)?;
        }
        Ok(Self {
            grid,
            diffusion,
            tau,
            horizon,
            steps,
            theta: Source::Levels(theta),
        })
    }

    /// Samples `θ(t, x, y)` on the time levels and cell centers.
    pub fn from_fn(
        grid: Grid,
        diffusion: f64,
        tau: f64,
        horizon: f64,
        steps: usize,
        mut theta: impl FnMut(f64, f64, f64) -> f64,
    ) -> Result<Self, DualError> {
        Self::validate_common(&grid, diffusion, tau, horizon, steps)?;
        let dt = (horizon - tau) / steps as f64;
        let levels = (0..steps)
            .map(|k| {
                let t = tau + k as f64 * dt;
                grid.sample(|x, y| theta(t, x, y))
            })
            .collect();
        Self::with_levels(grid, diffusion, tau, horizon, levels)
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.tau) / self.steps as f64
    }

    pub fn theta(&self, level: usize) -> &[f64] {
        match &self.theta {
            Source::Stationary(v) => v,
            Source::Levels(l) => &l[level],
        }
    }

    /// `‖θ‖_{p,(τ,T)×Ω}`.
    pub fn theta_norm(&self, p: f64) -> Result<f64, DualError> {
        Ok(discrete_norm_lp(
            (0..self.steps).map(|k| self.theta(k)),
            &self.grid,
            self.dt(),
            p,
        )?)
    }

    fn scaled(mut self, factor: f64) -> Self {
        match &mut self.theta {
            Source::Stationary(v) => v.iter_mut().for_each(|x| *x *= factor),
            Source::Levels(l) => l.iter_mut().flatten().for_each(|x| *x *= factor),
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub grid: Grid,
    pub diffusion: f64,
    pub dt: f64,
    /// `t_k`, `k = 0..=N`.
    pub times: Vec<f64>,
    /// `ψ(t_k)`; the last level is `ψ(T) = 0`.
    pub psi: Vec<Vec<f64>>,
}

impl DualSolution {
    fn interior_levels(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.psi[..self.psi.len() - 1].iter()
    }

    /// `‖Δ_h ψ‖_{p,(τ,T)×Ω}`.
    pub fn laplacian_norm(&self, p: f64) -> Result<f64, DualError> {
        Ok(discrete_norm_lp(
            self.interior_levels()
                .map(|psi| laplacian_apply(psi, &self.grid, 1.0, 0.0)),
            &self.grid,
            self.dt,
            p,
        )?)
    }

    /// `‖ψ_t‖_{p,(τ,T)×Ω}` with forward differences `(ψ_{k+1} − ψ_k)/dt`.
    pub fn time_derivative_norm(&self, p: f64) -> Result<f64, DualError> {
        let dt = self.dt;
        Ok(discrete_norm_lp(
            self.psi.windows(2).map(|w| {
                w[1].iter()
                    .zip(&w[0])
                    .map(|(a, b)| (a - b) / dt)
                    .collect::<Vec<f64>>()
            }),
            &self.grid,
            dt,
            p,
        )?)
    }

    pub fn min(&self) -> f64 {
        self.psi
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn terminal(&self) -> &[f64] {
        &self.psi[self.psi.len() - 1]
    }
}

/// Solves the backward problem by marching `φ(s) = ψ(T − s)` forward from
/// `φ(0) = 0`.
pub fn solve_dual(problem: &DualProblem) -> Result<DualSolution, DualError> {
    let grid = problem.grid;
    let n = problem.steps;
    let dt = problem.dt();
    let op = ImplicitDiffusion::new(&grid, problem.diffusion, 0.0, dt)?;
    let mut psi = vec![Vec::new(); n + 1];
    let mut phi = vec![0.0; grid.cell_count()];
    psi[n] = phi.clone();
    let mut scratch = Vec::new();
    for k in (0..n).rev() {
        op.step(&mut phi, Some(problem.theta(k)), dt, &mut scratch);
        psi[k] = phi.clone();
    }
    let times = (0..=n)
        .map(|k| {
            if k == n {
                problem.horizon
            } else {
                problem.tau + k as f64 * dt
            }
        })
        .collect();
    Ok(DualSolution {
        grid,
        diffusion: problem.diffusion,
        dt,
        times,
        psi,
    })
}

/// Time settings for maximal-regularity estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmrSettings {
    pub tau: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for CmrSettings {
    fn default() -> Self {
        Self {
            tau: 0.0,
            horizon: 1.0,
            steps: 500,
        }
    }
}

/// Stationary source shapes used in estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum CmrSample {
    /// `1 + cos(kπx/lx)`.
    CosineMode(u32),
    /// `Σ amp·exp(−|x − c|²/(2σ²))` over 1–5 bumps: `(amp, cx, cy, sigma)`.
    Bumps(Vec<(f64, f64, f64, f64)>),
    Constant(f64),
}

impl CmrSample {
    pub fn is_adversarial(&self) -> bool {
        matches!(self, CmrSample::CosineMode(_))
    }

    pub fn field(&self, grid: &Grid) -> Vec<f64> {
        match self {
            CmrSample::CosineMode(k) => {
                let kk = f64::from(*k) * PI / grid.lx();
                grid.sample(|x, _| 1.0 + libm::cos(kk * x))
            }
            CmrSample::Bumps(bumps) => grid.sample(|x, y| {
                bumps
                    .iter()
                    .map(|&(amp, cx, cy, sigma)| {
                        let r2 = (x - cx) * (x - cx)
                            + if grid.dim() == 2 {
                                (y - cy) * (y - cy)
                            } else {
                                0.0
                            };
                        amp * libm::exp(-r2 / (2.0 * sigma * sigma))
                    })
                    .sum()
            }),
            CmrSample::Constant(c) => vec![*c; grid.cell_count()],
        }
    }
}

pub const ADVERSARIAL_MODES: u32 = 4;

/// The four cosine modes followed by `random_count` seeded bump blends.
pub fn cmr_samples(grid: &Grid, random_count: usize, seed: u64) -> Vec<CmrSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<CmrSample> = (1..=ADVERSARIAL_MODES).map(CmrSample::CosineMode).collect();
    for _ in 0..random_count {
        let count = rng.gen_range(1..=5);
        let bumps = (0..count)
            .map(|_| {
                let amp = rng.gen_range(0.5..2.0);
                let cx = rng.gen_range(0.0..grid.lx());
                let cy = rng.gen_range(0.0..grid.ly());
                let sigma = rng.gen_range(0.05..0.25) * grid.lx();
                (amp, cx, cy, sigma)
            })
            .collect();
        samples.push(CmrSample::Bumps(bumps));
    }
    samples
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub sample: CmrSample,
    /// `‖Δψ‖_{p′}` for `‖θ‖_{p′} = 1`.
    pub ratio: f64,
    pub time_derivative_norm: f64,
    pub theta_norm: f64,
    pub min_psi: f64,
}

/// Normalizes the sample to unit `‖θ‖_{p′}`, solves, and measures.
pub fn evaluate_cmr_sample(
    grid: &Grid,
    diffusion: f64,
    p_prime: f64,
    settings: &CmrSettings,
    sample: &CmrSample,
) -> Result<SampleResult, DualError> {
    if !(p_prime > 1.0) {
        return Err(DualError::InvalidExponent(p_prime));
    }
    let raw = DualProblem::stationary(
        *grid,
        diffusion,
        settings.tau,
        settings.horizon,
        settings.steps,
        sample.field(grid),
    )?;
    let norm = raw.theta_norm(p_prime)?;
    let problem = raw.scaled(1.0 / norm);
    let theta_norm = problem.theta_norm(p_prime)?;
    let solution = solve_dual(&problem)?;
    Ok(SampleResult {
        sample: sample.clone(),
        ratio: solution.laplacian_norm(p_prime)? / theta_norm,
        time_derivative_norm: solution.time_derivative_norm(p_prime)?,
        theta_norm,
        min_psi: solution.min(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmrEstimate {
    pub p_prime: f64,
    pub diffusion: f64,
    /// Max over all samples: a lower estimate, never the supremum.
    pub ratio_max: f64,
    /// Max over the deterministic cosine modes only.
    pub adversarial_ratio_max: f64,
    pub samples: usize,
    pub nx: usize,
    pub ny: usize,
    pub horizon: f64,
    pub seed: u64,
    pub min_psi: f64,
    pub results: Vec<SampleResult>,
}

impl CmrEstimate {
    /// Combines per-sample results; order-independent.
    pub fn aggregate(
        grid: &Grid,
        diffusion: f64,
        p_prime: f64,
        settings: &CmrSettings,
        seed: u64,
        results: Vec<SampleResult>,
    ) -> Self {
        let ratio_max = results.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let adversarial_ratio_max = results
            .iter()
            .filter(|r| r.sample.is_adversarial())
            .map(|r| r.ratio)
            .fold(0.0, f64::max);
        let min_psi = results
            .iter()
            .map(|r| r.min_psi)
            .fold(f64::INFINITY, f64::min);
        Self {
            p_prime,
            diffusion,
            ratio_max,
            adversarial_ratio_max,
            samples: results.len(),
            nx: grid.nx(),
            ny: grid.ny(),
            horizon: settings.horizon - settings.tau,
            seed,
            min_psi,
            results,
        }
    }

    /// `C_mr(p′)` implied by the estimate: `D·ratio_max`.
    pub fn cmr(&self) -> f64 {
        self.diffusion * self.ratio_max
    }

    /// Largest violation of `‖ψ_t‖ ≤ (ratio_max·D + 1)‖θ‖` over samples
    /// (negative when every sample satisfies it).
    pub fn time_derivative_slack(&self) -> f64 {
        let factor = self.ratio_max * self.diffusion + 1.0;
        self.results
            .iter()
            .map(|r| r.time_derivative_norm - factor * r.theta_norm)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Empirical maximal-regularity ratio with default time settings (`T = 1`).
/// `sample_count` random blends are drawn in addition to the four cosine
/// modes.
pub fn estimate_cmr(
    grid: &Grid,
    diffusion: f64,
    p_prime: f64,
    sample_count: usize,
    seed: u64,
) -> Result<CmrEstimate, DualError> {
    estimate_cmr_with(
        grid,
        diffusion,
        p_prime,
        sample_count,
        seed,
        &CmrSettings::default(),
    )
}

pub fn estimate_cmr_with(
    grid: &Grid,
    diffusion: f64,
    p_prime: f64,
    sample_count: usize,
    seed: u64,
    settings: &CmrSettings,
) -> Result<CmrEstimate, DualError> {
    let results = cmr_samples(grid, sample_count, seed)
        .iter()
        .map(|s| evaluate_cmr_sample(grid, diffusion, p_prime, settings, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CmrEstimate::aggregate(
        grid, diffusion, p_prime, settings, seed, results,
    ))
}
