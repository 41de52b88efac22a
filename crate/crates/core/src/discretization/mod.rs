//! Cell-centered finite volumes on intervals and rectangles.
//!
//! Cells are indexed `c = j·nx + i` with centers at `((i+½)dx, (j+½)dy)`.
//! The diffusion operator is the 3-point (1D) or 5-point (2D) stencil with
//! zero flux through interior-to-wall faces replaced by the prescribed
//! boundary flux `−D ∂u/∂n = b`, which makes the discrete divergence theorem
//! exact:
//!
//! `Σ_c (L u)_c |cell| = −Σ_faces b |face|`.

mod tridiag;

use alloc::vec;
use alloc::vec::Vec;

use crate::math::abs;
pub(crate) use tridiag::NeumannLineSolver;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscretizationError {
    #[error("grid needs at least 3 cells per direction and positive finite lengths")]
    InvalidGrid,
    #[error("boundary flux b[{index}] = {value} must be finite and <= 0")]
    PositiveFlux { index: usize, value: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("diffusion coefficient must be positive and finite, got {0}")]
    InvalidDiffusion(f64),
    #[error("norm exponent must be >= 1 (or infinity), got {0}")]
    InvalidExponent(f64),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("array has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("linear solve failed (non-positive pivot)")]
    SolveFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn line(nx: usize, lx: f64) -> Result<Self, DiscretizationError> {
        if nx < 3 || !(lx > 0.0 && lx.is_finite()) {
            return Err(DiscretizationError::InvalidGrid);
        }
        Ok(Self {
            dim: 1,
            nx,
            ny: 1,
            lx,
            ly: 1.0,
        })
    }

    pub fn rect(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, DiscretizationError> {
        if nx < 3 || ny < 3 || !(lx > 0.0 && lx.is_finite()) || !(ly > 0.0 && ly.is_finite()) {
            return Err(DiscretizationError::InvalidGrid);
        }
        Ok(Self {
            dim: 2,
            nx,
            ny,
            lx,
            ly,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.dx()
        } else {
            self.dx() * self.dy()
        }
    }

    /// `|Ω|`.
    pub fn domain_volume(&self) -> f64 {
        if self.dim == 1 {
            self.lx
        } else {
            self.lx * self.ly
        }
    }

    /// `|∂Ω|`: two end points in 1D, the perimeter in 2D.
    pub fn boundary_measure(&self) -> f64 {
        if self.dim == 1 {
            2.0
        } else {
            2.0 * (self.lx + self.ly)
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, cell: usize) -> (f64, f64) {
        let i = cell % self.nx;
        let j = cell / self.nx;
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }

    /// Samples `f(x, y)` at cell centers (`y` is the center of the single row
    /// in 1D).
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
        (0..self.cell_count())
            .map(|c| {
                let (x, y) = self.center(c);
                f(x, y)
            })
            .collect()
    }

    /// `Σ_c v_c |cell|`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Mirror image of a cell in `x`.
    pub fn reflect_x(&self, cell: usize) -> usize {
        let i = cell % self.nx;
        let j = cell / self.nx;
        self.index(self.nx - 1 - i, j)
    }
}

/// Per-species Neumann data `b_i ≤ 0`, constant over `∂Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux {
    values: Vec<f64>,
}

impl BoundaryFlux {
    pub fn new(values: Vec<f64>) -> Result<Self, DiscretizationError> {
        if let Some(index) = values.iter().position(|b| !(*b <= 0.0 && b.is_finite())) {
            return Err(DiscretizationError::PositiveFlux {
                index,
                value: values[index],
            });
        }
        Ok(Self { values })
    }

    pub fn zero(species: usize) -> Self {
        Self {
            values: vec![0.0; species],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, species: usize) -> f64 {
        self.values[species]
    }

    /// `B = Σ_i |b_i| |∂Ω|`, the total inflow rate.
    pub fn inflow_rate(&self, grid: &Grid) -> f64 {
        self.values.iter().map(|b| abs(*b)).sum::<f64>() * grid.boundary_measure()
    }
}

/// Concentrations of every species on every cell at one time. Values are
/// stored species-major: `values[s·cells + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub grid: Grid,
    pub time: f64,
    species: usize,
    values: Vec<f64>,
}

impl StateField {
    pub fn new(grid: Grid, species: usize, values: Vec<f64>) -> Result<Self, DiscretizationError> {
        let expected = grid.cell_count() * species;
        if values.len() != expected {
            return Err(DiscretizationError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            time: 0.0,
            species,
            values,
        })
    }

    pub fn uniform(grid: Grid, concentrations: &[f64]) -> Self {
        let n = grid.cell_count();
        let values = concentrations
            .iter()
            .flat_map(|c| core::iter::repeat_n(*c, n))
            .collect();
        Self {
            grid,
            time: 0.0,
            species: concentrations.len(),
            values,
        }
    }

    pub fn species_count(&self) -> usize {
        self.species
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn species(&self, s: usize) -> &[f64] {
        let n = self.grid.cell_count();
        &self.values[s * n..(s + 1) * n]
    }

    pub fn species_mut(&mut self, s: usize) -> &mut [f64] {
        let n = self.grid.cell_count();
        &mut self.values[s * n..(s + 1) * n]
    }

    /// Gathers the concentration vector of one cell into `out`.
    pub fn cell_into(&self, cell: usize, out: &mut [f64]) {
        let n = self.grid.cell_count();
        for (s, o) in out.iter_mut().enumerate() {
            *o = self.values[s * n + cell];
        }
    }

    pub fn mass(&self, s: usize) -> f64 {
        self.grid.integrate(self.species(s))
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.species).map(|s| self.mass(s)).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `D ∇²u` plus the boundary source `−b|face|/|cell|` on wall cells.
pub fn laplacian_apply(values: &[f64], grid: &Grid, diffusion: f64, flux: f64) -> Vec<f64> {
    debug_assert_eq!(values.len(), grid.cell_count());
    let (nx, ny) = (grid.nx(), grid.ny());
    let ax = diffusion / (grid.dx() * grid.dx());
    let ay = diffusion / (grid.dy() * grid.dy());
    let mut out = vec![0.0; values.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.index(i, j);
            let u = values[c];
            let mut acc = 0.0;
            if i > 0 {
                acc += ax * (values[c - 1] - u);
            } else {
                acc -= flux / grid.dx();
            }
            if i + 1 < nx {
                acc += ax * (values[c + 1] - u);
            } else {
                acc -= flux / grid.dx();
            }
            if grid.dim() == 2 {
                if j > 0 {
                    acc += ay * (values[c - nx] - u);
                } else {
                    acc -= flux / grid.dy();
                }
                if j + 1 < ny {
                    acc += ay * (values[c + nx] - u);
                } else {
                    acc -= flux / grid.dy();
                }
            }
            out[c] = acc;
        }
    }
    out
}

/// Factored backward-Euler operators for one species and one step size.
#[derive(Debug, Clone)]
pub(crate) struct ImplicitDiffusion {
    grid: Grid,
    x: NeumannLineSolver,
    y: Option<NeumannLineSolver>,
    /// Wall-cell source rates `−b/dx`, `−b/dy`.
    wall_x: f64,
    wall_y: f64,
}

impl ImplicitDiffusion {
    pub(crate) fn new(
        grid: &Grid,
        diffusion: f64,
        flux: f64,
        dt: f64,
    ) -> Result<Self, DiscretizationError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DiscretizationError::InvalidTimeStep(dt));
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(DiscretizationError::InvalidDiffusion(diffusion));
        }
        if !(flux <= 0.0 && flux.is_finite()) {
            return Err(DiscretizationError::PositiveFlux {
                index: 0,
                value: flux,
            });
        }
        let rx = dt * diffusion / (grid.dx() * grid.dx());
        let x = NeumannLineSolver::new(grid.nx(), rx).ok_or(DiscretizationError::SolveFailed)?;
        let y = if grid.dim() == 2 {
            let ry = dt * diffusion / (grid.dy() * grid.dy());
            Some(NeumannLineSolver::new(grid.ny(), ry).ok_or(DiscretizationError::SolveFailed)?)
        } else {
            None
        };
        Ok(Self {
            grid: *grid,
            x,
            y,
            wall_x: -flux / grid.dx(),
            wall_y: -flux / grid.dy(),
        })
    }

    /// One step on `values` in place. In 2D this is an x-sweep followed by a
    /// y-sweep, each backward Euler over the full `dt`, each carrying its own
    /// walls' inflow. `source` (per cell, rate) is added in the first sweep.
    pub(crate) fn step(
        &self,
        values: &mut [f64],
        source: Option<&[f64]>,
        dt: f64,
        scratch: &mut Vec<f64>,
    ) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        if let Some(src) = source {
            for (v, s) in values.iter_mut().zip(src) {
                *v += dt * s;
            }
        }
        for j in 0..ny {
            let row = &mut values[j * nx..(j + 1) * nx];
            row[0] += dt * self.wall_x;
            row[nx - 1] += dt * self.wall_x;
            self.x.solve_in_place(row);
        }
        if let Some(ysolver) = &self.y {
            scratch.clear();
            scratch.resize(ny, 0.0);
            for i in 0..nx {
                for j in 0..ny {
                    scratch[j] = values[j * nx + i];
                }
                scratch[0] += dt * self.wall_y;
                scratch[ny - 1] += dt * self.wall_y;
                ysolver.solve_in_place(scratch);
                for j in 0..ny {
                    values[j * nx + i] = scratch[j];
                }
            }
        }
    }
}

/// Backward-Euler diffusion of every species of `field` over `dt`:
/// `(I − dt D_i L) u_new = u_old + dt·(boundary source)`.
pub fn diffusion_step_implicit(
    field: &StateField,
    diffusion: &[f64],
    flux: &BoundaryFlux,
    dt: f64,
) -> Result<StateField, DiscretizationError> {
    let mut out = field.clone();
    diffusion_step_in_place(&mut out, diffusion, flux, dt)?;
    Ok(out)
}

pub(crate) fn diffusion_step_in_place(
    field: &mut StateField,
    diffusion: &[f64],
    flux: &BoundaryFlux,
    dt: f64,
) -> Result<(), DiscretizationError> {
    let species = field.species_count();
    for (found, expected) in [(diffusion.len(), species), (flux.values().len(), species)] {
        if found != expected {
            return Err(DiscretizationError::LengthMismatch { expected, found });
        }
    }
    let grid = field.grid;
    let mut scratch = Vec::new();
    for s in 0..species {
        let op = ImplicitDiffusion::new(&grid, diffusion[s], flux.get(s), dt)?;
        op.step(field.species_mut(s), None, dt, &mut scratch);
    }
    if !field.is_finite() {
        return Err(DiscretizationError::SolveFailed);
    }
    field.time += dt;
    Ok(())
}

/// Discrete `L^p(Ω)` norm at one time; `p = ∞` gives `max |v|`.
pub fn spatial_norm_lp(values: &[f64], grid: &Grid, p: f64) -> Result<f64, DiscretizationError> {
    discrete_norm_lp([values], grid, 1.0, p)
}

/// Space-time norm `(Σ_steps Σ_cells |v|^p |cell| dt)^{1/p}`, or the max of
/// `|v|` for `p = ∞`. Each snapshot stands for one interval of length `dt`.
pub fn discrete_norm_lp<I, T>(
    trajectory: I,
    grid: &Grid,
    dt: f64,
    p: f64,
) -> Result<f64, DiscretizationError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[f64]>,
{
    if !(p >= 1.0) {
        return Err(DiscretizationError::InvalidExponent(p));
    }
    let mut any = false;
    let mut acc = 0.0;
    for snap in trajectory {
        let snap = snap.as_ref();
        if snap.len() != grid.cell_count() {
            return Err(DiscretizationError::LengthMismatch {
                expected: grid.cell_count(),
                found: snap.len(),
            });
        }
        any = true;
        if p == f64::INFINITY {
            acc = snap.iter().map(|v| abs(*v)).fold(acc, f64::max);
        } else if p == 1.0 {
            acc += snap.iter().map(|v| abs(*v)).sum::<f64>();
        } else if p == 2.0 {
            acc += snap.iter().map(|v| v * v).sum::<f64>();
        } else {
            acc += snap.iter().map(|v| libm::pow(abs(*v), p)).sum::<f64>();
        }
    }
    if !any {
        return Err(DiscretizationError::EmptyTrajectory);
    }
    if p == f64::INFINITY {
        return Ok(acc);
    }
    let weighted = acc * grid.cell_volume() * dt;
    Ok(if p == 1.0 {
        weighted
    } else if p == 2.0 {
        libm::sqrt(weighted)
    } else {
        libm::pow(weighted, 1.0 / p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::f64::consts::PI;

    #[test]
    fn grid_validation_and_geometry() {
        assert!(Grid::line(2, 1.0).is_err());
        assert!(Grid::line(3, 0.0).is_err());
        assert!(Grid::rect(3, 2, 1.0, 1.0).is_err());
        let g = Grid::rect(4, 5, 2.0, 1.0).unwrap();
        assert_eq!(g.cell_count(), 20);
        assert_eq!(g.center(g.index(1, 2)), (0.75, 0.5));
        assert_eq!(g.boundary_measure(), 6.0);
        assert_eq!(g.domain_volume(), 2.0);
        let l = Grid::line(8, 2.0).unwrap();
        assert_eq!(l.cell_volume(), 0.25);
        assert_eq!(l.boundary_measure(), 2.0);
    }

    #[test]
    fn flux_sign_is_enforced() {
        assert!(BoundaryFlux::new(vec![0.0, -1.0]).is_ok());
        assert_eq!(
            BoundaryFlux::new(vec![0.0, 0.5]),
            Err(DiscretizationError::PositiveFlux {
                index: 1,
                value: 0.5
            })
        );
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        for g in [
            Grid::line(10, 1.0).unwrap(),
            Grid::rect(5, 7, 1.0, 2.0).unwrap(),
        ] {
            let out = laplacian_apply(&vec![3.0; g.cell_count()], &g, 2.0, 0.0);
            assert!(out.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = Grid::line(11, 1.7).unwrap();
        let u = g.sample(|x, _| x * x);
        let out = laplacian_apply(&u, &g, 1.0, 0.0);
        for v in &out[1..10] {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn boundary_inflow_balance() {
        let g = Grid::line(13, 1.0).unwrap();
        let u = g.sample(|x, _| 1.0 + x * (1.0 - x) * 5.0);
        let out = laplacian_apply(&u, &g, 0.7, -1.0);
        assert!((g.integrate(&out) - 2.0).abs() < 1e-12);

        let g = Grid::rect(6, 4, 2.0, 1.0).unwrap();
        let u = g.sample(|x, y| x + 3.0 * y * y);
        let out = laplacian_apply(&u, &g, 1.3, -0.5);
        // perimeter 6, inflow 0.5 per unit length
        assert!((g.integrate(&out) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_field_unchanged_by_diffusion() {
        let g = Grid::rect(6, 5, 1.0, 1.0).unwrap();
        let f = StateField::uniform(g, &[1.5, 0.25]);
        for dt in [1e-4, 0.1, 100.0] {
            let out =
                diffusion_step_implicit(&f, &[1.0, 0.01], &BoundaryFlux::zero(2), dt).unwrap();
            for (a, b) in out.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-12 * b);
            }
            assert_eq!(out.time, dt);
        }
    }

    #[test]
    fn cosine_mode_damped_by_discrete_eigenvalue() {
        let nx = 40;
        let g = Grid::line(nx, 1.0).unwrap();
        let dx = g.dx();
        let f = StateField::new(g, 1, g.sample(|x, _| 1.0 + libm::cos(PI * x))).unwrap();
        let dt = 0.01;
        let out = diffusion_step_implicit(&f, &[1.0], &BoundaryFlux::zero(1), dt).unwrap();
        let kh2 = (2.0 / (dx * dx)) * (1.0 - libm::cos(PI * dx));
        let damp = 1.0 / (1.0 + dt * kh2);
        for (c, v) in out.species(0).iter().enumerate() {
            let (x, _) = g.center(c);
            let expected = 1.0 + damp * libm::cos(PI * x);
            assert!((v - expected).abs() < 1e-13, "{v} vs {expected}");
        }
    }

    #[test]
    fn implicit_step_mass_balance() {
        let g = Grid::rect(7, 9, 1.0, 3.0).unwrap();
        let f = StateField::new(
            g,
            2,
            (0..2 * g.cell_count())
                .map(|k| (k as f64 * 0.37).fract())
                .collect(),
        )
        .unwrap();
        let flux = BoundaryFlux::new(vec![-0.3, 0.0]).unwrap();
        let dt = 0.05;
        let out = diffusion_step_implicit(&f, &[0.5, 2.0], &flux, dt).unwrap();
        let expected0 = f.mass(0) + dt * 0.3 * g.boundary_measure();
        assert!((out.mass(0) - expected0).abs() <= 1e-12 * expected0);
        assert!((out.mass(1) - f.mass(1)).abs() <= 1e-12 * f.mass(1));
    }

    #[test]
    fn implicit_step_rejects_bad_input() {
        let g = Grid::line(5, 1.0).unwrap();
        let f = StateField::uniform(g, &[1.0]);
        assert_eq!(
            diffusion_step_implicit(&f, &[1.0], &BoundaryFlux::zero(1), 0.0),
            Err(DiscretizationError::InvalidTimeStep(0.0))
        );
        assert!(diffusion_step_implicit(&f, &[1.0, 1.0], &BoundaryFlux::zero(1), 0.1).is_err());
        assert!(diffusion_step_implicit(&f, &[-1.0], &BoundaryFlux::zero(1), 0.1).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = Grid::line(10, 1.0).unwrap();
        let traj: Vec<Vec<f64>> = (0..20).map(|_| vec![3.0; 10]).collect();
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            let v = discrete_norm_lp(&traj, &g, 1.0 / 20.0, p).unwrap();
            assert!((v - 3.0).abs() < 1e-12, "p={p}: {v}");
        }
        let mut spike = vec![0.0; 10];
        spike[4] = -7.0;
        assert_eq!(
            discrete_norm_lp([&spike], &g, 0.1, f64::INFINITY).unwrap(),
            7.0
        );

        let g2 = Grid::line(8, 2.0).unwrap();
        let ones: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0; 8]).collect();
        let v = discrete_norm_lp(&ones, &g2, 0.25, 2.0).unwrap();
        assert!((v - libm::sqrt(2.0)).abs() < 1e-14);

        assert_eq!(
            discrete_norm_lp(&ones, &g2, 0.25, 0.5),
            Err(DiscretizationError::InvalidExponent(0.5))
        );
        let empty: [&[f64]; 0] = [];
        assert_eq!(
            discrete_norm_lp(empty, &g2, 0.25, 2.0),
            Err(DiscretizationError::EmptyTrajectory)
        );
    }
}
