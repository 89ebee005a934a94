//! Concrete operators: the six-state cyclic example, pixel-grid projections
//! and diffusion dynamics, seeded Gaussian ensembles, and the built-in demo
//! systems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::system::{GridSpec, SystemModel};

/// Largest diffusion coefficient for which one explicit Euler step of the
/// five-point stencil stays stable.
pub const MAX_STABLE_KAPPA: f64 = 0.25;

/// Side of the pixel grid used by the grid demos.
pub const DEMO_GRID_SIDE: usize = 10;
/// Diffusion coefficient of the shift-diffusion demo.
pub const L1_KAPPA: f64 = 0.1;
/// Shift of the shift-diffusion demo, in column-major pixel positions.
pub const L1_SHIFT: i64 = 1;

/// What happens to the stencil at the edge of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero flux: missing neighbours are dropped from the stencil.
    Reflecting,
    /// Missing neighbours hold the value zero, so mass leaks out.
    Absorbing,
    /// The grid wraps around in both directions.
    Periodic,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflecting" => Ok(Boundary::Reflecting),
            "absorbing" => Ok(Boundary::Absorbing),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(Error::InvalidParameter(format!("unknown boundary {s:?}"))),
        }
    }
}

/// The first `m` rows of the n×n identity.
pub fn coordinate_projection(m: usize, n: usize) -> Result<DenseMatrix> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    DenseMatrix::from_dmatrix(DMatrix::identity(m, n))
}

/// Sums each pixel column: row j has ones at the g pixels of column j.
pub fn column_sum_projection(grid: GridSpec) -> DenseMatrix {
    let g = grid.side();
    let mut p = DMatrix::zeros(g, grid.state_dim());
    for j in 1..=g {
        for i in 1..=g {
            p[(j - 1, grid.index(i, j))] = 1.0;
        }
    }
    DenseMatrix::from_dmatrix(p).expect("finite by construction")
}

/// Cyclic shift e_k → e_{k+shift} on R^n.
pub fn cyclic_shift(n: usize, shift: i64) -> DenseMatrix {
    let mut s = DMatrix::zeros(n, n);
    for p in 0..n {
        let q = (p as i64 + shift).rem_euclid(n as i64) as usize;
        s[(q, p)] = 1.0;
    }
    DenseMatrix::from_dmatrix(s).expect("finite by construction")
}

/// The six-state example whose chain shrinks by one dimension per step:
/// L is the cyclic shift e_k → e_{k+1} and P reads the first two coordinates.
pub fn cyclic_example() -> SystemModel {
    SystemModel::stationary(cyclic_shift(6, 1), coordinate_projection(2, 6).unwrap())
        .expect("fixture is consistent")
        .with_label("cyclic")
}

/// One explicit Euler step of five-point diffusion with a per-pixel
/// coefficient sampled at the cell:
///
/// ```text
/// x'_p = x_p + κ_p Σ_{q ∈ nbr(p)} (x_q − x_p)
/// ```
///
/// Rows sum to one for reflecting and periodic boundaries. The matrix is
/// only symmetric (and mass conserving) when κ is uniform.
pub fn diffusion_step<F>(grid: GridSpec, coefficient: F, boundary: Boundary) -> Result<DenseMatrix>
where
    F: Fn(usize, usize) -> f64,
{
    let g = grid.side() as i64;
    let n = grid.state_dim();
    let mut l = DMatrix::identity(n, n);
    for j in 1..=grid.side() {
        for i in 1..=grid.side() {
            let kappa = coefficient(i, j);
            if !(0.0..=MAX_STABLE_KAPPA).contains(&kappa) {
                return Err(Error::InvalidParameter(format!(
                    "diffusion coefficient {kappa} at pixel ({i}, {j}) is outside [0, {MAX_STABLE_KAPPA}]"
                )));
            }
            let p = grid.index(i, j);
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                let inside = (1..=g).contains(&ni) && (1..=g).contains(&nj);
                let neighbour = if inside {
                    Some((ni, nj))
                } else {
                    match boundary {
                        Boundary::Reflecting => None,
                        Boundary::Absorbing => {
                            l[(p, p)] -= kappa;
                            None
                        }
                        Boundary::Periodic => Some(((ni - 1).rem_euclid(g) + 1, (nj - 1).rem_euclid(g) + 1)),
                    }
                };
                if let Some((qi, qj)) = neighbour {
                    let q = grid.index(qi as usize, qj as usize);
                    l[(p, q)] += kappa;
                    l[(p, p)] -= kappa;
                }
            }
        }
    }
    DenseMatrix::from_dmatrix(l)
}

/// Uniform diffusion followed by a cyclic shift of the column-major state
/// vector by `shift` positions: S·D_κ.
///
/// A shift of k·g moves every pixel column k places to the right; a shift
/// of 1 moves pixels one row down, wrapping the bottom pixel of each column
/// to the top of the next.
pub fn shift_diffusion(grid: GridSpec, kappa: f64, shift: i64, boundary: Boundary) -> Result<DenseMatrix> {
    let n = grid.state_dim();
    if shift.unsigned_abs() as usize >= n.max(1) && n > 1 {
        return Err(Error::InvalidParameter(format!("|shift| must be below {n}, got {shift}")));
    }
    let d = diffusion_step(grid, |_, _| kappa, boundary)?;
    cyclic_shift(n, shift).mul(&d)
}

/// κ_ij = (1/5)(i³ j² 10⁻⁵)^{1/4} with 1-based pixel indices.
pub fn variable_coefficient(i: usize, j: usize) -> f64 {
    let (i, j) = (i as f64, j as f64);
    0.2 * (i.powi(3) * j.powi(2) * 1e-5).powf(0.25)
}

/// Diffusion with the position-dependent coefficient [`variable_coefficient`].
/// Grids with side ≥ 12 push the largest coefficient past the stability
/// bound and are rejected.
pub fn variable_diffusion(grid: GridSpec, boundary: Boundary) -> Result<DenseMatrix> {
    diffusion_step(grid, variable_coefficient, boundary)
}

/// Deterministic standard normals: ChaCha8 seeded through
/// `SeedableRng::seed_from_u64`, turned into pairs of normals with the
/// Box–Muller transform (libm for the transcendental functions).
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// rows×cols matrix filled in row-major order.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        let entries = (0..rows * cols).map(|_| self.next_normal()).collect();
        DenseMatrix::new(rows, cols, entries).expect("normals are finite")
    }
}

/// n×n matrix of independent standard normals determined by `seed`.
pub fn random_dynamics(n: usize, seed: u64) -> DenseMatrix {
    GaussianStream::new(seed).matrix(n, n)
}

/// `count` matrices drawn in order from one stream; the first equals
/// `random_dynamics(n, seed)`.
pub fn random_dynamics_sequence(n: usize, count: usize, seed: u64) -> Vec<DenseMatrix> {
    let mut stream = GaussianStream::new(seed);
    (0..count).map(|_| stream.matrix(n, n)).collect()
}

/// exp(−((i−ci)² + (j−cj)²)/(2σ²)) at every pixel.
pub fn gaussian_blob(grid: GridSpec, center_i: f64, center_j: f64, sigma: f64) -> Result<DVector<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let mut x = DVector::zeros(grid.state_dim());
    for j in 1..=grid.side() {
        for i in 1..=grid.side() {
            let di = i as f64 - center_i;
            let dj = j as f64 - center_j;
            x[grid.index(i, j)] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    Ok(x)
}

/// Built-in systems available without data files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    /// The six-state cyclic shift read through two coordinates.
    Cyclic,
    /// A seeded 6×6 Gaussian L with the cyclic example's projection.
    Random6,
    /// 10×10 grid, shift plus uniform diffusion, column sums.
    L1Grid,
    /// 10×10 grid, position-dependent diffusion, column sums.
    L2Grid,
}

impl Demo {
    pub const ALL: [Demo; 4] = [Demo::Cyclic, Demo::Random6, Demo::L1Grid, Demo::L2Grid];

    pub fn name(&self) -> &'static str {
        match self {
            Demo::Cyclic => "cyclic",
            Demo::Random6 => "random6",
            Demo::L1Grid => "l1grid",
            Demo::L2Grid => "l2grid",
        }
    }

    /// `seed` only matters for [`Demo::Random6`].
    pub fn build(&self, seed: u64) -> Result<SystemModel> {
        match self {
            Demo::Cyclic => Ok(cyclic_example()),
            Demo::Random6 => Ok(SystemModel::stationary(random_dynamics(6, seed), coordinate_projection(2, 6)?)?
                .with_label(format!("random6 (seed {seed})"))),
            Demo::L1Grid => {
                let grid = GridSpec::new(DEMO_GRID_SIDE)?;
                let l = shift_diffusion(grid, L1_KAPPA, L1_SHIFT, Boundary::Absorbing)?;
                SystemModel::stationary(l, column_sum_projection(grid))?
                    .with_label("l1grid")
                    .with_grid(grid)
            }
            Demo::L2Grid => {
                let grid = GridSpec::new(DEMO_GRID_SIDE)?;
                let l = variable_diffusion(grid, Boundary::Periodic)?;
                SystemModel::stationary(l, column_sum_projection(grid))?
                    .with_label("l2grid")
                    .with_grid(grid)
            }
        }
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown demo {s:?} (expected cyclic, random6, l1grid or l2grid)")))
    }
}
