//! Uniform 1-D Dirichlet grid, fields on it, and the discrete calculus the
//! whole laboratory runs on.
//!
//! The domain is the interval (0, L) with homogeneous Dirichlet boundary
//! conditions. A grid stores only `L` and the number of interior nodes `n`;
//! the spacing `h = L / (n + 1)` is always derived, never stored, so it
//! cannot drift. Fields hold interior values only — the boundary is an
//! implicit zero on both ends.
//!
//! Conventions used everywhere:
//!
//! * inner product   (u, v) = h * sum_i u_i v_i
//! * L2 norm         |u|^2 = (u, u)
//! * H1_0 seminorm   ||u||^2 = h * sum_{i=0..n} ((u_{i+1} - u_i) / h)^2
//!   with u_0 = u_{n+1} = 0, so both boundary jumps count
//! * Lp norm         |u|_p^p = h * sum_i |u_i|^p
//! * dual norm       ||f||_*^2 = (f, w) where -Lap_h w = f
//!
//! The identity (-Lap_h u, u) = ||u||^2 holds exactly in exact arithmetic and
//! ties the three together; it is what makes the energy bookkeeping of the
//! time stepper an algebraic identity rather than an approximation.
//!
//! Every estimate evaluated against discrete trajectories uses the *discrete*
//! first eigenvalue lambda_1^h = (4/h^2) sin^2(pi h / (2L)), which is what the
//! discrete operator actually delivers; the continuous value (pi/L)^2 is
//! available for reporting alongside.

use crate::error::{Error, Result};

/// Uniform grid on (0, L) with `n` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n: usize,
}

/// Which first eigenvalue of the (negative) Dirichlet Laplacian to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenvalueMode {
    /// (4/h^2) sin^2(pi h / (2L)) — exact for the difference operator.
    Discrete,
    /// (pi/L)^2 — the PDE value, for side-by-side reporting.
    Continuous,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Descriptor(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        if n < 2 {
            return Err(Error::Descriptor(format!(
                "grid needs at least 2 interior nodes, got {n}"
            )));
        }
        Ok(Grid1D { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of interior nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh spacing h = L / (n + 1).
    pub fn spacing(&self) -> f64 {
        self.length / (self.n as f64 + 1.0)
    }

    /// Coordinate of interior node `i` (1-based, i = 1..=n).
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i >= 1 && i <= self.n);
        i as f64 * self.spacing()
    }

    /// Interior node coordinates in order.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n).map(move |i| self.node(i))
    }

    /// First eigenvalue of -Lap on (0, L) with Dirichlet conditions.
    pub fn first_eigenvalue(&self, mode: EigenvalueMode) -> f64 {
        match mode {
            EigenvalueMode::Discrete => self.mode_eigenvalue(1),
            EigenvalueMode::Continuous => {
                let k = std::f64::consts::PI / self.length;
                k * k
            }
        }
    }

    /// k-th eigenvalue of the discrete operator: (4/h^2) sin^2(k pi h / (2L)).
    pub fn mode_eigenvalue(&self, k: usize) -> f64 {
        let h = self.spacing();
        let s = (k as f64 * std::f64::consts::PI * h / (2.0 * self.length)).sin();
        4.0 / (h * h) * s * s
    }

    /// Sample of sin(k pi x / L) scaled by `amplitude` — the k-th eigenvector
    /// of the discrete operator.
    pub fn sine_mode(&self, k: usize, amplitude: f64) -> Field {
        let l = self.length;
        Field::from_fn(*self, |x| {
            amplitude * (k as f64 * std::f64::consts::PI * x / l).sin()
        })
    }
}

/// Interior nodal values of a function on a [`Grid1D`]; boundary values are
/// implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid1D) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch {
                left: grid.n(),
                right: values.len(),
            });
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Discrete L2 norm sqrt(h * sum u_i^2).
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        (h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// self <- self + alpha * other. Grids must match.
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<()> {
        check_same_grid(self, other)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += alpha * o;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }
}

pub(crate) fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: a.grid.n(),
            right: b.grid.n(),
        })
    }
}

/// Norm bundle returned by [`norms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// Discrete L2 norm |u|.
    pub l2: f64,
    /// Discrete H1_0 seminorm ||u||.
    pub h10: f64,
    /// Discrete Lp norm for the exponent handed in.
    pub lp: f64,
}

/// Discrete L2, H1_0 and Lp norms of `u`. `p` is the growth exponent of the
/// active reaction (p >= 1 required here; p = 2 reproduces `l2`).
pub fn norms(u: &Field, p: f64) -> Norms {
    debug_assert!(p >= 1.0);
    let h = u.grid.spacing();
    let vals = u.values();
    let l2 = u.l2_norm();

    let mut grad_sq = 0.0;
    let mut prev = 0.0; // boundary
    for &v in vals {
        let d = v - prev;
        grad_sq += d * d;
        prev = v;
    }
    grad_sq += prev * prev; // jump to the right boundary zero
    let h10 = (grad_sq / h).sqrt();

    let lp_pow: f64 = if (p - 2.0).abs() < 1e-14 {
        vals.iter().map(|v| v * v).sum()
    } else {
        vals.iter().map(|v| v.abs().powf(p)).sum()
    };
    let lp = (h * lp_pow).powf(1.0 / p);

    Norms { l2, h10, lp }
}

/// Discrete inner product (u, v) = h * sum u_i v_i.
pub fn inner_product(u: &Field, v: &Field) -> Result<f64> {
    check_same_grid(u, v)?;
    let h = u.grid.spacing();
    Ok(h * u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * b)
        .sum::<f64>())
}

/// Discrete L2 distance |u - v| without allocating the difference.
pub fn l2_distance(u: &Field, v: &Field) -> Result<f64> {
    check_same_grid(u, v)?;
    let h = u.grid.spacing();
    let sum: f64 = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok((h * sum).sqrt())
}

/// Apply the discrete Dirichlet Laplacian: (u_{i-1} - 2 u_i + u_{i+1}) / h^2
/// with zero boundary neighbors.
pub fn laplacian_apply(u: &Field) -> Field {
    let n = u.grid.n();
    let h = u.grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let v = u.values();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let left = if i > 0 { v[i - 1] } else { 0.0 };
        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
        out[i] = (left - 2.0 * v[i] + right) * inv_h2;
    }
    Field {
        grid: u.grid,
        values: out,
    }
}

/// The nonlocal functional value l(u) = (weight, u). The weight must already
/// be sampled on the same grid as `u`.
pub fn nonlocal_value(weight: &Field, u: &Field) -> Result<f64> {
    inner_product(weight, u)
}

/// Scratch buffers for the constant-coefficient symmetric tridiagonal solver
/// (Thomas algorithm). Reusable across solves of the same size.
#[derive(Debug, Clone)]
pub(crate) struct TridiagScratch {
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl TridiagScratch {
    pub(crate) fn new(n: usize) -> Self {
        TridiagScratch {
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    /// Solve (diag on the main diagonal, off on both neighbors) x = rhs.
    /// The matrices assembled in this crate are strictly diagonally dominant,
    /// so the elimination cannot degenerate; guarded regardless.
    pub(crate) fn solve(
        &mut self,
        diag: f64,
        off: f64,
        rhs: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let n = rhs.len();
        debug_assert_eq!(out.len(), n);
        if self.upper.len() < n {
            self.upper.resize(n, 0.0);
            self.rhs.resize(n, 0.0);
        }
        let tiny = 1e-300;
        let mut pivot = diag;
        if pivot.abs() < tiny {
            return Err(Error::SolverFailure { row: 0, pivot });
        }
        self.upper[0] = off / pivot;
        self.rhs[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = diag - off * self.upper[i - 1];
            if pivot.abs() < tiny {
                return Err(Error::SolverFailure { row: i, pivot });
            }
            self.upper[i] = off / pivot;
            self.rhs[i] = (rhs[i] - off * self.rhs[i - 1]) / pivot;
        }
        out[n - 1] = self.rhs[n - 1];
        for i in (0..n - 1).rev() {
            out[i] = self.rhs[i] - self.upper[i] * out[i + 1];
        }
        Ok(())
    }
}

/// Solve -Lap_h w = f.
pub fn solve_neg_laplacian(f: &Field) -> Result<Field> {
    let n = f.grid.n();
    let h = f.grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let mut scratch = TridiagScratch::new(n);
    let mut out = vec![0.0; n];
    scratch.solve(2.0 * inv_h2, -inv_h2, f.values(), &mut out)?;
    Field::from_values(f.grid, out)
}

/// Dual (H^-1) norm: ||f||_* = sqrt((f, w)) with -Lap_h w = f.
pub fn dual_norm(f: &Field) -> Result<f64> {
    let w = solve_neg_laplacian(f)?;
    let sq = inner_product(f, &w)?;
    // (f, w) = ||w||^2 >= 0 in exact arithmetic; clamp rounding.
    Ok(sq.max(0.0).sqrt())
}

/// Dual pairing (f, (-Lap_h)^{-1} g). Symmetric in its arguments; this is the
/// Gram form used to evaluate ||h(t)||_*^2 for multi-term forcings.
pub fn dual_pairing(f: &Field, g: &Field) -> Result<f64> {
    check_same_grid(f, g)?;
    let w = solve_neg_laplacian(g)?;
    inner_product(f, &w)
}
