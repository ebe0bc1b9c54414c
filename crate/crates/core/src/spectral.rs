//! Dirichlet sine eigenbasis on an interval or a rectangle.
//!
//! A [`Field`] stores coefficients `u_k` of `u(x) = sum_k u_k e_k(x)` with
//! `e_k(x) = prod_i sin(k_i pi x_i / L_i)`, `k_i = 1..N`. Each axis has
//! `||sin(k pi x / L)||^2 = L / 2`, so `||u||^2 = (prod_i L_i / 2) sum_k u_k^2`.
//!
//! Two collocation layouts are used:
//!
//! * [`Layout::Interior`]: `x_j = j L / (M + 1)`, `j = 1..M`. Sine series
//!   vanish on the boundary, so interior points carry all information and the
//!   sine transform on them (DST-I) is exact for `k <= M`.
//! * [`Layout::Closed`]: `j = 0..M+1` with trapezoid weights. Gradients are
//!   cosine series along the differentiated axis and do not vanish on the
//!   boundary; the cosine transform on the closed grid (DCT-I) is exact, so
//!   `div_from_grid(grad_to_grid(u))` reproduces `Δu` on the retained modes.
//!
//! Transforms are direct `O(N M)` matrix products per axis.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Collocation layout of a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Interior,
    Closed,
}

/// Point values of a function on one of the basis grids, row-major with
/// axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(layout: Layout, values: Vec<f64>) -> Self {
        Grid { layout, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            layout: self.layout,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Row-major `rows x cols` matrix.
#[derive(Debug, Clone)]
struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Table { rows, cols, data }
    }
}

#[derive(Debug)]
struct Tables {
    // synthesis: points x modes
    sin_interior: Table,
    sin_closed: Table,
    cos_closed: Table,
    // analysis: modes x points, quadrature weights folded in
    sin_interior_analysis: Table,
    sin_closed_analysis: Table,
    cos_closed_analysis: Table,
}

impl Tables {
    fn new(n: usize, m: usize) -> Self {
        let theta = PI / (m + 1) as f64;
        let scale = 2.0 / (m + 1) as f64;
        let trap = |j: usize| if j == 0 || j == m + 1 { 0.5 } else { 1.0 };
        let sin = |k: usize, j: usize| ((k * j) as f64 * theta).sin();
        let cos = |k: usize, j: usize| ((k * j) as f64 * theta).cos();
        Tables {
            sin_interior: Table::from_fn(m, n, |j, k| sin(k + 1, j + 1)),
            sin_closed: Table::from_fn(m + 2, n, |j, k| sin(k + 1, j)),
            cos_closed: Table::from_fn(m + 2, n, |j, k| cos(k + 1, j)),
            sin_interior_analysis: Table::from_fn(n, m, |k, j| scale * sin(k + 1, j + 1)),
            sin_closed_analysis: Table::from_fn(n, m + 2, |k, j| scale * trap(j) * sin(k + 1, j)),
            cos_closed_analysis: Table::from_fn(n, m + 2, |k, j| scale * trap(j) * cos(k + 1, j)),
        }
    }
}

/// Applies `table` along `axis` of a row-major array with the given shape.
/// `table.cols` must equal `shape[axis]`; the result has `shape[axis] = table.rows`.
fn apply_axis(data: &[f64], shape: &mut [usize], axis: usize, table: &Table) -> Vec<f64> {
    debug_assert_eq!(shape[axis], table.cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (n_in, n_out) = (table.cols, table.rows);
    let mut out = vec![0.0; outer * n_out * inner];
    for o in 0..outer {
        let src = &data[o * n_in * inner..(o + 1) * n_in * inner];
        let dst = &mut out[o * n_out * inner..(o + 1) * n_out * inner];
        for r in 0..n_out {
            let row = &table.data[r * n_in..(r + 1) * n_in];
            let d = &mut dst[r * inner..(r + 1) * inner];
            for (c, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (di, si) in d.iter_mut().zip(s) {
                    *di += w * si;
                }
            }
        }
    }
    shape[axis] = n_out;
    out
}

/// Dirichlet sine eigenbasis with its collocation grids. Immutable after
/// construction; share it through `Arc`.
#[derive(Debug)]
pub struct Basis {
    dim: usize,
    modes: usize,
    lengths: Vec<f64>,
    grid_points: usize,
    eigenvalues: Vec<f64>,
    // k pi / L_a for k = 1..N, per axis
    wavenumbers: Vec<Vec<f64>>,
    tables: Tables,
}

impl Basis {
    /// Builds the basis for `dim` in {1, 2}, `modes` = N per axis, one
    /// length per axis and `grid_points` = M interior points per axis.
    pub fn new(dim: usize, modes: usize, lengths: &[f64], grid_points: usize) -> Result<Arc<Basis>> {
        const OP: &str = "build_basis";
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(OP, format!("dim must be 1 or 2, got {dim}")));
        }
        if modes == 0 {
            return Err(Error::invalid(OP, "N must be at least 1"));
        }
        if lengths.len() != dim {
            return Err(Error::invalid(
                OP,
                format!("expected {dim} lengths, got {}", lengths.len()),
            ));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(OP, format!("lengths must be positive, got {l}")));
        }
        let min_points = min_grid_points(modes);
        if grid_points < min_points {
            return Err(Error::invalid(
                OP,
                format!(
                    "M = {grid_points} < ceil(3N/2) = {min_points}: grid too coarse to dealias products"
                ),
            ));
        }
        let wavenumbers: Vec<Vec<f64>> = lengths
            .iter()
            .map(|&l| (1..=modes).map(|k| k as f64 * PI / l).collect())
            .collect();
        let eigenvalues = match dim {
            1 => wavenumbers[0].iter().map(|w| w * w).collect(),
            _ => {
                let mut ev = Vec::with_capacity(modes * modes);
                for w0 in &wavenumbers[0] {
                    for w1 in &wavenumbers[1] {
                        ev.push(w0 * w0 + w1 * w1);
                    }
                }
                ev
            }
        };
        Ok(Arc::new(Basis {
            dim,
            modes,
            lengths: lengths.to_vec(),
            grid_points,
            eigenvalues,
            wavenumbers,
            tables: Tables::new(modes, grid_points),
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// N, the number of modes per axis.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Total number of coefficients, `N^dim`.
    pub fn len(&self) -> usize {
        self.modes.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// M, interior grid points per axis.
    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// Eigenvalues of `-Δ`, indexed like the coefficients.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn first_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `prod_i L_i / 2`, the squared L² norm of every basis function.
    pub fn mass(&self) -> f64 {
        self.lengths.iter().map(|l| l / 2.0).product()
    }

    /// Grid spacing `L_a / (M + 1)` along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.grid_points + 1) as f64
    }

    pub fn axis_points(&self, layout: Layout) -> usize {
        match layout {
            Layout::Interior => self.grid_points,
            Layout::Closed => self.grid_points + 2,
        }
    }

    pub fn grid_len(&self, layout: Layout) -> usize {
        self.axis_points(layout).pow(self.dim as u32)
    }

    /// Coordinates of the grid points along `axis`.
    pub fn axis_coords(&self, axis: usize, layout: Layout) -> Vec<f64> {
        let h = self.spacing(axis);
        match layout {
            Layout::Interior => (1..=self.grid_points).map(|j| j as f64 * h).collect(),
            Layout::Closed => (0..self.grid_points + 2).map(|j| j as f64 * h).collect(),
        }
    }

    /// Quadrature weights for `layout`, row-major like grid values.
    pub fn quadrature_weights(&self, layout: Layout) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dim)
            .map(|a| {
                let h = self.spacing(a);
                let m = self.grid_points;
                match layout {
                    Layout::Interior => vec![h; m],
                    Layout::Closed => (0..m + 2)
                        .map(|j| if j == 0 || j == m + 1 { 0.5 * h } else { h })
                        .collect(),
                }
            })
            .collect();
        match self.dim {
            1 => per_axis[0].clone(),
            _ => {
                let mut w = Vec::with_capacity(per_axis[0].len() * per_axis[1].len());
                for a in &per_axis[0] {
                    for b in &per_axis[1] {
                        w.push(a * b);
                    }
                }
                w
            }
        }
    }

    /// Multi-index (1-based per axis) of flat coefficient index `idx`.
    pub fn mode_index(&self, idx: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![idx + 1],
            _ => vec![idx / self.modes + 1, idx % self.modes + 1],
        }
    }

    /// Flat coefficient index of the 1-based multi-index `k`.
    pub fn flat_index(&self, k: &[usize]) -> Result<usize> {
        if k.len() != self.dim || k.iter().any(|&ki| ki == 0 || ki > self.modes) {
            return Err(Error::invalid(
                "mode",
                format!("mode index {k:?} outside 1..={} per axis", self.modes),
            ));
        }
        Ok(match self.dim {
            1 => k[0] - 1,
            _ => (k[0] - 1) * self.modes + (k[1] - 1),
        })
    }

    fn shape(&self, per_axis: usize) -> Vec<usize> {
        vec![per_axis; self.dim]
    }

    fn check_field(&self, u: &Field, op: &'static str) -> Result<()> {
        if !self.same_as(&u.basis) {
            return Err(Error::BasisMismatch { op });
        }
        Ok(())
    }

    /// Two bases are interchangeable when every defining parameter agrees.
    pub fn same_as(&self, other: &Basis) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.modes == other.modes
                && self.grid_points == other.grid_points
                && self.lengths == other.lengths)
    }

    /// Sine series values on the interior grid.
    pub fn to_grid(&self, u: &Field) -> Grid {
        let mut shape = self.shape(self.modes);
        let mut data = u.coeffs.clone();
        for axis in 0..self.dim {
            data = apply_axis(&data, &mut shape, axis, &self.tables.sin_interior);
        }
        Grid::new(Layout::Interior, data)
    }

    /// Sine series values on the closed grid (zero on the boundary).
    pub fn to_closed_grid(&self, u: &Field) -> Grid {
        let mut shape = self.shape(self.modes);
        let mut data = u.coeffs.clone();
        for axis in 0..self.dim {
            data = apply_axis(&data, &mut shape, axis, &self.tables.sin_closed);
        }
        Grid::new(Layout::Closed, data)
    }

    /// Discrete sine transform of interior-grid values onto the retained modes.
    pub fn to_spectral(self: &Arc<Self>, values: &Grid) -> Result<Field> {
        const OP: &str = "to_spectral";
        let table = match values.layout {
            Layout::Interior => &self.tables.sin_interior_analysis,
            Layout::Closed => &self.tables.sin_closed_analysis,
        };
        let expected = self.grid_len(values.layout);
        if values.values.len() != expected {
            return Err(Error::SizeMismatch {
                op: OP,
                expected,
                got: values.values.len(),
            });
        }
        let mut shape = self.shape(self.axis_points(values.layout));
        let mut data = values.values.clone();
        for axis in 0..self.dim {
            data = apply_axis(&data, &mut shape, axis, table);
        }
        Ok(Field {
            basis: Arc::clone(self),
            coeffs: data,
        })
    }

    /// Partial derivatives of `u` on the closed grid, one grid per axis.
    /// Along the differentiated axis the series is the cosine companion.
    pub fn grad_to_grid(&self, u: &Field) -> Vec<Grid> {
        (0..self.dim)
            .map(|a| {
                let mut shape = self.shape(self.modes);
                let mut data = self.scale_axis(&u.coeffs, a);
                for axis in 0..self.dim {
                    let table = if axis == a {
                        &self.tables.cos_closed
                    } else {
                        &self.tables.sin_closed
                    };
                    data = apply_axis(&data, &mut shape, axis, table);
                }
                Grid::new(Layout::Closed, data)
            })
            .collect()
    }

    /// Divergence of a closed-grid vector field, projected onto the sine
    /// basis: each component is projected onto the cosine series along its
    /// own axis (the mean mode differentiates to zero and is dropped) and
    /// differentiated back.
    pub fn div_from_grid(self: &Arc<Self>, components: &[Grid]) -> Result<Field> {
        const OP: &str = "div_from_grid";
        if components.len() != self.dim {
            return Err(Error::SizeMismatch {
                op: OP,
                expected: self.dim,
                got: components.len(),
            });
        }
        let expected = self.grid_len(Layout::Closed);
        let mut total = vec![0.0; self.len()];
        for (a, comp) in components.iter().enumerate() {
            if comp.layout != Layout::Closed || comp.values.len() != expected {
                return Err(Error::SizeMismatch {
                    op: OP,
                    expected,
                    got: comp.values.len(),
                });
            }
            let mut shape = self.shape(self.grid_points + 2);
            let mut data = comp.values.clone();
            for axis in 0..self.dim {
                let table = if axis == a {
                    &self.tables.cos_closed_analysis
                } else {
                    &self.tables.sin_closed_analysis
                };
                data = apply_axis(&data, &mut shape, axis, table);
            }
            let d = self.scale_axis(&data, a);
            for (t, x) in total.iter_mut().zip(d) {
                *t -= x;
            }
        }
        Ok(Field {
            basis: Arc::clone(self),
            coeffs: total,
        })
    }

    // multiplies coefficient k by k_a pi / L_a along axis a
    fn scale_axis(&self, coeffs: &[f64], a: usize) -> Vec<f64> {
        let w = &self.wavenumbers[a];
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * w[self.mode_index(i)[a] - 1])
            .collect()
    }

    /// `sqrt(mass * sum_k lambda_k^s u_k^2)`; `s = 0` is L², `s = 1` is `||∇u||`.
    pub fn sobolev_norm(&self, u: &Field, s: f64) -> f64 {
        let sum: f64 = if s == 0.0 {
            u.coeffs.iter().map(|c| c * c).sum()
        } else {
            u.coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, l)| l.powf(s) * c * c)
                .sum()
        };
        (self.mass() * sum).sqrt()
    }

    /// `(-Δ)^s u`: coefficient `k` scaled by `lambda_k^s`.
    pub fn laplacian_pow(&self, u: &Field, s: f64) -> Field {
        if s == 0.0 {
            return u.clone();
        }
        let coeffs = u
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| c * l.powf(s))
            .collect();
        Field {
            basis: Arc::clone(&u.basis),
            coeffs,
        }
    }

    /// `Δu`.
    pub fn laplacian(&self, u: &Field) -> Field {
        let coeffs = u
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| -c * l)
            .collect();
        Field {
            basis: Arc::clone(&u.basis),
            coeffs,
        }
    }

    /// L² inner product `mass * sum_k u_k w_k`.
    pub fn inner(&self, u: &Field, w: &Field) -> Result<f64> {
        self.check_field(u, "inner")?;
        self.check_field(w, "inner")?;
        Ok(self.mass() * dot(&u.coeffs, &w.coeffs))
    }

    /// Quadrature integral of grid values.
    pub fn integrate(&self, values: &Grid) -> Result<f64> {
        let w = self.weights_for(values, "integrate")?;
        Ok(values.values.iter().zip(&w).map(|(f, w)| f * w).sum())
    }

    /// `(sum_j w_j |f_j|^r)^(1/r)` on the grid's own quadrature.
    pub fn lp_norm(&self, values: &Grid, r: f64) -> Result<f64> {
        const OP: &str = "lp_norm";
        if !(r >= 1.0) {
            return Err(Error::invalid(OP, format!("exponent r = {r} must be >= 1")));
        }
        let w = self.weights_for(values, OP)?;
        let s: f64 = values
            .values
            .iter()
            .zip(&w)
            .map(|(f, w)| w * f.abs().powf(r))
            .sum();
        Ok(s.powf(1.0 / r))
    }

    /// L^r norm of the pointwise Euclidean magnitude of a vector field.
    pub fn lp_norm_vector(&self, components: &[Grid], r: f64) -> Result<f64> {
        let mag = magnitude(components)?;
        self.lp_norm(&mag, r)
    }

    fn weights_for(&self, values: &Grid, op: &'static str) -> Result<Vec<f64>> {
        let expected = self.grid_len(values.layout);
        if values.values.len() != expected {
            return Err(Error::SizeMismatch {
                op,
                expected,
                got: values.values.len(),
            });
        }
        Ok(self.quadrature_weights(values.layout))
    }
}

/// Pointwise Euclidean magnitude of a vector of grids sharing one layout.
pub fn magnitude(components: &[Grid]) -> Result<Grid> {
    let first = components.first().ok_or(Error::SizeMismatch {
        op: "magnitude",
        expected: 1,
        got: 0,
    })?;
    let n = first.values.len();
    if components
        .iter()
        .any(|c| c.values.len() != n || c.layout != first.layout)
    {
        return Err(Error::SizeMismatch {
            op: "magnitude",
            expected: n,
            got: components.iter().map(|c| c.values.len()).max().unwrap_or(0),
        });
    }
    if components.len() == 1 {
        return Ok(first.map(f64::abs));
    }
    let values = (0..n)
        .map(|j| {
            components
                .iter()
                .map(|c| c.values[j] * c.values[j])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Grid::new(first.layout, values))
}

/// Smallest admissible M for N modes: `ceil(3N/2)`.
pub fn min_grid_points(modes: usize) -> usize {
    (3 * modes).div_ceil(2)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral coefficients of one scalar function on a shared [`Basis`].
#[derive(Debug, Clone)]
pub struct Field {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(basis: &Arc<Basis>) -> Field {
        Field {
            basis: Arc::clone(basis),
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Field> {
        if coeffs.len() != basis.len() {
            return Err(Error::SizeMismatch {
                op: "field",
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Field {
            basis: Arc::clone(basis),
            coeffs,
        })
    }

    /// `amplitude * e_k` for the 1-based multi-index `k`.
    pub fn mode(basis: &Arc<Basis>, k: &[usize], amplitude: f64) -> Result<Field> {
        let idx = basis.flat_index(k)?;
        let mut f = Field::zeros(basis);
        f.coeffs[idx] = amplitude;
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn shares_basis(&self, other: &Field) -> bool {
        self.basis.same_as(&other.basis)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.basis.sobolev_norm(self, 0.0)
    }

    pub fn norm(&self, s: f64) -> f64 {
        self.basis.sobolev_norm(self, s)
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        debug_assert!(self.shares_basis(x));
        for (s, xi) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += a * xi;
        }
    }

    /// `(self + other) / 2`.
    pub fn midpoint(&self, other: &Field) -> Field {
        debug_assert!(self.shares_basis(other));
        Field {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        }
    }

    pub(crate) fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert!(self.shares_basis(other), "fields do not share one basis");
        Field {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, a: f64) -> Field {
        self.scaled(a)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(-1.0)
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Field> for Field {
    fn sub_assign(&mut self, rhs: &Field) {
        self.axpy(-1.0, rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis1(n: usize, l: f64, m: usize) -> Arc<Basis> {
        Basis::new(1, n, &[l], m).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        let b = basis1(4, PI, 6);
        for (l, e) in b.eigenvalues().iter().zip([1.0, 4.0, 9.0, 16.0]) {
            assert!(close(*l, e, 1e-14));
        }
        let b = basis1(4, 2.0 * PI, 6);
        for (l, e) in b.eigenvalues().iter().zip([0.25, 1.0, 2.25, 4.0]) {
            assert!(close(*l, e, 1e-14));
        }
        let b = Basis::new(2, 2, &[PI, PI], 3).unwrap();
        for (l, e) in b.eigenvalues().iter().zip([2.0, 5.0, 5.0, 8.0]) {
            assert!(close(*l, e, 1e-14));
        }
    }

    #[test]
    fn rejects_coarse_grid_and_bad_dim() {
        assert!(matches!(
            Basis::new(1, 4, &[PI], 5),
            Err(Error::InvalidParameter { op: "build_basis", .. })
        ));
        assert!(Basis::new(1, 4, &[PI], 6).is_ok());
        assert!(Basis::new(3, 4, &[PI, PI, PI], 6).is_err());
        assert!(Basis::new(1, 0, &[PI], 6).is_err());
        assert!(Basis::new(1, 4, &[-1.0], 6).is_err());
        assert_eq!(min_grid_points(5), 8);
    }

    #[test]
    fn first_mode_grid_values_are_sines() {
        let b = basis1(8, PI, 12);
        let u = Field::mode(&b, &[1], 1.0).unwrap();
        let g = b.to_grid(&u);
        for (x, v) in b.axis_coords(0, Layout::Interior).iter().zip(&g.values) {
            assert!((x.sin() - v).abs() < 1e-15);
        }
    }

    #[test]
    fn transform_matches_naive_sine_sum() {
        let n = 12;
        let b = basis1(n, 2.5, 2 * n);
        let coeffs: Vec<f64> = (0..n).map(|k| ((k * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let u = Field::from_coeffs(&b, coeffs.clone()).unwrap();
        let g = b.to_grid(&u);
        for (x, v) in b.axis_coords(0, Layout::Interior).iter().zip(&g.values) {
            let naive: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * PI * x / 2.5).sin())
                .sum();
            assert!((naive - v).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_2d() {
        let b = Basis::new(2, 5, &[1.0, 2.0], 8).unwrap();
        let coeffs: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let u = Field::from_coeffs(&b, coeffs.clone()).unwrap();
        let back = b.to_spectral(&b.to_grid(&u)).unwrap();
        for (a, c) in back.coeffs().iter().zip(&coeffs) {
            assert!((a - c).abs() < 1e-13);
        }
        let closed = b.to_spectral(&b.to_closed_grid(&u)).unwrap();
        for (a, c) in closed.coeffs().iter().zip(&coeffs) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn to_spectral_size_mismatch() {
        let b = basis1(4, PI, 6);
        let bad = Grid::new(Layout::Interior, vec![0.0; 5]);
        assert!(matches!(b.to_spectral(&bad), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn sobolev_examples() {
        let b = basis1(4, PI, 6);
        let e1 = Field::mode(&b, &[1], 1.0).unwrap();
        let e2 = Field::mode(&b, &[2], 1.0).unwrap();
        assert!(close(b.sobolev_norm(&e1, 1.0), (PI / 2.0).sqrt(), 1e-15));
        assert!(close(b.sobolev_norm(&e1, -3.0), (PI / 2.0).sqrt(), 1e-15));
        assert!(close(b.sobolev_norm(&e2, -1.0), (PI / 8.0).sqrt(), 1e-15));
    }

    #[test]
    fn laplacian_pow_examples() {
        let b = basis1(4, PI, 6);
        let e1 = Field::mode(&b, &[1], 1.0).unwrap();
        assert_eq!(b.laplacian_pow(&e1, 1.0).coeffs()[0], 1.0);
        let u = Field::mode(&b, &[2], 3.0).unwrap();
        assert!(close(b.laplacian_pow(&u, 0.5).coeffs()[1], 6.0, 1e-15));
        let w = Field::from_coeffs(&b, vec![0.3, -1.0, 2.0, 0.1]).unwrap();
        assert_eq!(b.laplacian_pow(&w, 0.0).coeffs(), w.coeffs());
    }

    #[test]
    fn gradient_and_divergence_examples() {
        let b = basis1(6, PI, 9);
        let e1 = Field::mode(&b, &[1], 1.0).unwrap();
        let g = b.grad_to_grid(&e1);
        for (x, v) in b.axis_coords(0, Layout::Closed).iter().zip(&g[0].values) {
            assert!((x.cos() - v).abs() < 1e-14);
        }
        let cosx = Grid::new(
            Layout::Closed,
            b.axis_coords(0, Layout::Closed).iter().map(|x| x.cos()).collect(),
        );
        let d = b.div_from_grid(&[cosx]).unwrap();
        assert!((d.coeffs()[0] + 1.0).abs() < 1e-13);
        assert!(d.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));

        let e2 = Field::mode(&b, &[2], 1.0).unwrap();
        let lap = b.div_from_grid(&b.grad_to_grid(&e2)).unwrap();
        assert!((lap.coeffs()[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn div_grad_is_laplacian_2d() {
        let b = Basis::new(2, 6, &[PI, 1.7], 9).unwrap();
        let coeffs: Vec<f64> = (0..36).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let u = Field::from_coeffs(&b, coeffs).unwrap();
        let lhs = b.div_from_grid(&b.grad_to_grid(&u)).unwrap();
        let rhs = b.laplacian(&u);
        for (a, c) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            assert!((a - c).abs() < 1e-10 * (1.0 + c.abs()), "{a} vs {c}");
        }
    }

    #[test]
    fn lp_norm_examples() {
        let b = basis1(4, PI, 512);
        let ones = Grid::new(Layout::Interior, vec![1.0; 512]);
        // interior rectangle rule misses one cell of width pi / 513
        assert!((b.lp_norm(&ones, 2.0).unwrap() / PI.sqrt() - 1.0).abs() <= 1e-3);
        let b = basis1(4, PI, 64);
        let s = b.to_grid(&Field::mode(&b, &[1], 1.0).unwrap());
        // ∫ sin^4 over (0, pi) = 3 pi / 8
        let expected = (3.0 * PI / 8.0).powf(0.25);
        assert!(close(b.lp_norm(&s, 4.0).unwrap(), expected, 1e-12));
        assert!(b.lp_norm(&s, 0.5).is_err());
    }

    #[test]
    fn inner_orthogonality_and_mismatch() {
        let b = basis1(4, PI, 6);
        let e1 = Field::mode(&b, &[1], 1.0).unwrap();
        let e2 = Field::mode(&b, &[2], 1.0).unwrap();
        assert_eq!(b.inner(&e1, &e2).unwrap(), 0.0);
        assert!(close(b.inner(&e1, &e1).unwrap(), PI / 2.0, 1e-15));
        let other = basis1(4, 2.0, 6);
        let f = Field::zeros(&other);
        assert!(matches!(b.inner(&e1, &f), Err(Error::BasisMismatch { .. })));
    }
}
