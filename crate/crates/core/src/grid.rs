//! Uniform simplicial grids on axis-aligned boxes in one and two
//! dimensions, with P1 nodal fields.
//!
//! 1D boxes are split into equal segments; 2D boxes into a uniform
//! rectangle grid where every cell is cut along the same diagonal
//! (lower-left to upper-right), so the triangulation is deterministic
//! and non-obtuse. Nodes are ordered lexicographically by coordinate
//! (`x` major, then `y`), and all per-simplex data (volumes, P1 basis
//! gradients, lumped node weights) is precomputed at build time.

use std::sync::Arc;

use thiserror::Error;

use crate::norm::{FinslerNorm, NormError};
use crate::quadrature;

/// Errors from grid construction and field handling.
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    DimensionUnsupported(usize),
    #[error("resolution must be at least 2 per axis, got {0}")]
    InvalidResolution(usize),
    #[error("box extents must be finite with positive length, got [{0}, {1}]")]
    InvalidExtents(f64, f64),
    #[error("field has {got} values but the grid has {expected} nodes")]
    FieldLength { expected: usize, got: usize },
    #[error("field contains a non-finite value")]
    NonFiniteValue,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("norm acts on R^{norm_dim} but the grid is {grid_dim}-dimensional")]
    NormDimension { norm_dim: usize, grid_dim: usize },
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// A uniform simplicial grid on an axis-aligned box.
#[derive(Debug)]
pub struct Grid {
    dim: usize,
    extents: [(f64, f64); 2],
    res: [usize; 2],
    node_count: usize,
    simplex_count: usize,
    /// Node coordinates, flat with stride `dim`, in node order.
    coords: Vec<f64>,
    /// Simplex vertex indices, flat with stride `dim + 1`.
    simplex_nodes: Vec<usize>,
    /// Simplex volumes (lengths in 1D, areas in 2D).
    volumes: Vec<f64>,
    /// P1 basis gradients per simplex, stride `(dim + 1) * dim`.
    grad_basis: Vec<f64>,
    /// Lumped node weights: `Σ_{T ∋ i} vol(T) / (dim + 1)`.
    lump: Vec<f64>,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    /// Node index -> position in `interior`, `usize::MAX` on the boundary.
    interior_index: Vec<usize>,
}

impl Grid {
    /// Build a grid over the box with the given per-axis extents and
    /// segment counts. `extents.len()` fixes the dimension (1 or 2).
    pub fn build(extents: &[(f64, f64)], res: &[usize]) -> Result<Arc<Self>, GridError> {
        let dim = extents.len();
        if dim == 0 || dim > 2 || res.len() != dim {
            return Err(GridError::DimensionUnsupported(if dim == 0 { 0 } else { dim.max(res.len()) }));
        }
        for &(a, b) in extents {
            if !a.is_finite() || !b.is_finite() || b <= a {
                return Err(GridError::InvalidExtents(a, b));
            }
        }
        for &r in res {
            if r < 2 {
                return Err(GridError::InvalidResolution(r));
            }
        }
        Ok(Arc::new(match dim {
            1 => Self::build_1d(extents[0], res[0]),
            _ => Self::build_2d(extents[0], extents[1], res[0], res[1]),
        }))
    }

    /// Convenience wrapper for the 1D case.
    pub fn segment(extent: (f64, f64), res: usize) -> Result<Arc<Self>, GridError> {
        Self::build(&[extent], &[res])
    }

    /// Convenience wrapper for the 2D case.
    pub fn rectangle(
        ext_x: (f64, f64),
        ext_y: (f64, f64),
        res: (usize, usize),
    ) -> Result<Arc<Self>, GridError> {
        Self::build(&[ext_x, ext_y], &[res.0, res.1])
    }

    fn build_1d(extent: (f64, f64), n: usize) -> Self {
        let (x0, x1) = extent;
        let h = (x1 - x0) / n as f64;
        let node_count = n + 1;
        let mut coords = Vec::with_capacity(node_count);
        for i in 0..=n {
            coords.push(x0 + i as f64 * h);
        }
        let mut simplex_nodes = Vec::with_capacity(2 * n);
        let mut volumes = Vec::with_capacity(n);
        let mut grad_basis = Vec::with_capacity(2 * n);
        for i in 0..n {
            simplex_nodes.extend_from_slice(&[i, i + 1]);
            volumes.push(h);
            grad_basis.extend_from_slice(&[-1.0 / h, 1.0 / h]);
        }
        let mut lump = vec![0.0; node_count];
        for t in 0..n {
            lump[t] += h / 2.0;
            lump[t + 1] += h / 2.0;
        }
        let boundary: Vec<bool> = (0..node_count).map(|i| i == 0 || i == n).collect();
        let (interior, interior_index) = interior_maps(&boundary);
        Self {
            dim: 1,
            extents: [extent, (0.0, 0.0)],
            res: [n, 0],
            node_count,
            simplex_count: n,
            coords,
            simplex_nodes,
            volumes,
            grad_basis,
            lump,
            boundary,
            interior,
            interior_index,
        }
    }

    fn build_2d(ext_x: (f64, f64), ext_y: (f64, f64), nx: usize, ny: usize) -> Self {
        let (x0, x1) = ext_x;
        let (y0, y1) = ext_y;
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let node_count = (nx + 1) * (ny + 1);
        let idx = |ix: usize, iy: usize| ix * (ny + 1) + iy;
        let mut coords = Vec::with_capacity(2 * node_count);
        for ix in 0..=nx {
            for iy in 0..=ny {
                coords.push(x0 + ix as f64 * hx);
                coords.push(y0 + iy as f64 * hy);
            }
        }
        let tri_count = 2 * nx * ny;
        let mut simplex_nodes = Vec::with_capacity(3 * tri_count);
        let mut volumes = Vec::with_capacity(tri_count);
        let mut grad_basis = Vec::with_capacity(6 * tri_count);
        let area = hx * hy / 2.0;
        // Each cell is split along the (v00, v11) diagonal.
        for ix in 0..nx {
            for iy in 0..ny {
                let v00 = idx(ix, iy);
                let v10 = idx(ix + 1, iy);
                let v01 = idx(ix, iy + 1);
                let v11 = idx(ix + 1, iy + 1);
                for tri in [[v00, v10, v11], [v00, v11, v01]] {
                    simplex_nodes.extend_from_slice(&tri);
                    volumes.push(area);
                    // P1 basis gradients from the edge matrix inverse.
                    let ax = coords[2 * tri[0]];
                    let ay = coords[2 * tri[0] + 1];
                    let bx = coords[2 * tri[1]];
                    let by = coords[2 * tri[1] + 1];
                    let cx = coords[2 * tri[2]];
                    let cy = coords[2 * tri[2] + 1];
                    let (e1x, e1y) = (bx - ax, by - ay);
                    let (e2x, e2y) = (cx - ax, cy - ay);
                    let det = e1x * e2y - e1y * e2x;
                    // ∇λ_b = M^{-T} e₁, ∇λ_c = M^{-T} e₂, ∇λ_a = -∇λ_b - ∇λ_c.
                    let gb = [e2y / det, -e2x / det];
                    let gc = [-e1y / det, e1x / det];
                    let ga = [-gb[0] - gc[0], -gb[1] - gc[1]];
                    grad_basis.extend_from_slice(&[ga[0], ga[1], gb[0], gb[1], gc[0], gc[1]]);
                }
            }
        }
        let mut lump = vec![0.0; node_count];
        for t in 0..tri_count {
            for k in 0..3 {
                lump[simplex_nodes[3 * t + k]] += volumes[t] / 3.0;
            }
        }
        let boundary: Vec<bool> = (0..node_count)
            .map(|i| {
                let ix = i / (ny + 1);
                let iy = i % (ny + 1);
                ix == 0 || ix == nx || iy == 0 || iy == ny
            })
            .collect();
        let (interior, interior_index) = interior_maps(&boundary);
        Self {
            dim: 2,
            extents: [ext_x, ext_y],
            res: [nx, ny],
            node_count,
            simplex_count: tri_count,
            coords,
            simplex_nodes,
            volumes,
            grad_basis,
            lump,
            boundary,
            interior,
            interior_index,
        }
    }

    /// Spatial dimension (1 or 2).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis extents; the second entry is unused in 1D.
    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents[..self.dim]
    }

    /// Per-axis segment counts.
    pub fn resolution(&self) -> &[usize] {
        &self.res[..self.dim]
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of simplices (segments or triangles).
    pub fn simplex_count(&self) -> usize {
        self.simplex_count
    }

    /// Coordinates of node `i` (length = `dim`).
    pub fn node_coord(&self, i: usize) -> &[f64] {
        &self.coords[self.dim * i..self.dim * (i + 1)]
    }

    /// Vertex indices of simplex `t` (length = `dim + 1`).
    pub fn simplex(&self, t: usize) -> &[usize] {
        &self.simplex_nodes[(self.dim + 1) * t..(self.dim + 1) * (t + 1)]
    }

    /// Volume of simplex `t`.
    pub fn volume(&self, t: usize) -> f64 {
        self.volumes[t]
    }

    /// Total measure of the box.
    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Lumped quadrature weight of node `i`.
    pub fn lump(&self, i: usize) -> f64 {
        self.lump[i]
    }

    /// Whether node `i` lies on the box boundary.
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Euclidean distance from node `i` to the box boundary.
    pub fn boundary_distance(&self, i: usize) -> f64 {
        let c = self.node_coord(i);
        let mut d = f64::INFINITY;
        for (axis, &(a, b)) in self.extents().iter().enumerate() {
            d = d.min(c[axis] - a).min(b - c[axis]);
        }
        d
    }

    /// Interior (non-boundary) node indices, ascending.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Position of node `i` among the interior nodes, if interior.
    pub fn interior_position(&self, i: usize) -> Option<usize> {
        let p = self.interior_index[i];
        (p != usize::MAX).then_some(p)
    }

    /// Structural equality: same dimension, extents, and resolution.
    /// Fields built on structurally equal grids are interoperable.
    pub fn same_mesh(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.extents == other.extents && self.res == other.res
    }

    /// Gradient of the P1 interpolant of `values` on simplex `t`,
    /// written into `out[..dim]`.
    pub fn simplex_gradient(&self, t: usize, values: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let verts = self.simplex(t);
        let basis = &self.grad_basis[(d + 1) * d * t..(d + 1) * d * (t + 1)];
        for c in 0..d {
            out[c] = 0.0;
        }
        for (k, &v) in verts.iter().enumerate() {
            let u = values[v];
            for c in 0..d {
                out[c] += u * basis[k * d + c];
            }
        }
    }

    /// Basis gradient block of simplex `t`: `(dim + 1)` rows of `dim`
    /// components.
    pub(crate) fn basis_gradients(&self, t: usize) -> &[f64] {
        let d = self.dim;
        &self.grad_basis[(d + 1) * d * t..(d + 1) * d * (t + 1)]
    }

    fn check_field(&self, u: &ScalarField) -> Result<(), GridError> {
        if !self.same_mesh(u.grid()) {
            return Err(GridError::GridMismatch);
        }
        Ok(())
    }

    /// Lumped (nodal) integral `Σ_i lump(i) u_i`.
    pub fn integrate_nodal(&self, u: &ScalarField) -> Result<f64, GridError> {
        self.check_field(u)?;
        Ok(self.lump.iter().zip(u.values()).map(|(w, v)| w * v).sum())
    }

    /// Integral of `|u_h|^p` of the P1 interpolant by per-simplex
    /// quadrature (exact for `p = 2`, degree-5 accurate otherwise).
    pub fn integrate_abs_pow(&self, u: &ScalarField, p: f64) -> Result<f64, GridError> {
        self.check_field(u)?;
        let vals = u.values();
        let mut acc = 0.0;
        match self.dim {
            1 => {
                for t in 0..self.simplex_count {
                    let verts = self.simplex(t);
                    let (a, b) = (vals[verts[0]], vals[verts[1]]);
                    let mut local = 0.0;
                    for (s, w) in quadrature::SEGMENT_RULE {
                        local += w * (a + (b - a) * s).abs().powf(p);
                    }
                    acc += self.volumes[t] * local;
                }
            }
            _ => {
                let rule = quadrature::triangle_rule();
                for t in 0..self.simplex_count {
                    let verts = self.simplex(t);
                    let (a, b, c) = (vals[verts[0]], vals[verts[1]], vals[verts[2]]);
                    let mut local = 0.0;
                    for (lam, w) in rule {
                        local += w * (lam[0] * a + lam[1] * b + lam[2] * c).abs().powf(p);
                    }
                    acc += self.volumes[t] * local;
                }
            }
        }
        Ok(acc)
    }

    /// Value of `∫ |u_h|^p` on raw nodal data and, when `grad` is given,
    /// its exact nodal gradient `p ∫ |u_h|^{p-2} u_h λ_i` accumulated by
    /// the same quadrature rule (boundary entries included; callers pin
    /// them as needed).
    pub(crate) fn abs_pow_value_grad(
        &self,
        vals: &[f64],
        p: f64,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut acc = 0.0;
        match self.dim {
            1 => {
                for t in 0..self.simplex_count {
                    let verts = self.simplex(t);
                    let (a, b) = (vals[verts[0]], vals[verts[1]]);
                    let vol = self.volumes[t];
                    for (s, w) in quadrature::SEGMENT_RULE {
                        let v = a + (b - a) * s;
                        let av = v.abs();
                        acc += vol * w * av.powf(p);
                        if let Some(g) = grad.as_deref_mut() {
                            if av > 0.0 {
                                let dv = vol * w * p * av.powf(p - 1.0) * v.signum();
                                g[verts[0]] += dv * (1.0 - s);
                                g[verts[1]] += dv * s;
                            }
                        }
                    }
                }
            }
            _ => {
                let rule = quadrature::triangle_rule();
                for t in 0..self.simplex_count {
                    let verts = self.simplex(t);
                    let (a, b, c) = (vals[verts[0]], vals[verts[1]], vals[verts[2]]);
                    let vol = self.volumes[t];
                    for (lam, w) in rule {
                        let v = lam[0] * a + lam[1] * b + lam[2] * c;
                        let av = v.abs();
                        acc += vol * w * av.powf(p);
                        if let Some(g) = grad.as_deref_mut() {
                            if av > 0.0 {
                                let dv = vol * w * p * av.powf(p - 1.0) * v.signum();
                                for (k, &vert) in verts.iter().enumerate() {
                                    g[vert] += dv * lam[k];
                                }
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    /// Per-simplex gradients of the interpolant, flat with stride `dim`.
    pub fn gradient_field(&self, u: &ScalarField) -> Result<Vec<f64>, GridError> {
        self.check_field(u)?;
        let d = self.dim;
        let mut out = vec![0.0; d * self.simplex_count];
        for t in 0..self.simplex_count {
            let slice = &mut out[d * t..d * (t + 1)];
            self.simplex_gradient(t, u.values(), slice);
        }
        Ok(out)
    }

    /// The grid seminorm `(Σ_T vol(T) H(∇u|_T)^p)^{1/p}`.
    pub fn seminorm_x(&self, norm: &FinslerNorm, p: f64, u: &ScalarField) -> Result<f64, GridError> {
        self.check_field(u)?;
        if norm.dim() != self.dim {
            return Err(GridError::NormDimension { norm_dim: norm.dim(), grid_dim: self.dim });
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(GridError::Norm(NormError::InvalidExponent(p)));
        }
        let mut acc = 0.0;
        let mut g = [0.0f64; 2];
        for t in 0..self.simplex_count {
            self.simplex_gradient(t, u.values(), &mut g[..self.dim]);
            let h = norm.eval_unchecked(&g[..self.dim]);
            acc += self.volumes[t] * h.powf(p);
        }
        Ok(acc.powf(1.0 / p))
    }
}

fn interior_maps(boundary: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut interior = Vec::new();
    let mut interior_index = vec![usize::MAX; boundary.len()];
    for (i, &b) in boundary.iter().enumerate() {
        if !b {
            interior_index[i] = interior.len();
            interior.push(i);
        }
    }
    (interior, interior_index)
}

/// A nodal (P1) scalar field tied to a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wrap nodal values; the length must match the grid and every value
    /// must be finite.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::FieldLength { expected: grid.node_count(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteValue);
        }
        Ok(Self { grid, values })
    }

    /// The zero field.
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Self { grid, values: vec![0.0; n] }
    }

    /// The constant field `c` at every node.
    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self, GridError> {
        if !c.is_finite() {
            return Err(GridError::NonFiniteValue);
        }
        let n = grid.node_count();
        Ok(Self { grid, values: vec![c; n] })
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let values: Vec<f64> = (0..grid.node_count()).map(|i| f(grid.node_coord(i))).collect();
        Self::new(grid, values)
    }

    /// The owning grid.
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Nodal values in node order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable nodal values; callers keep them finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Force exact zeros on boundary nodes.
    pub fn zero_boundary(&mut self) {
        for i in 0..self.values.len() {
            if self.grid.is_boundary(i) {
                self.values[i] = 0.0;
            }
        }
    }

    /// Whether every boundary node carries exactly 0.
    pub fn is_zero_on_boundary(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, v)| !self.grid.is_boundary(i) || *v == 0.0)
    }

    /// Minimum nodal value.
    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, v| a.min(*v))
    }

    /// Maximum nodal value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v))
    }

    /// Maximum absolute nodal value.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `max_i |u_i - v_i|` for fields on the same mesh.
    pub fn linf_diff(&self, other: &ScalarField) -> Result<f64, GridError> {
        if !self.grid.same_mesh(other.grid()) {
            return Err(GridError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(other.values())
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs())))
    }

    /// Minimum over nodes at boundary distance at least `margin`;
    /// `None` when no node is that deep.
    pub fn interior_lower_bound(&self, margin: f64) -> Option<f64> {
        let mut min = f64::INFINITY;
        let mut seen = false;
        for i in 0..self.values.len() {
            if self.grid.boundary_distance(i) >= margin {
                min = min.min(self.values[i]);
                seen = true;
            }
        }
        seen.then_some(min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::FinslerNorm;
    use proptest::prelude::*;

    #[test]
    fn segment_grid_counts_and_volumes() {
        let g = Grid::segment((0.0, 1.0), 4).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.simplex_count(), 4);
        for t in 0..4 {
            assert!((g.volume(t) - 0.25).abs() < 1e-15, "segment volume");
        }
        assert!((g.total_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rectangle_grid_counts_and_volumes() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (2, 2)).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.simplex_count(), 8);
        for t in 0..8 {
            assert!((g.volume(t) - 0.125).abs() < 1e-15, "triangle area");
        }
        assert!((g.total_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn node_order_is_lexicographic() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 2.0), (2, 2)).unwrap();
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..g.node_count() {
            let c = g.node_coord(i);
            let cur = (c[0], c[1]);
            assert!(cur > prev, "nodes sorted by (x, y): {cur:?} after {prev:?}");
            prev = cur;
        }
    }

    #[test]
    fn invalid_builds_error() {
        assert_eq!(
            Grid::segment((0.0, 1.0), 1).unwrap_err(),
            GridError::InvalidResolution(1)
        );
        assert!(matches!(
            Grid::segment((1.0, 1.0), 4).unwrap_err(),
            GridError::InvalidExtents(_, _)
        ));
        assert!(matches!(
            Grid::segment((0.0, f64::NAN), 4).unwrap_err(),
            GridError::InvalidExtents(_, _)
        ));
        assert!(matches!(
            Grid::build(&[(0.0, 1.0); 3], &[2, 2, 2]).unwrap_err(),
            GridError::DimensionUnsupported(3)
        ));
    }

    #[test]
    fn affine_functions_have_exact_gradients() {
        let g = Grid::rectangle((0.0, 2.0), (-1.0, 1.0), (3, 4)).unwrap();
        let u = ScalarField::from_fn(g.clone(), |c| 0.7 + 1.3 * c[0] - 0.4 * c[1]).unwrap();
        let grads = g.gradient_field(&u).unwrap();
        for t in 0..g.simplex_count() {
            assert!(
                (grads[2 * t] - 1.3).abs() < 1e-12 && (grads[2 * t + 1] + 0.4).abs() < 1e-12,
                "P1 gradient reproduces affine data on simplex {t}"
            );
        }
    }

    #[test]
    fn lump_weights_partition_volume() {
        for g in [
            Grid::segment((0.0, 1.0), 7).unwrap(),
            Grid::rectangle((0.0, 3.0), (0.0, 1.0), (5, 4)).unwrap(),
        ] {
            let total: f64 = (0..g.node_count()).map(|i| g.lump(i)).sum();
            assert!(
                (total - g.total_volume()).abs() < 1e-12,
                "lumped weights sum to the box measure"
            );
        }
    }

    #[test]
    fn nodal_integral_examples() {
        let g = Grid::segment((0.0, 1.0), 4).unwrap();
        let ones = ScalarField::constant(g.clone(), 1.0).unwrap();
        assert!((g.integrate_nodal(&ones).unwrap() - 1.0).abs() < 1e-15);
        // Indicator of one interior node integrates to its lumped weight.
        let mut ind = ScalarField::zeros(g.clone());
        ind.values_mut()[2] = 1.0;
        assert!(
            (g.integrate_nodal(&ind).unwrap() - 0.25).abs() < 1e-15,
            "interior hat carries weight h"
        );
    }

    #[test]
    fn seminorm_of_single_hat() {
        let g = Grid::segment((0.0, 1.0), 2).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        for a in [0.3, -1.7, 2.0] {
            let u = ScalarField::new(g.clone(), vec![0.0, a, 0.0]).unwrap();
            let s = g.seminorm_x(&norm, 2.0, &u).unwrap();
            assert!(
                (s - 2.0 * a.abs()).abs() < 1e-12,
                "hat seminorm 2|a|: got {s} for a={a}"
            );
        }
    }

    #[test]
    fn seminorm_matches_assembled_stiffness_oracle() {
        // Independent oracle: assemble the dense P1 stiffness matrix from
        // node coordinates alone and compare u^T K u with seminorm².
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (8, 8)).unwrap();
        let norm = FinslerNorm::euclidean(2).unwrap();
        let n = g.node_count();
        let mut k = vec![vec![0.0f64; n]; n];
        for t in 0..g.simplex_count() {
            let verts: Vec<usize> = g.simplex(t).to_vec();
            let a = g.node_coord(verts[0]).to_vec();
            let b = g.node_coord(verts[1]).to_vec();
            let c = g.node_coord(verts[2]).to_vec();
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let area = det.abs() / 2.0;
            // Barycentric gradients, assembled from scratch.
            let grads = [
                [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
            ];
            for i in 0..3 {
                for j in 0..3 {
                    k[verts[i]][verts[j]] +=
                        area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..5 {
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = ScalarField::new(g.clone(), vals.clone()).unwrap();
            let quad: f64 = (0..n)
                .map(|i| (0..n).map(|j| vals[i] * k[i][j] * vals[j]).sum::<f64>())
                .sum();
            let s = g.seminorm_x(&norm, 2.0, &u).unwrap();
            assert!(
                (s * s - quad).abs() < 1e-9 * (1.0 + quad.abs()),
                "seminorm² {} vs assembled quadratic form {quad}",
                s * s
            );
        }
    }

    #[test]
    fn mass_quadrature_exact_for_quadratics() {
        let g1 = Grid::segment((0.0, 1.0), 8).unwrap();
        let u = ScalarField::from_fn(g1.clone(), |c| c[0]).unwrap();
        // Interpolant of x is x itself: ∫ x² = 1/3.
        assert!((g1.integrate_abs_pow(&u, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let g2 = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (3, 5)).unwrap();
        let v = ScalarField::from_fn(g2.clone(), |c| c[0] + c[1]).unwrap();
        // ∫ (x+y)² over the unit square = 7/6.
        assert!((g2.integrate_abs_pow(&v, 2.0).unwrap() - 7.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_classification_and_distance() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4)).unwrap();
        let boundary_count = (0..g.node_count()).filter(|&i| g.is_boundary(i)).count();
        assert_eq!(boundary_count, 16, "ring of boundary nodes on a 4x4 grid");
        assert_eq!(g.interior_nodes().len(), 9);
        for &i in g.interior_nodes() {
            assert!(g.boundary_distance(i) >= 0.25 - 1e-15);
        }
    }

    #[test]
    fn field_validation_errors() {
        let g = Grid::segment((0.0, 1.0), 4).unwrap();
        assert_eq!(
            ScalarField::new(g.clone(), vec![0.0; 4]).unwrap_err(),
            GridError::FieldLength { expected: 5, got: 4 }
        );
        assert_eq!(
            ScalarField::new(g.clone(), vec![f64::NAN; 5]).unwrap_err(),
            GridError::NonFiniteValue
        );
        let other = Grid::segment((0.0, 1.0), 5).unwrap();
        let u = ScalarField::zeros(g.clone());
        let v = ScalarField::zeros(other);
        assert_eq!(u.linf_diff(&v).unwrap_err(), GridError::GridMismatch);
    }

    #[test]
    fn seminorm_refinement_is_cauchy_with_second_order_reduction() {
        let norm = FinslerNorm::euclidean(2).unwrap();
        let semi = |res: usize| {
            let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (res, res)).unwrap();
            let u = ScalarField::from_fn(g.clone(), |c| {
                (std::f64::consts::PI * c[0]).sin() * (std::f64::consts::PI * c[1]).sin()
            })
            .unwrap();
            g.seminorm_x(&norm, 2.0, &u).unwrap()
        };
        let (s8, s16, s32) = (semi(8), semi(16), semi(32));
        let d1 = (s16 - s8).abs();
        let d2 = (s32 - s16).abs();
        assert!(
            d1 >= 3.0 * d2,
            "error reduction per doubling at least 3x: {d1} vs {d2}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn seminorm_is_absolutely_homogeneous(
            scale in -3.0f64..3.0,
            seed in 0u64..1000,
        ) {
            use rand::rngs::StdRng;
            use rand::{Rng, SeedableRng};
            let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4)).unwrap();
            let norm = FinslerNorm::t_norm(2, 4.0).unwrap();
            let mut rng = StdRng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scaled: Vec<f64> = vals.iter().map(|v| scale * v).collect();
            let u = ScalarField::new(g.clone(), vals).unwrap();
            let su = ScalarField::new(g.clone(), scaled).unwrap();
            let p = 2.5;
            let a = g.seminorm_x(&norm, p, &u).unwrap();
            let b = g.seminorm_x(&norm, p, &su).unwrap();
            prop_assert!((b - scale.abs() * a).abs() <= 1e-10 * (1.0 + b),
                "|c|-homogeneity: {b} vs {}", scale.abs() * a);
        }

        #[test]
        fn total_volume_matches_box(
            len_x in 0.1f64..5.0, len_y in 0.1f64..5.0,
            nx in 2usize..8, ny in 2usize..8,
        ) {
            let g = Grid::rectangle((0.0, len_x), (0.0, len_y), (nx, ny)).unwrap();
            prop_assert!((g.total_volume() - len_x * len_y).abs() < 1e-12);
        }
    }
}
