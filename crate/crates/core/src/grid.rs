//! Uniform grids and sparse tensor-product Lagrange operators that move data
//! between non-uniform points and grid nodes.

use rayon::prelude::*;

use crate::error::{PimError, Result};
use crate::model::{TargetBox, Vec3, C64};

/// Regular 3D grid. Node (l, p, q) sits at `origin + shift + (l, p, q) * spacing`
/// and is stored at `l * N_z * N_y + p * N_z + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: Vec3,
    pub shift: Vec3,
}

impl UniformGrid {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, l: usize, p: usize, q: usize) -> usize {
        l * self.dims[2] * self.dims[1] + p * self.dims[2] + q
    }

    #[inline]
    pub fn unravel(&self, n: usize) -> [usize; 3] {
        let yz = self.dims[1] * self.dims[2];
        [n / yz, (n % yz) / self.dims[2], n % self.dims[2]]
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + self.shift[axis] + i as f64 * self.spacing[axis]
    }

    pub fn point(&self, n: usize) -> Vec3 {
        let [l, p, q] = self.unravel(n);
        [self.coordinate(0, l), self.coordinate(1, p), self.coordinate(2, q)]
    }

    /// Axes carrying more than one node.
    pub fn is_active(&self, axis: usize) -> bool {
        self.dims[axis] > 1
    }
}

fn check_dims(bx: &TargetBox, dims: [usize; 3], min: usize) -> Result<[usize; 3]> {
    let mut out = [1; 3];
    for a in 0..3 {
        if bx.is_active(a) {
            if dims[a] < min {
                return Err(PimError::InvalidInput(format!(
                    "grid needs at least {min} points on axis {a}, got {}",
                    dims[a]
                )));
            }
            out[a] = dims[a];
        }
    }
    Ok(out)
}

/// Far-zone source grid on [0, D - Delta] with Delta = D / N, and the observer
/// grid shifted by Delta / 2 on every active axis.
pub fn build_far_grids(bx: &TargetBox, dims: [usize; 3]) -> Result<(UniformGrid, UniformGrid)> {
    let dims = check_dims(bx, dims, 2)?;
    let mut spacing = [0.0; 3];
    let mut half = [0.0; 3];
    for a in 0..3 {
        if dims[a] > 1 {
            spacing[a] = bx.extent[a] / dims[a] as f64;
            half[a] = 0.5 * spacing[a];
        }
    }
    let source = UniformGrid {
        dims,
        origin: [0.0; 3],
        spacing,
        shift: [0.0; 3],
    };
    let observer = UniformGrid {
        dims,
        origin: [0.0; 3],
        spacing,
        shift: half,
    };
    Ok((source, observer))
}

/// Near-zone grid: one coinciding source/observer grid spanning [0, D].
pub fn build_near_grid(bx: &TargetBox, dims: [usize; 3]) -> Result<UniformGrid> {
    let dims = check_dims(bx, dims, 2)?;
    let mut spacing = [0.0; 3];
    for a in 0..3 {
        if dims[a] > 1 {
            spacing[a] = bx.extent[a] / (dims[a] - 1) as f64;
        }
    }
    Ok(UniformGrid {
        dims,
        origin: [0.0; 3],
        spacing,
        shift: [0.0; 3],
    })
}

/// Largest stencil order supported.
pub const MAX_ORDER: usize = 15;

/// 1D Lagrange weights on `order + 1` consecutive nodes around `coord`.
/// Returns the first node index. Points may sit up to one spacing outside the
/// node hull (extrapolation), which the shifted far-zone grids require.
pub fn axis_weights(grid: &UniformGrid, axis: usize, coord: f64, order: usize, out: &mut [f64]) -> Result<usize> {
    let n = grid.dims[axis];
    if n == 1 {
        out[0] = 1.0;
        return Ok(0);
    }
    if order + 1 > n {
        return Err(PimError::InvalidInput(format!(
            "order {order} needs {} nodes on axis {axis}, grid has {n}",
            order + 1
        )));
    }
    let h = grid.spacing[axis];
    let t = (coord - grid.origin[axis] - grid.shift[axis]) / h;
    let eps = 1e-9;
    if !(t >= -1.0 - eps && t <= n as f64 + eps) {
        return Err(PimError::Domain(format!(
            "point {coord} lies outside the grid hull on axis {axis}"
        )));
    }
    let start = (t - (order as f64 + 1.0) / 2.0).ceil();
    let start = start.clamp(0.0, (n - order - 1) as f64) as usize;
    for (i, w) in out.iter_mut().enumerate().take(order + 1) {
        let xi = (start + i) as f64;
        let mut num = 1.0;
        let mut den = 1.0;
        for j in 0..=order {
            if j != i {
                let xj = (start + j) as f64;
                num *= t - xj;
                den *= xi - xj;
            }
        }
        *w = num / den;
    }
    Ok(start)
}

/// Tensor-product Lagrange stencil of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn lagrange_weights(grid: &UniformGrid, point: &Vec3, order: usize) -> Result<Stencil> {
    if order > MAX_ORDER {
        return Err(PimError::InvalidInput(format!("order {order} exceeds {MAX_ORDER}")));
    }
    let mut w = [[0.0; MAX_ORDER + 1]; 3];
    let mut start = [0usize; 3];
    let mut len = [1usize; 3];
    for a in 0..3 {
        start[a] = axis_weights(grid, a, point[a], order, &mut w[a])?;
        if grid.is_active(a) {
            len[a] = order + 1;
        }
    }
    let size = len[0] * len[1] * len[2];
    let mut indices = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    for i in 0..len[0] {
        for j in 0..len[1] {
            for k in 0..len[2] {
                indices.push(grid.index(start[0] + i, start[1] + j, start[2] + k));
                weights.push(w[0][i] * w[1][j] * w[2][k]);
            }
        }
    }
    Ok(Stencil { indices, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Points to grid (source side).
    Project,
    /// Grid to points (observer side).
    Interpolate,
}

/// Tensor-product stencils of a point set on a grid: per point a first node
/// and one weight vector per axis. Projection applies the transpose of the
/// interpolation matrix, so both directions share storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInterpOperator {
    pub direction: Direction,
    pub order: usize,
    grid_dims: [usize; 3],
    /// Stencil extent per axis: order + 1 on active axes, 1 otherwise.
    extent: [usize; 3],
    first: Vec<usize>,
    /// Per point the x, y and z weights, each padded to order + 1.
    axis_weights: Vec<f64>,
}

impl SparseInterpOperator {
    pub fn build(grid: &UniformGrid, points: &[Vec3], order: usize, direction: Direction) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(PimError::InvalidInput(format!("order {order} exceeds {MAX_ORDER}")));
        }
        let w = order + 1;
        let rows: Vec<(usize, Vec<f64>)> = points
            .par_iter()
            .map(|p| {
                let mut weights = vec![0.0; 3 * w];
                let mut start = [0; 3];
                for a in 0..3 {
                    start[a] = axis_weights(grid, a, p[a], order, &mut weights[a * w..(a + 1) * w])?;
                }
                Ok((grid.index(start[0], start[1], start[2]), weights))
            })
            .collect::<Result<_>>()?;
        let (first, weights): (Vec<usize>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        Ok(Self {
            direction,
            order,
            grid_dims: grid.dims,
            extent: std::array::from_fn(|a| if grid.is_active(a) { w } else { 1 }),
            first,
            axis_weights: weights.concat(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.first.len()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_dims.iter().product()
    }

    fn strides(&self) -> [usize; 3] {
        [self.grid_dims[1] * self.grid_dims[2], self.grid_dims[2], 1]
    }

    #[inline]
    fn weights_of(&self, i: usize) -> [&[f64]; 3] {
        let w = self.order + 1;
        let all = &self.axis_weights[3 * w * i..3 * w * (i + 1)];
        std::array::from_fn(|a| &all[a * w..a * w + self.extent[a]])
    }

    /// Grid indices and weights of point `i`, z fastest.
    pub fn stencil(&self, i: usize) -> Stencil {
        let [wx, wy, wz] = self.weights_of(i);
        let st = self.strides();
        let size = wx.len() * wy.len() * wz.len();
        let mut indices = Vec::with_capacity(size);
        let mut weights = Vec::with_capacity(size);
        for (a, x) in wx.iter().enumerate() {
            for (b, y) in wy.iter().enumerate() {
                for (k, z) in wz.iter().enumerate() {
                    indices.push(self.first[i] + a * st[0] + b * st[1] + k);
                    weights.push(x * y * z);
                }
            }
        }
        Stencil { indices, weights }
    }

    /// Same stencils, opposite direction.
    pub fn transposed(&self) -> Self {
        let mut t = self.clone();
        t.direction = match self.direction {
            Direction::Project => Direction::Interpolate,
            Direction::Interpolate => Direction::Project,
        };
        t
    }

    /// q_g[s] = sum_n w(s, n) q[n].
    pub fn project(&self, q: &[C64]) -> Result<Vec<C64>> {
        if q.len() != self.n_points() {
            return Err(PimError::InvalidInput(format!(
                "projection expects {} amplitudes, got {}",
                self.n_points(),
                q.len()
            )));
        }
        let st = self.strides();
        let mut out = vec![C64::new(0.0, 0.0); self.grid_len()];
        for (i, &qi) in q.iter().enumerate() {
            if qi == C64::new(0.0, 0.0) {
                continue;
            }
            let [wx, wy, wz] = self.weights_of(i);
            for (a, x) in wx.iter().enumerate() {
                let qx = qi * x;
                for (b, y) in wy.iter().enumerate() {
                    let qy = qx * y;
                    let row = self.first[i] + a * st[0] + b * st[1];
                    for (o, z) in out[row..row + wz.len()].iter_mut().zip(wz) {
                        *o += qy * z;
                    }
                }
            }
        }
        Ok(out)
    }

    /// u[m] = sum_o w(m, o) u_g[o].
    pub fn interpolate(&self, u_g: &[C64]) -> Result<Vec<C64>> {
        if u_g.len() != self.grid_len() {
            return Err(PimError::InvalidInput(format!(
                "interpolation expects {} grid values, got {}",
                self.grid_len(),
                u_g.len()
            )));
        }
        let st = self.strides();
        Ok((0..self.n_points())
            .into_par_iter()
            .map(|i| {
                let [wx, wy, wz] = self.weights_of(i);
                let mut acc = C64::new(0.0, 0.0);
                for (a, x) in wx.iter().enumerate() {
                    let mut plane = C64::new(0.0, 0.0);
                    for (b, y) in wy.iter().enumerate() {
                        let row = self.first[i] + a * st[0] + b * st[1];
                        let line: C64 = u_g[row..row + wz.len()].iter().zip(wz).map(|(u, z)| u * z).sum();
                        plane += line * y;
                    }
                    acc += plane * x;
                }
                acc
            })
            .collect())
    }
}

pub fn project(op: &SparseInterpOperator, q: &[C64]) -> Result<Vec<C64>> {
    op.project(q)
}

pub fn interpolate(op: &SparseInterpOperator, u_g: &[C64]) -> Result<Vec<C64>> {
    op.interpolate(u_g)
}
