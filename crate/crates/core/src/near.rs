//! Near-zone engine: project to a dense coinciding grid, circulant FFT
//! convolution with the tabulated image-sum kernel, interpolate, then replace
//! grid-mediated interactions of close pairs by exact kernel values.

use rayon::prelude::*;

use crate::error::{PimError, Result};
use crate::fft::SpectralTransformProvider;
use crate::grid::{build_near_grid, Direction, SparseInterpOperator, Stencil, UniformGrid};
use crate::model::{
    resolve_near_grid, ObserverPointSet, PeriodicityConfig, SolverParams, SourcePointSet, TargetBox, Vec3, C64,
};
use crate::pgf::pgf_image_sum_excluding;

/// Near-zone kernel over grid displacement vectors, `(2N_a - 1)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct NearKernel {
    pub grid_dims: [usize; 3],
    pub values: Vec<C64>,
}

impl NearKernel {
    pub fn table_dims(&self) -> [usize; 3] {
        self.grid_dims.map(|n| 2 * n - 1)
    }

    #[inline]
    pub fn at(&self, d: [i64; 3]) -> C64 {
        let t = self.table_dims();
        let i = (d[0] + self.grid_dims[0] as i64 - 1) as usize;
        let j = (d[1] + self.grid_dims[1] as i64 - 1) as usize;
        let k = (d[2] + self.grid_dims[2] as i64 - 1) as usize;
        self.values[(i * t[1] + j) * t[2] + k]
    }
}

/// Sparse per-observer list of (source, exact minus grid-mediated kernel).
#[derive(Debug, Clone, PartialEq)]
struct Correction {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    coefs: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct NearZonePlan {
    pub grid: UniformGrid,
    pub proj_op: SparseInterpOperator,
    pub interp_op: SparseInterpOperator,
    pub kernel: NearKernel,
    pub embed_dims: [usize; 3],
    pub kernel_hat: Vec<C64>,
    pub i_d: usize,
    pub er_range_boxes: usize,
    pub box_dims: [usize; 3],
    /// Source indices per box, boxes linearized like grid nodes.
    pub boxes: Vec<Vec<usize>>,
    /// Per axis and box: neighboring boxes with the lattice offset (in periods)
    /// that brings them within range.
    axis_neighbors: [Vec<Vec<(usize, i8)>>; 3],
    correction: Correction,
    /// Observer/source pairs at coinciding positions (self terms).
    pub coincident_pairs: usize,
    skip_within: f64,
}

fn coincidence_radius(cfg: &PeriodicityConfig, bx: &TargetBox) -> f64 {
    1e-10 * bx.extent.iter().copied().chain(cfg.periodic_axes().map(|a| cfg.lattice[a])).fold(0.0, f64::max)
}

fn box_of(grid: &UniformGrid, box_dims: [usize; 3], p: &Vec3) -> [usize; 3] {
    std::array::from_fn(|a| {
        if grid.dims[a] == 1 {
            0
        } else {
            let t = (p[a] - grid.origin[a]) / grid.spacing[a];
            (t.floor().max(0.0) as usize).min(box_dims[a] - 1)
        }
    })
}

fn axis_neighbor_lists(cfg: &PeriodicityConfig, grid: &UniformGrid, box_dims: [usize; 3], r: usize) -> [Vec<Vec<(usize, i8)>>; 3] {
    std::array::from_fn(|a| {
        let nb = box_dims[a];
        if grid.dims[a] == 1 {
            return vec![vec![(0, 0)]];
        }
        let h = grid.spacing[a];
        let limit = (r as f64 - 0.5) * h + 1e-9 * h;
        let offsets: &[i8] = if cfg.is_periodic(a) { &[0, -1, 1] } else { &[0] };
        (0..nb)
            .map(|b| {
                let lo = b as f64 * h;
                let mut out = Vec::new();
                for b2 in 0..nb {
                    let mut best: Option<(f64, i8)> = None;
                    for &o in offsets {
                        // source box shifted so that r_m - r_n + o L is small
                        let s_lo = b2 as f64 * h - o as f64 * cfg.lattice[a];
                        let gap = (s_lo - (lo + h)).max(lo - (s_lo + h)).max(0.0);
                        if gap <= limit && best.is_none_or(|(g, _)| gap < g) {
                            best = Some((gap, o));
                        }
                    }
                    if let Some((_, o)) = best {
                        out.push((b2, o));
                    }
                }
                out
            })
            .collect()
    })
}

pub fn tabulate_near_kernel(cfg: &PeriodicityConfig, grid: &UniformGrid, i_d: usize, skip_within: f64) -> NearKernel {
    let n = grid.dims;
    let t = n.map(|v| 2 * v - 1);
    let values = (0..t[0] * t[1] * t[2])
        .into_par_iter()
        .map(|flat| {
            let d = [
                (flat / (t[1] * t[2])) as i64 - (n[0] as i64 - 1),
                ((flat / t[2]) % t[1]) as i64 - (n[1] as i64 - 1),
                (flat % t[2]) as i64 - (n[2] as i64 - 1),
            ];
            if d == [0, 0, 0] {
                return C64::new(0.0, 0.0);
            }
            let r: Vec3 = std::array::from_fn(|a| d[a] as f64 * grid.spacing[a]);
            pgf_image_sum_excluding(r, cfg, [i_d; 3], skip_within)
        })
        .collect();
    NearKernel { grid_dims: n, values }
}

/// Smallest even length >= n whose prime factors are all at most 5.
fn smooth_length(n: usize) -> usize {
    if n <= 2 {
        return n;
    }
    (n..)
        .find(|&m| {
            let mut r = m;
            if r % 2 == 1 {
                return false;
            }
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("unbounded search")
}

fn embed_kernel(kernel: &NearKernel, embed: [usize; 3]) -> Vec<C64> {
    let n = kernel.grid_dims;
    let mut c = vec![C64::new(0.0, 0.0); embed.iter().product()];
    let range = |a: usize| -(n[a] as i64 - 1)..=(n[a] as i64 - 1);
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let w = |d: i64, a: usize| d.rem_euclid(embed[a] as i64) as usize;
                c[(w(i, 0) * embed[1] + w(j, 1)) * embed[2] + w(k, 2)] = kernel.at([i, j, k]);
            }
        }
    }
    c
}

/// Grid-mediated interaction between an observer stencil and a source stencil.
fn stencil_green(grid: &UniformGrid, kernel: &NearKernel, obs: &Stencil, src: &Stencil) -> C64 {
    let su: Vec<[i64; 3]> = src.indices.iter().map(|&s| grid.unravel(s).map(|v| v as i64)).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (&o, &wo) in obs.indices.iter().zip(&obs.weights) {
        let ou = grid.unravel(o).map(|v| v as i64);
        let mut inner = C64::new(0.0, 0.0);
        for (s, &ws) in su.iter().zip(&src.weights) {
            inner += kernel.at([ou[0] - s[0], ou[1] - s[1], ou[2] - s[2]]) * ws;
        }
        acc += inner * wo;
    }
    acc
}

pub fn build_near_plan(
    cfg: &PeriodicityConfig,
    bx: &TargetBox,
    src: &SourcePointSet,
    obs: &ObserverPointSet,
    params: &SolverParams,
    provider: &dyn SpectralTransformProvider,
) -> Result<NearZonePlan> {
    if params.er_range_boxes < 1 {
        return Err(PimError::InvalidInput("error-correction range must be at least one box".to_string()));
    }
    let dims = resolve_near_grid(params, bx, src.len().max(obs.len()));
    let grid = build_near_grid(bx, dims)?;
    let proj_op = SparseInterpOperator::build(&grid, src.positions(), params.near_order, Direction::Project)?;
    let interp_op = SparseInterpOperator::build(&grid, obs.positions(), params.near_order, Direction::Interpolate)?;
    let src_stencils: Vec<Stencil> = (0..src.len()).into_par_iter().map(|n| proj_op.stencil(n)).collect();
    let obs_stencils: Vec<Stencil> = (0..obs.len()).into_par_iter().map(|m| interp_op.stencil(m)).collect();
    let skip_within = coincidence_radius(cfg, bx);
    let kernel = tabulate_near_kernel(cfg, &grid, params.i_d, skip_within);

    let embed_dims = grid.dims.map(|n| if n > 1 { smooth_length(2 * n - 1) } else { 1 });
    let mut kernel_hat = embed_kernel(&kernel, embed_dims);
    provider.forward(&mut kernel_hat, embed_dims)?;

    let box_dims = grid.dims.map(|n| (n - 1).max(1));
    let mut boxes = vec![Vec::new(); box_dims.iter().product()];
    for (n, p) in src.positions().iter().enumerate() {
        let b = box_of(&grid, box_dims, p);
        boxes[(b[0] * box_dims[1] + b[1]) * box_dims[2] + b[2]].push(n);
    }
    let axis_neighbors = axis_neighbor_lists(cfg, &grid, box_dims, params.er_range_boxes);

    let rows: Vec<(Vec<(usize, C64)>, usize)> = obs
        .positions()
        .par_iter()
        .enumerate()
        .map(|(m, rm)| {
            let bm = box_of(&grid, box_dims, rm);
            let mut row = Vec::new();
            let mut coincident = 0;
            for &(bx0, _) in &axis_neighbors[0][bm[0]] {
                for &(by, _) in &axis_neighbors[1][bm[1]] {
                    for &(bz, _) in &axis_neighbors[2][bm[2]] {
                        for &n in &boxes[(bx0 * box_dims[1] + by) * box_dims[2] + bz] {
                            let rn = src.positions()[n];
                            let d: Vec3 = std::array::from_fn(|a| rm[a] - rn[a]);
                            if d.iter().map(|v| v * v).sum::<f64>().sqrt() <= skip_within {
                                coincident += 1;
                            }
                            let exact = pgf_image_sum_excluding(d, cfg, [params.i_d; 3], skip_within);
                            let via_grid = stencil_green(&grid, &kernel, &obs_stencils[m], &src_stencils[n]);
                            row.push((n, exact - via_grid));
                        }
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            (row, coincident)
        })
        .collect();

    let mut correction = Correction {
        row_ptr: vec![0],
        cols: Vec::new(),
        coefs: Vec::new(),
    };
    let mut coincident_pairs = 0;
    for (row, c) in rows {
        coincident_pairs += c;
        for (n, v) in row {
            correction.cols.push(n);
            correction.coefs.push(v);
        }
        correction.row_ptr.push(correction.cols.len());
    }

    Ok(NearZonePlan {
        grid,
        proj_op,
        interp_op,
        kernel,
        embed_dims,
        kernel_hat,
        i_d: params.i_d,
        er_range_boxes: params.er_range_boxes,
        box_dims,
        boxes,
        axis_neighbors,
        correction,
        coincident_pairs,
        skip_within,
    })
}

impl NearZonePlan {
    /// Neighbor boxes of `b` with their per-axis lattice offsets in periods.
    pub fn neighbor_map(&self, b: [usize; 3]) -> Vec<([usize; 3], [i8; 3])> {
        let mut out = Vec::new();
        for &(x, ox) in &self.axis_neighbors[0][b[0]] {
            for &(y, oy) in &self.axis_neighbors[1][b[1]] {
                for &(z, oz) in &self.axis_neighbors[2][b[2]] {
                    out.push(([x, y, z], [ox, oy, oz]));
                }
            }
        }
        out
    }

    pub fn box_of(&self, p: &Vec3) -> [usize; 3] {
        box_of(&self.grid, self.box_dims, p)
    }

    /// Number of corrected observer/source pairs.
    pub fn correction_pairs(&self) -> usize {
        self.correction.cols.len()
    }

    /// Sources whose interaction with observer `m` is corrected.
    pub fn corrected_sources(&self, m: usize) -> &[usize] {
        &self.correction.cols[self.correction.row_ptr[m]..self.correction.row_ptr[m + 1]]
    }

    /// Radius under which two points are treated as the same point.
    pub fn coincidence_radius(&self) -> f64 {
        self.skip_within
    }
}

/// Interaction of observer `m` and source `n` as mediated by the grid.
pub fn grid_green(plan: &NearZonePlan, m: usize, n: usize) -> Result<C64> {
    if m >= plan.interp_op.n_points() || n >= plan.proj_op.n_points() {
        return Err(PimError::InvalidInput(format!("pair ({m}, {n}) out of range")));
    }
    Ok(stencil_green(&plan.grid, &plan.kernel, &plan.interp_op.stencil(m), &plan.proj_op.stencil(n)))
}

/// Step 2 through the circulant embedding.
pub fn near_grid_convolution(plan: &NearZonePlan, q_g: &[C64], provider: &dyn SpectralTransformProvider) -> Result<Vec<C64>> {
    let n = plan.grid.dims;
    let e = plan.embed_dims;
    if q_g.len() != plan.grid.len() {
        return Err(PimError::InvalidInput("grid charge length mismatch".to_string()));
    }
    let mut buf = vec![C64::new(0.0, 0.0); e.iter().product()];
    for i in 0..n[0] {
        for j in 0..n[1] {
            let dst = (i * e[1] + j) * e[2];
            let src = (i * n[1] + j) * n[2];
            buf[dst..dst + n[2]].copy_from_slice(&q_g[src..src + n[2]]);
        }
    }
    provider.forward(&mut buf, e)?;
    buf.par_iter_mut().zip(&plan.kernel_hat).for_each(|(b, k)| *b *= k);
    provider.inverse(&mut buf, e)?;
    let mut out = vec![C64::new(0.0, 0.0); plan.grid.len()];
    for i in 0..n[0] {
        for j in 0..n[1] {
            let s = (i * e[1] + j) * e[2];
            let d = (i * n[1] + j) * n[2];
            out[d..d + n[2]].copy_from_slice(&buf[s..s + n[2]]);
        }
    }
    Ok(out)
}

/// Step 2 as an explicit double sum over grid nodes.
pub fn near_grid_convolution_direct(plan: &NearZonePlan, q_g: &[C64]) -> Vec<C64> {
    let g = &plan.grid;
    (0..g.len())
        .into_par_iter()
        .map(|o| {
            let ou = g.unravel(o);
            let mut acc = C64::new(0.0, 0.0);
            for (s, qs) in q_g.iter().enumerate() {
                let su = g.unravel(s);
                let d = std::array::from_fn(|a| ou[a] as i64 - su[a] as i64);
                acc += plan.kernel.at(d) * qs;
            }
            acc
        })
        .collect()
}

/// Steps 1 to 3 without the correction.
pub fn eval_near_uncorrected(plan: &NearZonePlan, q: &[C64], provider: &dyn SpectralTransformProvider) -> Result<Vec<C64>> {
    let q_g = plan.proj_op.project(q)?;
    let u_g = near_grid_convolution(plan, &q_g, provider)?;
    plan.interp_op.interpolate(&u_g)
}

pub fn eval_near(plan: &NearZonePlan, q: &[C64], provider: &dyn SpectralTransformProvider) -> Result<Vec<C64>> {
    let mut u = eval_near_uncorrected(plan, q, provider)?;
    let c = &plan.correction;
    u.par_iter_mut().enumerate().for_each(|(m, um)| {
        let r = c.row_ptr[m]..c.row_ptr[m + 1];
        for (&n, &k) in c.cols[r.clone()].iter().zip(&c.coefs[r]) {
            *um += k * q[n];
        }
    });
    Ok(u)
}
