//! Far-zone engine: project sources onto a uniform grid, convolve with the
//! image-subtracted periodic kernel on a shifted observer grid, interpolate.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{PimError, Result};
use crate::grid::{build_far_grids, Direction, SparseInterpOperator, UniformGrid};
use crate::model::{
    ObserverPointSet, PeriodicityConfig, Regime, SolverParams, SourcePointSet, TargetBox, Vec3, C64,
};
use crate::pgf::{pgf_far, TruncationPolicy};

/// Kernel over grid difference vectors, `(2N_x - 1)(2N_y - 1)(2N_z - 1)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FarKernel {
    pub grid_dims: [usize; 3],
    pub values: Vec<C64>,
    pub terms_max: usize,
}

impl FarKernel {
    pub fn table_dims(&self) -> [usize; 3] {
        self.grid_dims.map(|n| 2 * n - 1)
    }

    /// Entry for observer node minus source node index difference.
    #[inline]
    pub fn at(&self, d: [i64; 3]) -> C64 {
        self.values[self.flat(d)]
    }

    #[inline]
    fn flat(&self, d: [i64; 3]) -> usize {
        let t = self.table_dims();
        let i = (d[0] + self.grid_dims[0] as i64 - 1) as usize;
        let j = (d[1] + self.grid_dims[1] as i64 - 1) as usize;
        let k = (d[2] + self.grid_dims[2] as i64 - 1) as usize;
        (i * t[1] + j) * t[2] + k
    }
}

#[derive(Debug, Clone)]
pub struct FarZonePlan {
    pub source_grid: UniformGrid,
    pub observer_grid: UniformGrid,
    pub proj_op: SparseInterpOperator,
    pub interp_op: SparseInterpOperator,
    pub kernel: FarKernel,
    pub i_d: usize,
    /// Axis and size of the transverse source-grid offset applied to
    /// line or planar clouds, if any.
    pub transverse_offset: Option<(usize, f64)>,
    pub config_hash: u64,
}

/// Line clouds in 1D and planar clouds under the spectral series would put
/// grid differences on the singular or non-convergent set, so the source grid
/// is lifted off it.
fn transverse_offset(cfg: &PeriodicityConfig, bx: &TargetBox, src: &UniformGrid) -> Option<(usize, f64)> {
    let p = cfg.dim.count();
    if p == 3 || (p..3).any(|a| bx.is_active(a)) {
        return None;
    }
    let needs = p == 1 || cfg.regime != Regime::Npsp;
    if !needs {
        return None;
    }
    let h = src.spacing.iter().copied().fold(0.0, f64::max);
    Some((p, 0.5 * h))
}

/// Hash of everything the kernel table depends on.
pub fn far_config_hash(cfg: &PeriodicityConfig, bx: &TargetBox, grid_dims: [usize; 3], i_d: usize, tol: f64) -> u64 {
    let mut s = String::new();
    let mut push = |x: f64| s.push_str(&format!("{:016x};", x.to_bits()));
    for v in cfg.lattice {
        push(v);
    }
    push(cfg.k0.re);
    push(cfg.k0.im);
    for k in cfg.kshift {
        push(k.re);
        push(k.im);
    }
    for v in bx.extent {
        push(v);
    }
    push(tol);
    s.push_str(&format!(
        "dim={};regime={};grid={:?};i_d={}",
        cfg.dim.count(),
        cfg.regime.name(),
        grid_dims,
        i_d
    ));
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Tabulates G_far at every observer-minus-source grid difference.
pub fn tabulate_far_kernel(
    cfg: &PeriodicityConfig,
    source: &UniformGrid,
    observer: &UniformGrid,
    i_d: usize,
    policy: &TruncationPolicy,
) -> Result<FarKernel> {
    let n = source.dims;
    let t = n.map(|v| 2 * v - 1);
    let total = t[0] * t[1] * t[2];
    let base: Vec3 = std::array::from_fn(|a| {
        observer.origin[a] + observer.shift[a] - source.origin[a] - source.shift[a]
    });
    let entries: Vec<(C64, usize)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let i = flat / (t[1] * t[2]);
            let j = (flat / t[2]) % t[1];
            let k = flat % t[2];
            let d = [
                i as i64 - (n[0] as i64 - 1),
                j as i64 - (n[1] as i64 - 1),
                k as i64 - (n[2] as i64 - 1),
            ];
            let r: Vec3 = std::array::from_fn(|a| base[a] + d[a] as f64 * source.spacing[a]);
            let wrap = |e: PimError| PimError::Tabulation {
                index: d,
                source: Box::new(e),
            };
            let sample = pgf_far(r, cfg, i_d, policy).map_err(wrap)?;
            let terms = sample.terms_used;
            let v = sample.into_value().map_err(wrap)?;
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(wrap(PimError::Internal(format!("non-finite kernel value at {r:?}"))));
            }
            Ok((v, terms))
        })
        .collect::<Result<_>>()?;
    let terms_max = entries.iter().map(|e| e.1).max().unwrap_or(0);
    Ok(FarKernel {
        grid_dims: n,
        values: entries.into_iter().map(|e| e.0).collect(),
        terms_max,
    })
}

fn far_grids(cfg: &PeriodicityConfig, bx: &TargetBox, params: &SolverParams) -> Result<(UniformGrid, UniformGrid, Option<(usize, f64)>)> {
    if params.i_d < 1 {
        return Err(PimError::InvalidInput("far zone requires i_d >= 1".to_string()));
    }
    if (0..3).all(|a| !bx.is_active(a)) {
        return Err(PimError::InvalidInput("target box has no extent".to_string()));
    }
    let (mut source, observer) = build_far_grids(bx, params.far_grid)?;
    let offset = transverse_offset(cfg, bx, &source);
    if let Some((axis, h)) = offset {
        source.origin[axis] += h;
    }
    Ok((source, observer, offset))
}

pub fn build_far_plan(
    cfg: &PeriodicityConfig,
    bx: &TargetBox,
    src: &SourcePointSet,
    obs: &ObserverPointSet,
    params: &SolverParams,
) -> Result<FarZonePlan> {
    build_far_plan_cached(cfg, bx, src, obs, params, None)
}

/// As `build_far_plan`, reusing a kernel blob at `cache` when its header
/// matches and (re)writing it otherwise.
pub fn build_far_plan_cached(
    cfg: &PeriodicityConfig,
    bx: &TargetBox,
    src: &SourcePointSet,
    obs: &ObserverPointSet,
    params: &SolverParams,
    cache: Option<&Path>,
) -> Result<FarZonePlan> {
    let (source, observer, offset) = far_grids(cfg, bx, params)?;
    let hash = far_config_hash(cfg, bx, source.dims, params.i_d, params.series_tol);
    let proj_op = SparseInterpOperator::build(&source, src.positions(), params.far_order, Direction::Project)?;
    let interp_op = SparseInterpOperator::build(&observer, obs.positions(), params.far_order, Direction::Interpolate)?;

    let cached = match cache {
        Some(path) if path.exists() => {
            let blob = read_kernel_file(path)?;
            (blob.config_hash == hash && blob.kernel.grid_dims == source.dims).then_some(blob.kernel)
        }
        _ => None,
    };
    let fresh = cached.is_none();
    let kernel = match cached {
        Some(k) => k,
        None => {
            let policy = TruncationPolicy::with_tol(params.series_tol);
            tabulate_far_kernel(cfg, &source, &observer, params.i_d, &policy)?
        }
    };
    let plan = FarZonePlan {
        source_grid: source,
        observer_grid: observer,
        proj_op,
        interp_op,
        kernel,
        i_d: params.i_d,
        transverse_offset: offset,
        config_hash: hash,
    };
    if let (Some(path), true) = (cache, fresh) {
        write_kernel_file(&plan, cfg.regime, path)?;
    }
    Ok(plan)
}

/// Dense grid convolution u_g(o) = sum_s K(o - s) q_g(s).
pub fn far_grid_convolution(kernel: &FarKernel, q_g: &[C64]) -> Vec<C64> {
    let n = kernel.grid_dims;
    let t = kernel.table_dims();
    // flat(o - s) = flat(o) - (s_x * t_y + s_y) * t_z - s_z, so each source
    // reduces to one offset into the table
    let offset = |i: usize, j: usize, k: usize| (i * t[1] + j) * t[2] + k;
    let active: Vec<(usize, C64)> = q_g
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != C64::new(0.0, 0.0))
        .map(|(s, v)| (offset(s / (n[1] * n[2]), (s / n[2]) % n[1], s % n[2]), *v))
        .collect();
    (0..n[0] * n[1] * n[2])
        .into_par_iter()
        .map(|o| {
            let base = offset(o / (n[1] * n[2]) + n[0] - 1, (o / n[2]) % n[1] + n[1] - 1, o % n[2] + n[2] - 1);
            let mut acc = C64::new(0.0, 0.0);
            for &(s, qs) in &active {
                acc += kernel.values[base - s] * qs;
            }
            acc
        })
        .collect()
}

pub fn eval_far(plan: &FarZonePlan, q: &[C64]) -> Result<Vec<C64>> {
    let q_g = plan.proj_op.project(q)?;
    let u_g = far_grid_convolution(&plan.kernel, &q_g);
    plan.interp_op.interpolate(&u_g)
}

const MAGIC: &[u8; 4] = b"PIMF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 64;

/// Decoded kernel blob.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBlob {
    pub regime: Regime,
    pub config_hash: u64,
    pub i_d: usize,
    pub kernel: FarKernel,
}

fn regime_code(r: Regime) -> u32 {
    match r {
        Regime::Dynamic => 0,
        Regime::StaticShifted => 1,
        Regime::Npsp => 2,
    }
}

pub fn write_kernel<W: Write>(plan: &FarZonePlan, regime: Regime, mut w: W) -> Result<()> {
    let mut head = [0u8; HEADER_LEN];
    head[..4].copy_from_slice(MAGIC);
    head[4..8].copy_from_slice(&VERSION.to_le_bytes());
    for a in 0..3 {
        let n = plan.kernel.grid_dims[a] as u32;
        head[8 + 4 * a..12 + 4 * a].copy_from_slice(&n.to_le_bytes());
    }
    head[20..24].copy_from_slice(&regime_code(regime).to_le_bytes());
    head[24..32].copy_from_slice(&plan.config_hash.to_le_bytes());
    head[32..36].copy_from_slice(&(plan.i_d as u32).to_le_bytes());
    w.write_all(&head)?;
    let mut body = Vec::with_capacity(16 * plan.kernel.values.len());
    for v in &plan.kernel.values {
        body.extend_from_slice(&v.re.to_le_bytes());
        body.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_kernel<R: Read>(mut r: R) -> Result<KernelBlob> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)?;
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    if &head[..4] != MAGIC {
        return Err(PimError::Io("kernel blob has a bad magic".to_string()));
    }
    if u32_at(4) != VERSION {
        return Err(PimError::Io(format!("unsupported kernel blob version {}", u32_at(4))));
    }
    let grid_dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    if grid_dims.contains(&0) {
        return Err(PimError::Io("kernel blob has zero grid dimension".to_string()));
    }
    let regime = match u32_at(20) {
        0 => Regime::Dynamic,
        1 => Regime::StaticShifted,
        2 => Regime::Npsp,
        c => return Err(PimError::Io(format!("unknown regime code {c}"))),
    };
    let config_hash = u64::from_le_bytes(head[24..32].try_into().unwrap());
    let i_d = u32_at(32) as usize;
    let len: usize = grid_dims.iter().map(|n| 2 * n - 1).product();
    let mut body = vec![0u8; 16 * len];
    r.read_exact(&mut body)?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(KernelBlob {
        regime,
        config_hash,
        i_d,
        kernel: FarKernel {
            grid_dims,
            values,
            terms_max: 0,
        },
    })
}

pub fn write_kernel_file(plan: &FarZonePlan, regime: Regime, path: &Path) -> Result<()> {
    write_kernel(plan, regime, BufWriter::new(File::create(path)?))
}

pub fn read_kernel_file(path: &Path) -> Result<KernelBlob> {
    read_kernel(BufReader::new(File::open(path)?))
}
