//! Test-problem generators, accuracy sweeps and timing runs.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::direct::{eval_direct, eval_direct_near};
use crate::error::Result;
use crate::far::{build_far_plan, eval_far};
use crate::fft::SpectralTransformProvider;
use crate::model::{ObserverPointSet, PeriodicityConfig, SolverParams, SourcePointSet, TargetBox, Vec3, C64};
use crate::pgf::TruncationPolicy;
use crate::solver::{build_free_space_plan, build_plan, solve, Problem};

fn random_point(rng: &mut ChaCha8Rng, bx: &TargetBox) -> Vec3 {
    std::array::from_fn(|a| rng.random::<f64>() * bx.extent[a])
}

/// Uniform random positions with real amplitudes in [-1, 1] summing to zero.
pub fn random_neutral_sources(n: usize, bx: &TargetBox, seed: u64) -> SourcePointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vec3> = (0..n).map(|_| random_point(&mut rng, bx)).collect();
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if n > 0 {
        let mean = q.iter().sum::<f64>() / n as f64;
        q.iter_mut().for_each(|v| *v -= mean);
        let rest: f64 = q[..n - 1].iter().sum();
        q[n - 1] = -rest;
    }
    let amplitudes = q.into_iter().map(|v| C64::new(v, 0.0)).collect();
    SourcePointSet::new(positions, amplitudes).expect("lengths match")
}

/// Random observers at least `min_sep` away from every source.
pub fn separated_observers(m: usize, bx: &TargetBox, src: &SourcePointSet, min_sep: f64, seed: u64) -> ObserverPointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let p = random_point(&mut rng, bx);
        let clear = src.positions().iter().all(|s| {
            let d2: f64 = (0..3).map(|a| (p[a] - s[a]).powi(2)).sum();
            d2 >= min_sep * min_sep
        });
        if clear {
            out.push(p);
        }
    }
    ObserverPointSet::new(out)
}

/// Two coaxial cylindrical shells along x, discretized on uniform
/// angle/axial lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoaxSpec {
    pub inner_radius: f64,
    pub inner_density: f64,
    pub outer_radius: f64,
    pub outer_density: f64,
    pub length: f64,
    pub inner_angular: usize,
    pub outer_angular: usize,
    pub axial: usize,
}

impl Default for CoaxSpec {
    fn default() -> Self {
        Self {
            inner_radius: 1.0,
            inner_density: -1.0,
            outer_radius: 2.0,
            outer_density: 0.5,
            length: 1.0,
            inner_angular: 200,
            outer_angular: 400,
            axial: 50,
        }
    }
}

impl CoaxSpec {
    /// Box enclosing both shells; the axis sits at y = z = outer radius.
    pub fn target_box(&self) -> TargetBox {
        let d = 2.0 * self.outer_radius;
        TargetBox::new([self.length, d, d])
    }

    pub fn axis(&self) -> (f64, f64) {
        (self.outer_radius, self.outer_radius)
    }

    /// Shell points carrying density times patch area; the outer shell is
    /// rescaled so the total charge vanishes exactly.
    pub fn sources(&self) -> SourcePointSet {
        let (cy, cz) = self.axis();
        let mut pos = Vec::new();
        let mut q = Vec::new();
        let (length, axial) = (self.length, self.axial);
        let shell = |pos: &mut Vec<Vec3>, q: &mut Vec<f64>, r: f64, rho: f64, n_ang: usize| {
            let patch = rho * 2.0 * PI * r * length / (n_ang * axial) as f64;
            for i in 0..axial {
                let x = (i as f64 + 0.5) * length / axial as f64;
                for j in 0..n_ang {
                    let t = 2.0 * PI * (j as f64 + 0.5) / n_ang as f64;
                    pos.push([x, cy + r * t.cos(), cz + r * t.sin()]);
                    q.push(patch);
                }
            }
        };
        shell(&mut pos, &mut q, self.inner_radius, self.inner_density, self.inner_angular);
        let split = q.len();
        shell(&mut pos, &mut q, self.outer_radius, self.outer_density, self.outer_angular);
        let inner: f64 = q[..split].iter().sum();
        let outer: f64 = q[split..].iter().sum();
        if outer != 0.0 {
            let s = -inner / outer;
            q[split..].iter_mut().for_each(|v| *v *= s);
            let last = q.len() - 1;
            let rest: f64 = q[..last].iter().sum();
            q[last] = -rest;
        }
        let amplitudes = q.into_iter().map(|v| C64::new(v, 0.0)).collect();
        SourcePointSet::new(pos, amplitudes).expect("lengths match")
    }

    /// Points on the axis at the cell-centered x positions.
    pub fn axis_observers(&self, count: usize) -> ObserverPointSet {
        let (cy, cz) = self.axis();
        ObserverPointSet::new(
            (0..count)
                .map(|i| [(i as f64 + 0.5) * self.length / count as f64, cy, cz])
                .collect(),
        )
    }
}

/// max_m |u_m - ref_m| / max_m |ref_m|.
pub fn max_relative_error(u: &[C64], reference: &[C64]) -> f64 {
    let scale = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = u.iter().zip(reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub far_order: usize,
    pub far_grid: usize,
    pub i_d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStudyRow {
    pub point: SweepPoint,
    /// Far-zone engine plus exact near-image sum.
    pub far_error: f64,
    /// Near-zone plus far-zone engines.
    pub pipeline_error: f64,
}

/// Compares both fast paths with the direct reference at each sweep point.
pub fn error_study(
    problem: &Problem,
    sweep: &[SweepPoint],
    provider: &dyn SpectralTransformProvider,
    policy: &TruncationPolicy,
) -> Result<Vec<ErrorStudyRow>> {
    problem.validate()?;
    let Problem {
        cfg,
        target,
        sources,
        observers,
        ..
    } = problem;
    let reference = eval_direct(cfg, sources, observers, policy).into_values()?;
    let mut near_cache: Vec<(usize, Vec<C64>)> = Vec::new();
    let mut rows = Vec::with_capacity(sweep.len());
    for &point in sweep {
        let params = SolverParams {
            far_order: point.far_order,
            far_grid: [point.far_grid; 3],
            i_d: point.i_d,
            ..problem.params
        };
        let near_exact = match near_cache.iter().find(|(i, _)| *i == point.i_d) {
            Some((_, v)) => v.clone(),
            None => {
                let v = eval_direct_near(cfg, sources, observers, point.i_d).into_values()?;
                near_cache.push((point.i_d, v.clone()));
                v
            }
        };
        let far = build_far_plan(cfg, target, sources, observers, &params)?;
        let u_far = eval_far(&far, sources.amplitudes())?;
        let far_path: Vec<C64> = u_far.iter().zip(&near_exact).map(|(a, b)| a + b).collect();

        let sub = Problem {
            params,
            ..problem.clone()
        };
        let plan = build_plan(&sub, provider)?;
        let u = solve(&plan, sources.amplitudes(), provider)?;
        rows.push(ErrorStudyRow {
            point,
            far_error: max_relative_error(&far_path, &reference),
            pipeline_error: max_relative_error(&u.values, &reference),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub build: Duration,
    pub eval: Duration,
    pub free_build: Duration,
    pub free_eval: Duration,
}

impl BenchRow {
    /// Periodic over free-space evaluation time.
    pub fn eval_overhead(&self) -> f64 {
        self.eval.as_secs_f64() / self.free_eval.as_secs_f64()
    }

    pub fn build_overhead(&self) -> f64 {
        self.build.as_secs_f64() / self.free_build.as_secs_f64()
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Times plan build and evaluation on random neutral clouds whose observers
/// are the source points, with and without periodicity.
pub fn bench(
    cfg: &PeriodicityConfig,
    target: &TargetBox,
    params: &SolverParams,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    provider: &dyn SpectralTransformProvider,
) -> Result<Vec<BenchRow>> {
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let sources = random_neutral_sources(n, target, seed.wrapping_add(n as u64));
        let observers = ObserverPointSet::new(sources.positions().to_vec());
        let problem = Problem {
            cfg: *cfg,
            target: *target,
            sources,
            observers,
            params: *params,
        };
        let q = problem.sources.amplitudes();
        let plan = build_plan(&problem, provider)?;
        let free = build_free_space_plan(&problem, provider)?;
        let mut t_per = Vec::with_capacity(repeats);
        let mut t_free = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t = Instant::now();
            solve(&plan, q, provider)?;
            t_per.push(t.elapsed());
            let t = Instant::now();
            solve(&free, q, provider)?;
            t_free.push(t.elapsed());
        }
        rows.push(BenchRow {
            n,
            build: plan.build_time,
            eval: median(t_per),
            free_build: free.build_time,
            free_eval: median(t_free),
        });
    }
    Ok(rows)
}
