//! End-to-end periodic solver: u = u_near + u_far.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{PimError, Result};
use crate::far::{build_far_plan_cached, eval_far, FarZonePlan};
use crate::fft::SpectralTransformProvider;
use crate::model::{
    validate_problem, ObserverPointSet, PeriodicityConfig, PotentialField, SolverParams, SourcePointSet, TargetBox, C64,
};
use crate::near::{build_near_plan, eval_near, NearZonePlan};

/// Everything that defines one superposition problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub cfg: PeriodicityConfig,
    pub target: TargetBox,
    pub sources: SourcePointSet,
    pub observers: ObserverPointSet,
    pub params: SolverParams,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        validate_problem(&self.cfg, &self.target, &self.sources, &self.observers, &self.params).into_result()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Periodic,
    /// No images and no far zone: the same cloud as an isolated array.
    FreeSpace,
}

#[derive(Debug, Clone)]
pub struct SolverPlan {
    pub mode: PlanMode,
    pub near: NearZonePlan,
    pub far: Option<FarZonePlan>,
    pub build_time: Duration,
}

impl SolverPlan {
    /// Largest series term count met while tabulating the far kernel.
    pub fn series_terms(&self) -> usize {
        self.far.as_ref().map_or(0, |f| f.kernel.terms_max)
    }
}

pub fn build_plan(problem: &Problem, provider: &dyn SpectralTransformProvider) -> Result<SolverPlan> {
    build_plan_cached(problem, provider, None)
}

/// Builds the periodic plan, reusing a far-kernel blob at `cache` when valid.
pub fn build_plan_cached(problem: &Problem, provider: &dyn SpectralTransformProvider, cache: Option<&Path>) -> Result<SolverPlan> {
    problem.validate()?;
    let t = Instant::now();
    let Problem {
        cfg,
        target,
        sources,
        observers,
        params,
    } = problem;
    let near = build_near_plan(cfg, target, sources, observers, params, provider)?;
    let far = build_far_plan_cached(cfg, target, sources, observers, params, cache)?;
    Ok(SolverPlan {
        mode: PlanMode::Periodic,
        near,
        far: Some(far),
        build_time: t.elapsed(),
    })
}

/// Near-zone-only plan without images, for overhead comparisons.
pub fn build_free_space_plan(problem: &Problem, provider: &dyn SpectralTransformProvider) -> Result<SolverPlan> {
    let t = Instant::now();
    let params = SolverParams {
        i_d: 0,
        ..problem.params
    };
    let near = build_near_plan(&problem.cfg, &problem.target, &problem.sources, &problem.observers, &params, provider)?;
    Ok(SolverPlan {
        mode: PlanMode::FreeSpace,
        near,
        far: None,
        build_time: t.elapsed(),
    })
}

pub fn solve(plan: &SolverPlan, q: &[C64], provider: &dyn SpectralTransformProvider) -> Result<PotentialField> {
    let mut u = eval_near(&plan.near, q, provider)?;
    if let Some(far) = &plan.far {
        let uf = eval_far(far, q)?;
        for (a, b) in u.iter_mut().zip(uf) {
            *a += b;
        }
    }
    let field = PotentialField { values: u };
    if !field.is_finite() {
        return Err(PimError::Internal("solver produced non-finite potentials".to_string()));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::eval_direct;
    use crate::fft::RustFftProvider;
    use crate::model::{NearGrid, Periodicity};
    use crate::pgf::TruncationPolicy;
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> (SourcePointSet, ObserverPointSet) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pt = || -> [f64; 3] { std::array::from_fn(|_| rng.random_range(0.0..1.0)) };
        let pos: Vec<[f64; 3]> = (0..n).map(|_| pt()).collect();
        let obs: Vec<[f64; 3]> = (0..n / 4).map(|_| pt()).collect();
        let mut q: Vec<C64> = (0..n).map(|i| C64::new((i as f64 * 1.3).sin(), 0.0)).collect();
        let mean = q.iter().sum::<C64>() / n as f64;
        q.iter_mut().for_each(|v| *v -= mean);
        let rest: C64 = q[..n - 1].iter().sum();
        q[n - 1] = -rest;
        (SourcePointSet::new(pos, q).unwrap(), ObserverPointSet::new(obs))
    }

    #[test]
    fn solve_matches_oracle_on_small_cloud() {
        let (src, obs) = cloud(400, 3);
        let problem = Problem {
            cfg: PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]),
            target: TargetBox::cube(1.0),
            sources: src,
            observers: obs,
            params: SolverParams {
                near_grid: NearGrid::Fixed([13; 3]),
                near_order: 3,
                er_range_boxes: 4,
                ..SolverParams::default()
            },
        };
        let provider = RustFftProvider::new();
        let plan = build_plan(&problem, &provider).unwrap();
        let u = solve(&plan, problem.sources.amplitudes(), &provider).unwrap();
        let reference = eval_direct(&problem.cfg, &problem.sources, &problem.observers, &TruncationPolicy::with_tol(1e-12))
            .into_values()
            .unwrap();
        let scale = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = u.values.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 2e-3 * scale, "error {err} vs scale {scale}");
    }

    #[test]
    fn invalid_problem_is_rejected_before_build() {
        let (src, obs) = cloud(8, 1);
        let problem = Problem {
            cfg: PeriodicityConfig::npsp(Periodicity::P1D, [0.5, 1.0, 1.0]),
            target: TargetBox::cube(1.0),
            sources: src,
            observers: obs,
            params: SolverParams::default(),
        };
        match build_plan(&problem, &RustFftProvider::new()) {
            Err(PimError::Validation(issues)) => assert!(issues.iter().any(|s| s.contains("exceeds period"))),
            other => panic!("unexpected {other:?}"),
        }
    }
}
