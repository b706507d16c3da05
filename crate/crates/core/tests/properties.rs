//! Split identity, NPSP gauge independence and thread-count determinism.

use pim_core::direct::{eval_direct, eval_direct_farzone, eval_direct_near, eval_direct_with};
use pim_core::fft::RustFftProvider;
use pim_core::pgf::{pgf_total, TruncationPolicy};
use pim_core::solver::{build_plan, solve, Problem};
use pim_core::study::{random_neutral_sources, separated_observers};
use pim_core::*;
use proptest::prelude::*;

fn policy() -> TruncationPolicy {
    TruncationPolicy::with_tol(1e-13)
}

fn assert_close(a: &[C64], b: &[C64], tol: f64) {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).norm() <= tol * scale, "{x} vs {y}");
    }
}

fn split_holds(cfg: &PeriodicityConfig, target: TargetBox, i_d: usize, seed: u64) {
    let src = random_neutral_sources(12, &target, seed);
    let obs = separated_observers(5, &target, &src, 0.05, seed);
    let total = eval_direct(cfg, &src, &obs, &policy()).into_values().unwrap();
    let far = eval_direct_farzone(cfg, &src, &obs, i_d, &policy()).into_values().unwrap();
    let near = eval_direct_near(cfg, &src, &obs, i_d).into_values().unwrap();
    let sum: Vec<C64> = far.iter().zip(&near).map(|(a, b)| a + b).collect();
    assert_close(&sum, &total, 1e-12);
}

#[test]
fn split_identity_npsp() {
    let target = TargetBox::cube(0.8);
    split_holds(&PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]), target, 1, 1);
    split_holds(&PeriodicityConfig::npsp(Periodicity::P2D, [1.0; 3]), target, 2, 2);
}

#[test]
fn split_identity_dynamic() {
    let cfg = PeriodicityConfig::inferred(
        Periodicity::P1D,
        [1.0; 3],
        C64::new(1.5, -0.2),
        [C64::new(0.4, -0.1), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
    );
    split_holds(&cfg, TargetBox::cube(0.8), 1, 3);
    split_holds(&cfg, TargetBox::cube(0.8), 3, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn npsp_gauge_offset_cancels(c_re in -5.0f64..5.0, c_im in -5.0f64..5.0, seed in 0u64..1000) {
        let cfg = PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]);
        let target = TargetBox::cube(0.9);
        let src = random_neutral_sources(10, &target, seed);
        let obs = separated_observers(4, &target, &src, 0.05, seed);
        let offset = C64::new(c_re, c_im);
        let base = eval_direct(&cfg, &src, &obs, &policy()).into_values().unwrap();
        let shifted = eval_direct_with(&src, &obs, |r| {
            let mut s = pgf_total(r, &cfg, &policy())?;
            s.value += offset;
            Ok(s)
        })
        .into_values()
        .unwrap();
        let scale = base.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let charge: f64 = src.amplitudes().iter().map(|q| q.norm()).sum();
        for (a, b) in shifted.iter().zip(&base) {
            prop_assert!((a - b).norm() <= 1e-12 * (scale + offset.norm() * charge));
        }
    }
}

fn run_with_threads(threads: usize, p: &Problem) -> Vec<C64> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let provider = RustFftProvider::new();
        let plan = build_plan(p, &provider).unwrap();
        solve(&plan, p.sources.amplitudes(), &provider).unwrap().values
    })
}

#[test]
fn output_is_identical_across_thread_counts() {
    let target = TargetBox::cube(1.0);
    let sources = random_neutral_sources(800, &target, 9);
    let observers = ObserverPointSet::new(sources.positions()[..200].to_vec());
    let p = Problem {
        cfg: PeriodicityConfig::npsp(Periodicity::P2D, [1.0; 3]),
        target,
        sources,
        observers,
        params: SolverParams::default(),
    };
    let one = run_with_threads(1, &p);
    assert_eq!(one, run_with_threads(3, &p));
    assert_eq!(one, run_with_threads(8, &p));
}
