//! Brute-force reference sums, one converged series evaluation per pair.

use rayon::prelude::*;

use crate::error::{PimError, Result};
use crate::model::{ObserverPointSet, PeriodicityConfig, SourcePointSet, Vec3, C64};
use crate::pgf::{pgf_far, pgf_image_sum, pgf_total, PgfSample, TruncationPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    pub observer: usize,
    pub source: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub values: Vec<C64>,
    pub worst_terms: usize,
    pub failures: Vec<PairFailure>,
}

impl OracleReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    /// Values, or the first failure as an error.
    pub fn into_values(self) -> Result<Vec<C64>> {
        match self.failures.into_iter().next() {
            None => Ok(self.values),
            Some(f) => Err(PimError::InvalidInput(format!(
                "reference sum failed for observer {} and source {}: {}",
                f.observer, f.source, f.reason
            ))),
        }
    }
}

/// Sum over all pairs with an arbitrary kernel returning a series sample.
pub fn eval_direct_with<F>(src: &SourcePointSet, obs: &ObserverPointSet, kernel: F) -> OracleReport
where
    F: Fn(Vec3) -> Result<PgfSample> + Sync,
{
    let rows: Vec<(C64, usize, Vec<PairFailure>)> = obs
        .positions()
        .par_iter()
        .enumerate()
        .map(|(m, rm)| {
            let mut acc = C64::new(0.0, 0.0);
            let mut worst = 0;
            let mut fails = Vec::new();
            for (n, (rn, q)) in src.positions().iter().zip(src.amplitudes()).enumerate() {
                let d: Vec3 = std::array::from_fn(|a| rm[a] - rn[a]);
                let fail = |reason: String| PairFailure {
                    observer: m,
                    source: n,
                    reason,
                };
                if d == [0.0; 3] {
                    fails.push(fail("observer coincides with source".to_string()));
                    continue;
                }
                match kernel(d) {
                    Ok(s) if s.converged && s.value.is_finite() => {
                        worst = worst.max(s.terms_used);
                        acc += s.value * q;
                    }
                    Ok(s) => fails.push(fail(format!("series not converged after {} terms", s.terms_used))),
                    Err(e) => fails.push(fail(e.to_string())),
                }
            }
            (acc, worst, fails)
        })
        .collect();
    let mut report = OracleReport {
        values: Vec::with_capacity(rows.len()),
        worst_terms: 0,
        failures: Vec::new(),
    };
    for (v, w, f) in rows {
        report.values.push(v);
        report.worst_terms = report.worst_terms.max(w);
        report.failures.extend(f);
    }
    report
}

/// u(r_m) = sum_n G^p(r_m - r_n) q_n.
pub fn eval_direct(cfg: &PeriodicityConfig, src: &SourcePointSet, obs: &ObserverPointSet, policy: &TruncationPolicy) -> OracleReport {
    eval_direct_with(src, obs, |r| pgf_total(r, cfg, policy))
}

/// Same sum with the image-subtracted far kernel.
pub fn eval_direct_farzone(
    cfg: &PeriodicityConfig,
    src: &SourcePointSet,
    obs: &ObserverPointSet,
    i_d: usize,
    policy: &TruncationPolicy,
) -> OracleReport {
    eval_direct_with(src, obs, |r| pgf_far(r, cfg, i_d, policy))
}

/// Direct sum over the |i| <= i_d images only.
pub fn eval_direct_near(cfg: &PeriodicityConfig, src: &SourcePointSet, obs: &ObserverPointSet, i_d: usize) -> OracleReport {
    eval_direct_with(src, obs, |r| {
        Ok(PgfSample {
            value: pgf_image_sum(r, cfg, [i_d; 3])?,
            terms_used: 1,
            converged: true,
        })
    })
}
