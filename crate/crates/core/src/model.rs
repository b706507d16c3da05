//! Domain types shared by the solver: lattice configuration, point sets,
//! solver parameters and problem validation.

use num_complex::Complex64;

use crate::error::{PimError, Result};

pub type C64 = Complex64;
pub type Vec3 = [f64; 3];

/// Number of periodic directions. Periodic axes are x, then x,y, then x,y,z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Periodicity {
    P1D,
    P2D,
    P3D,
}

impl Periodicity {
    pub fn count(self) -> usize {
        match self {
            Periodicity::P1D => 1,
            Periodicity::P2D => 2,
            Periodicity::P3D => 3,
        }
    }

    pub fn is_periodic(self, axis: usize) -> bool {
        axis < self.count()
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            1 => Some(Periodicity::P1D),
            2 => Some(Periodicity::P2D),
            3 => Some(Periodicity::P3D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Helmholtz kernel, k0 != 0.
    Dynamic,
    /// Coulomb kernel with a linear phase shift, k0 = 0 and kshift != 0.
    StaticShifted,
    /// No-phase static periodic case, k0 = kshift = 0. Requires neutral sources.
    Npsp,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Dynamic => "dynamic",
            Regime::StaticShifted => "static-shifted",
            Regime::Npsp => "npsp",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = PimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dynamic" => Ok(Regime::Dynamic),
            "static-shifted" | "static_shifted" | "staticshifted" => Ok(Regime::StaticShifted),
            "npsp" => Ok(Regime::Npsp),
            other => Err(PimError::InvalidInput(format!("unknown regime '{other}'"))),
        }
    }
}

/// Lattice, wavenumbers and regime of the periodic array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityConfig {
    pub dim: Periodicity,
    /// Lattice periods; entries beyond `dim` are ignored.
    pub lattice: Vec3,
    pub k0: C64,
    /// Per-axis phase-shift wavenumbers.
    pub kshift: [C64; 3],
    pub regime: Regime,
}

impl PeriodicityConfig {
    pub fn new(dim: Periodicity, lattice: Vec3, k0: C64, kshift: [C64; 3], regime: Regime) -> Self {
        Self {
            dim,
            lattice,
            k0,
            kshift,
            regime,
        }
    }

    /// Builds a config whose regime follows from the wavenumbers.
    pub fn inferred(dim: Periodicity, lattice: Vec3, k0: C64, kshift: [C64; 3]) -> Self {
        let mut cfg = Self::new(dim, lattice, k0, kshift, Regime::Dynamic);
        cfg.regime = if k0 != C64::new(0.0, 0.0) {
            Regime::Dynamic
        } else if cfg.phase_free() {
            Regime::Npsp
        } else {
            Regime::StaticShifted
        };
        cfg
    }

    pub fn npsp(dim: Periodicity, lattice: Vec3) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self::new(dim, lattice, zero, [zero; 3], Regime::Npsp)
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.dim.is_periodic(axis)
    }

    pub fn periodic_axes(&self) -> std::ops::Range<usize> {
        0..self.dim.count()
    }

    /// Largest period over the periodic axes.
    pub fn max_period(&self) -> f64 {
        self.periodic_axes()
            .map(|a| self.lattice[a])
            .fold(0.0, f64::max)
    }

    /// True when no phase shift acts on a periodic axis.
    fn phase_free(&self) -> bool {
        self.periodic_axes()
            .all(|a| self.kshift[a] == C64::new(0.0, 0.0))
    }

    /// Phase weight exp(-j sum_a k_a0 i_a L_a) of the image with integer offsets `image`.
    pub fn image_phase(&self, image: [i64; 3]) -> C64 {
        let mut arg = C64::new(0.0, 0.0);
        for a in self.periodic_axes() {
            if image[a] != 0 {
                arg += self.kshift[a] * (image[a] as f64 * self.lattice[a]);
            }
        }
        (-C64::i() * arg).exp()
    }

    /// Physical offset of the image with integer offsets `image`.
    pub fn image_offset(&self, image: [i64; 3]) -> Vec3 {
        let mut off = [0.0; 3];
        for a in self.periodic_axes() {
            off[a] = image[a] as f64 * self.lattice[a];
        }
        off
    }
}

/// Extent of the source/observer cloud; all points live in [0, D_x]x[0, D_y]x[0, D_z].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBox {
    pub extent: Vec3,
}

impl TargetBox {
    pub fn new(extent: Vec3) -> Self {
        Self { extent }
    }

    pub fn cube(d: f64) -> Self {
        Self { extent: [d; 3] }
    }

    /// An axis with zero extent carries a single grid plane.
    pub fn is_active(&self, axis: usize) -> bool {
        self.extent[axis] > 0.0
    }

    pub fn active_axes(&self) -> usize {
        (0..3).filter(|&a| self.is_active(a)).count()
    }

    fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| {
            let tol = 1e-12 * self.extent[a].max(1.0);
            p[a] >= -tol && p[a] <= self.extent[a] + tol
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourcePointSet {
    positions: Vec<Vec3>,
    amplitudes: Vec<C64>,
}

impl SourcePointSet {
    pub fn new(positions: Vec<Vec3>, amplitudes: Vec<C64>) -> Result<Self> {
        if positions.len() != amplitudes.len() {
            return Err(PimError::InvalidInput(format!(
                "{} source positions but {} amplitudes",
                positions.len(),
                amplitudes.len()
            )));
        }
        Ok(Self {
            positions,
            amplitudes,
        })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_charge(&self) -> C64 {
        self.amplitudes.iter().sum()
    }

    pub fn with_amplitudes(&self, amplitudes: Vec<C64>) -> Result<Self> {
        Self::new(self.positions.clone(), amplitudes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverPointSet {
    positions: Vec<Vec3>,
}

impl ObserverPointSet {
    pub fn new(positions: Vec<Vec3>) -> Self {
        Self { positions }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Potentials aligned with an [`ObserverPointSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub values: Vec<C64>,
}

impl PotentialField {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearGrid {
    Auto,
    Fixed([usize; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Near-image half-width, shared by every periodic axis.
    pub i_d: usize,
    pub far_order: usize,
    pub far_grid: [usize; 3],
    pub near_order: usize,
    pub near_grid: NearGrid,
    /// Relative truncation tolerance of the PGF series.
    pub series_tol: f64,
    /// Radius of the error-correction neighborhood, in boxes.
    pub er_range_boxes: usize,
    /// NPSP neutrality tolerance, relative to sum |q_n|.
    pub neutrality_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            i_d: 1,
            far_order: 3,
            far_grid: [10, 10, 10],
            near_order: 2,
            near_grid: NearGrid::Auto,
            series_tol: 1e-10,
            er_range_boxes: 1,
            neutrality_tol: 1e-12,
        }
    }
}

/// Near-zone grid heuristic: smallest n with n^d >= 1.15 N, rounded up to an odd
/// count, on each of the d active axes. Degenerate axes get one plane.
pub fn auto_near_grid(n_points: usize, bx: &TargetBox) -> [usize; 3] {
    let d = bx.active_axes().max(1) as i32;
    let target = 1.15 * n_points.max(1) as f64;
    let mut n = target.powf(1.0 / d as f64).ceil() as usize;
    // guard against powf rounding just below an exact power
    while (n as f64).powi(d) < target {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64).powi(d) >= target {
        n -= 1;
    }
    if n.is_multiple_of(2) {
        n += 1;
    }
    let n = n.max(3);
    let mut dims = [1; 3];
    for (a, dim) in dims.iter_mut().enumerate() {
        if bx.is_active(a) {
            *dim = n;
        }
    }
    dims
}

/// Effective near grid dims for a problem: degenerate axes collapse to one plane.
pub fn resolve_near_grid(params: &SolverParams, bx: &TargetBox, n_points: usize) -> [usize; 3] {
    match params.near_grid {
        NearGrid::Auto => auto_near_grid(n_points, bx),
        NearGrid::Fixed(d) => collapse_degenerate(d, bx),
    }
}

pub fn collapse_degenerate(dims: [usize; 3], bx: &TargetBox) -> [usize; 3] {
    let mut out = dims;
    for (a, v) in out.iter_mut().enumerate() {
        if !bx.is_active(a) {
            *v = 1;
        }
    }
    out
}

/// Every invariant violation found in a problem. Empty means solvable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.issues.iter().any(|s| s.contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(PimError::Validation(self.issues))
        }
    }
}

fn finite3(p: &Vec3) -> bool {
    p.iter().all(|v| v.is_finite())
}

fn cfinite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

pub fn validate_problem(
    cfg: &PeriodicityConfig,
    bx: &TargetBox,
    src: &SourcePointSet,
    obs: &ObserverPointSet,
    params: &SolverParams,
) -> ValidationReport {
    let mut issues = Vec::new();
    const AXES: [char; 3] = ['x', 'y', 'z'];

    for a in cfg.periodic_axes() {
        let l = cfg.lattice[a];
        if !(l.is_finite() && l > 0.0) {
            issues.push(format!("lattice period L_{} must be positive, got {l}", AXES[a]));
        }
    }
    if !cfinite(cfg.k0) || cfg.kshift.iter().any(|k| !cfinite(*k)) {
        issues.push("wavenumbers must be finite".to_string());
    }
    let zero = C64::new(0.0, 0.0);
    let phase_free = cfg.phase_free();
    match cfg.regime {
        Regime::Npsp => {
            if cfg.k0 != zero || !phase_free {
                issues.push("regime npsp requires k0 = 0 and zero phase shift".to_string());
            }
        }
        Regime::StaticShifted => {
            if cfg.k0 != zero {
                issues.push("regime static-shifted requires k0 = 0".to_string());
            }
            if phase_free {
                issues.push("regime static-shifted requires a nonzero phase shift".to_string());
            }
        }
        Regime::Dynamic => {
            if cfg.k0 == zero {
                issues.push("regime dynamic requires k0 != 0".to_string());
            }
        }
    }

    for a in 0..3 {
        let d = bx.extent[a];
        if !(d.is_finite() && d >= 0.0) {
            issues.push(format!("target box extent D_{} must be non-negative, got {d}", AXES[a]));
        } else if cfg.is_periodic(a) && d > cfg.lattice[a] {
            issues.push(format!(
                "target box exceeds period on {}: D = {d} > L = {}",
                AXES[a], cfg.lattice[a]
            ));
        }
    }

    if src.is_empty() {
        issues.push("source set is empty".to_string());
    }
    if obs.is_empty() {
        issues.push("observer set is empty".to_string());
    }
    if let Some(i) = src.positions().iter().position(|p| !finite3(p) || !bx.contains(p)) {
        issues.push(format!("source {i} lies outside the target box"));
    }
    if let Some(i) = obs.positions().iter().position(|p| !finite3(p) || !bx.contains(p)) {
        issues.push(format!("observer {i} lies outside the target box"));
    }
    if src.amplitudes().iter().any(|q| !cfinite(*q)) {
        issues.push("source amplitudes must be finite".to_string());
    }
    if cfg.regime == Regime::Npsp && !src.is_empty() {
        let total = src.total_charge().norm();
        let scale: f64 = src.amplitudes().iter().map(|q| q.norm()).sum();
        if total > params.neutrality_tol * scale {
            issues.push(format!(
                "neutrality violated: |sum q| = {total:e} exceeds {:e} * sum |q|",
                params.neutrality_tol
            ));
        }
    }

    if params.i_d < 1 {
        issues.push("i_d must be at least 1 for the far-zone engine".to_string());
    }
    if !(params.series_tol > 0.0 && params.series_tol < 1.0) {
        issues.push(format!("series_tol must lie in (0, 1), got {}", params.series_tol));
    }
    if params.er_range_boxes < 1 {
        issues.push("er_range_boxes must be at least 1".to_string());
    }
    if params.far_order > crate::grid::MAX_ORDER || params.near_order > crate::grid::MAX_ORDER {
        issues.push(format!("interpolation orders are limited to {}", crate::grid::MAX_ORDER));
    }
    if bx.active_axes() == 0 {
        issues.push("target box has no extent".to_string());
    }
    for a in 0..3 {
        if !bx.is_active(a) {
            continue;
        }
        let g = params.far_grid[a];
        if g < 2 {
            issues.push(format!("far grid needs at least 2 points on {}", AXES[a]));
        } else if params.far_order + 1 > g {
            issues.push(format!(
                "far_order {} needs at least {} far grid points on {}",
                params.far_order,
                params.far_order + 1,
                AXES[a]
            ));
        }
    }

    let n_points = src.len().max(obs.len());
    let near = resolve_near_grid(params, bx, n_points);
    let mut max_spacing: f64 = 0.0;
    for a in 0..3 {
        if !bx.is_active(a) {
            continue;
        }
        if near[a] < 2 {
            issues.push(format!("near grid needs at least 2 points on {}", AXES[a]));
            continue;
        }
        if params.near_order + 1 > near[a] {
            issues.push(format!(
                "near_order {} needs at least {} near grid points on {}",
                params.near_order,
                params.near_order + 1,
                AXES[a]
            ));
        }
        max_spacing = max_spacing.max(bx.extent[a] / (near[a] - 1) as f64);
    }
    let d_er = params.er_range_boxes as f64 * max_spacing;
    for a in cfg.periodic_axes() {
        if d_er >= cfg.lattice[a] - d_er {
            issues.push(format!(
                "error-correction range {d_er} too large for period L_{} = {}",
                AXES[a], cfg.lattice[a]
            ));
        }
    }

    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn simple(cfg: PeriodicityConfig, q: Vec<C64>) -> ValidationReport {
        let n = q.len();
        let pos: Vec<Vec3> = (0..n).map(|i| [0.1 * i as f64, 0.2, 0.3]).collect();
        let src = SourcePointSet::new(pos, q).unwrap();
        let obs = ObserverPointSet::new(vec![[0.5, 0.5, 0.5]]);
        let params = SolverParams {
            near_grid: NearGrid::Fixed([5; 3]),
            ..SolverParams::default()
        };
        validate_problem(&cfg, &TargetBox::cube(1.0), &src, &obs, &params)
    }

    #[test]
    fn npsp_requires_neutral_sources() {
        let cfg = PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]);
        let r = simple(cfg, vec![c(1.0, 0.0)]);
        assert!(r.contains("neutrality violated"), "{r:?}");
        let r = simple(cfg, vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn dynamic_inside_box_is_clean() {
        let cfg = PeriodicityConfig::inferred(
            Periodicity::P2D,
            [1.0; 3],
            c(1.0, -0.1),
            [c(0.3, 0.0); 3],
        );
        assert_eq!(cfg.regime, Regime::Dynamic);
        assert!(simple(cfg, vec![c(1.0, 0.0), c(2.0, 1.0)]).is_ok());
    }

    #[test]
    fn box_larger_than_period_is_reported() {
        let cfg = PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]);
        let src = SourcePointSet::new(vec![[0.0; 3], [1.5, 0.0, 0.0]], vec![c(1.0, 0.0), c(-1.0, 0.0)])
            .unwrap();
        let obs = ObserverPointSet::new(vec![[0.5, 0.5, 0.5]]);
        let bx = TargetBox::new([2.0, 1.0, 1.0]);
        let r = validate_problem(&cfg, &bx, &src, &obs, &SolverParams::default());
        assert!(r.contains("target box exceeds period"), "{r:?}");
    }

    #[test]
    fn validation_is_pure() {
        let cfg = PeriodicityConfig::npsp(Periodicity::P3D, [1.0; 3]);
        let a = simple(cfg, vec![c(1.0, 0.0)]);
        let b = simple(cfg, vec![c(1.0, 0.0)]);
        assert_eq!(a, b);
    }

    #[test]
    fn regime_mismatch_and_bad_params() {
        let mut cfg = PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]);
        cfg.k0 = c(1.0, 0.0);
        let src = SourcePointSet::new(vec![[0.2; 3], [2.0; 3]], vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let obs = ObserverPointSet::new(vec![]);
        let params = SolverParams {
            i_d: 0,
            far_order: 12,
            ..SolverParams::default()
        };
        let r = validate_problem(&cfg, &TargetBox::cube(1.0), &src, &obs, &params);
        assert!(r.contains("regime npsp"));
        assert!(r.contains("outside the target box"));
        assert!(r.contains("observer set is empty"));
        assert!(r.contains("i_d must be at least 1"));
        assert!(r.contains("far_order 12"));
    }

    #[test]
    fn auto_grid_matches_reference_sizes() {
        let bx = TargetBox::cube(1.0);
        assert_eq!(auto_near_grid(53601, &bx), [41; 3]);
        assert_eq!(auto_near_grid(3096, &bx), [17; 3]);
        // remaining reference pairs are reproduced within one odd step
        for (n, g) in [(12175, 25), (92233, 49), (177973, 59), (418308, 77)] {
            let got = auto_near_grid(n, &bx)[0] as i64;
            assert!((got - g).abs() <= 2, "N={n}: {got} vs {g}");
        }
    }

    #[test]
    fn auto_grid_collapses_degenerate_axes() {
        let bx = TargetBox::new([1.0, 1.0, 0.0]);
        let g = auto_near_grid(1000, &bx);
        assert_eq!(g[2], 1);
        assert!(g[0] * g[1] >= 1150 && g[0] % 2 == 1);
    }

    #[test]
    fn image_phase_follows_shift() {
        let cfg = PeriodicityConfig::inferred(
            Periodicity::P1D,
            [2.0, 1.0, 1.0],
            c(1.0, 0.0),
            [c(1.0, -1.0), c(5.0, 0.0), c(0.0, 0.0)],
        );
        let p = cfg.image_phase([1, 7, 0]);
        let expect = (-C64::i() * c(1.0, -1.0) * 2.0).exp();
        assert!((p - expect).norm() < 1e-15);
        assert_eq!(cfg.image_offset([1, 7, 3]), [2.0, 0.0, 0.0]);
    }
}
