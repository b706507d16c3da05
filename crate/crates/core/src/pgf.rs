//! Green's functions of the periodic array: the free-space kernel, truncated
//! image sums, the Floquet (spectral) series for phase-shifted and dynamic
//! problems, the lattice series for the no-phase static case, and the far-zone
//! kernel obtained by subtracting the near images from the total.
//!
//! The series are swept in shells: shell 0 is the m = 0 (or m = n = 0) term,
//! shell s collects every index with max(|m|, |n|) = s. Summation stops once
//! `consecutive_small` shells in a row contribute less than `tol` relative to
//! the running value.

use std::f64::consts::PI;

use crate::error::{PimError, Result};
use crate::model::{PeriodicityConfig, Periodicity, Regime, Vec3, C64};
use crate::special::{bessel_k0_real, hankel2_0, sqrt_nonpos_imag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub tol: f64,
    pub max_terms: usize,
    pub consecutive_small: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_terms: 1_000_000,
            consecutive_small: 3,
        }
    }
}

impl TruncationPolicy {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// A series evaluation. `converged == false` still carries the best-effort value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfSample {
    pub value: C64,
    pub terms_used: usize,
    pub converged: bool,
}

impl PgfSample {
    /// The value, or `NotConverged` when the term cap was hit.
    pub fn into_value(self) -> Result<C64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(PimError::NotConverged {
                terms: self.terms_used,
                last_rel: f64::NAN,
            })
        }
    }
}

/// Floquet wavenumbers of a configuration, computed per index on demand.
#[derive(Debug, Clone, Copy)]
pub struct FloquetWavenumbers {
    k0_sq: C64,
    kshift: [C64; 3],
    lattice: Vec3,
    anomaly_threshold: f64,
}

impl FloquetWavenumbers {
    pub fn new(cfg: &PeriodicityConfig) -> Self {
        Self {
            k0_sq: cfg.k0 * cfg.k0,
            kshift: cfg.kshift,
            lattice: cfg.lattice,
            anomaly_threshold: 1e-8 * 2.0 * PI / cfg.max_period(),
        }
    }

    pub fn anomaly_threshold(&self) -> f64 {
        self.anomaly_threshold
    }

    pub fn k_x(&self, m: i64) -> C64 {
        self.kshift[0] + 2.0 * PI * m as f64 / self.lattice[0]
    }

    pub fn k_y(&self, n: i64) -> C64 {
        self.kshift[1] + 2.0 * PI * n as f64 / self.lattice[1]
    }

    pub fn k_rho(&self, m: i64) -> C64 {
        let kx = self.k_x(m);
        sqrt_nonpos_imag(self.k0_sq - kx * kx)
    }

    pub fn k_z(&self, m: i64, n: i64) -> C64 {
        let kx = self.k_x(m);
        let ky = self.k_y(n);
        sqrt_nonpos_imag(self.k0_sq - kx * kx - ky * ky)
    }

    fn checked(&self, k: C64, index: (i64, i64)) -> Result<C64> {
        assert!(k.im <= 0.0, "Floquet root {k} violates the branch rule");
        if k.norm() < self.anomaly_threshold {
            return Err(PimError::WoodAnomaly {
                index,
                magnitude: k.norm(),
            });
        }
        Ok(k)
    }

    pub fn k_rho_checked(&self, m: i64) -> Result<C64> {
        self.checked(self.k_rho(m), (m, 0))
    }

    pub fn k_z_checked(&self, m: i64, n: i64) -> Result<C64> {
        self.checked(self.k_z(m, n), (m, n))
    }
}

fn norm3(r: &Vec3) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Free-space kernel exp(-j k0 |r|) / (4 pi |r|).
pub fn g0(r: Vec3, k0: C64) -> Result<C64> {
    let d = norm3(&r);
    if d == 0.0 {
        return Err(PimError::Domain("free-space kernel is singular at r = 0".to_string()));
    }
    Ok(g0_at_distance(d, k0))
}

#[inline]
pub(crate) fn g0_at_distance(d: f64, k0: C64) -> C64 {
    if k0.re == 0.0 && k0.im == 0.0 {
        C64::new(1.0 / (4.0 * PI * d), 0.0)
    } else {
        (-C64::i() * k0 * d).exp() / (4.0 * PI * d)
    }
}

/// Phase-weighted image sum over i_a in [-h_a, h_a] on the periodic axes.
pub fn pgf_image_sum(r: Vec3, cfg: &PeriodicityConfig, half_width: [usize; 3]) -> Result<C64> {
    image_sum(r, cfg, half_width, None)
}

/// Image sum that drops images within `skip_within` of the observer instead
/// of failing on them (self terms in the near-zone tables).
pub fn pgf_image_sum_excluding(r: Vec3, cfg: &PeriodicityConfig, half_width: [usize; 3], skip_within: f64) -> C64 {
    image_sum(r, cfg, half_width, Some(skip_within)).expect("coincident images are skipped")
}

fn image_sum(r: Vec3, cfg: &PeriodicityConfig, half_width: [usize; 3], skip_within: Option<f64>) -> Result<C64> {
    let mut h = [0i64; 3];
    for a in cfg.periodic_axes() {
        h[a] = half_width[a] as i64;
    }
    let mut sum = C64::new(0.0, 0.0);
    for ix in -h[0]..=h[0] {
        for iy in -h[1]..=h[1] {
            for iz in -h[2]..=h[2] {
                let image = [ix, iy, iz];
                let off = cfg.image_offset(image);
                let d = [r[0] - off[0], r[1] - off[1], r[2] - off[2]];
                let dist = norm3(&d);
                match skip_within {
                    Some(eps) if dist <= eps => continue,
                    None if dist == 0.0 => {
                        return Err(PimError::Domain(format!(
                            "observer coincides with image {image:?}"
                        )))
                    }
                    _ => {}
                }
                sum += cfg.image_phase(image) * g0_at_distance(dist, cfg.k0);
            }
        }
    }
    Ok(sum)
}

/// Shell-decomposed series.
trait ShellSeries {
    /// Contribution of shell `s` and the number of terms it used.
    fn shell(&self, s: usize) -> Result<(C64, usize)>;
}

fn sum_shells<S: ShellSeries>(series: &S, policy: &TruncationPolicy) -> Result<PgfSample> {
    let (mut sum, mut terms) = series.shell(0)?;
    let mut peak = sum.norm();
    let mut small = 0;
    let mut s = 1;
    loop {
        if terms >= policy.max_terms {
            return Ok(PgfSample {
                value: sum,
                terms_used: terms,
                converged: false,
            });
        }
        let (c, t) = series.shell(s)?;
        sum += c;
        terms += t;
        peak = peak.max(sum.norm());
        if c.norm() <= policy.tol * peak {
            small += 1;
            if small >= policy.consecutive_small {
                return Ok(PgfSample {
                    value: sum,
                    terms_used: terms,
                    converged: true,
                });
            }
        } else {
            small = 0;
        }
        s += 1;
    }
}

fn partial_sums_of<S: ShellSeries>(series: &S, shells: usize) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(shells + 1);
    let mut sum = C64::new(0.0, 0.0);
    for s in 0..=shells {
        sum += series.shell(s)?.0;
        out.push(sum);
    }
    Ok(out)
}

/// Wraps `v` into [-l/2, l/2], returning (wrapped, number of periods removed).
fn wrap(v: f64, l: f64) -> (f64, f64) {
    let k = (v / l).round();
    (v - k * l, k)
}

struct Spectral1D {
    fl: FloquetWavenumbers,
    x: f64,
    rho: f64,
    scale: C64,
}

impl ShellSeries for Spectral1D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let term = |m: i64| -> Result<C64> {
            let krho = self.fl.k_rho_checked(m)?;
            let kx = self.fl.k_x(m);
            Ok((-C64::i() * kx * self.x).exp() * hankel2_0(krho * self.rho)? * self.scale)
        };
        if s == 0 {
            Ok((term(0)?, 1))
        } else {
            let m = s as i64;
            Ok((term(m)? + term(-m)?, 2))
        }
    }
}

/// Visits every (m, n) with max(|m|, |n|) = s.
fn for_square_shell(s: usize, mut f: impl FnMut(i64, i64) -> Result<()>) -> Result<usize> {
    let s = s as i64;
    if s == 0 {
        f(0, 0)?;
        return Ok(1);
    }
    let mut count = 0;
    for m in -s..=s {
        f(m, -s)?;
        f(m, s)?;
        count += 2;
    }
    for n in (-s + 1)..s {
        f(-s, n)?;
        f(s, n)?;
        count += 2;
    }
    Ok(count)
}

struct Spectral2D {
    fl: FloquetWavenumbers,
    r: Vec3,
    area: f64,
}

impl ShellSeries for Spectral2D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let mut acc = C64::new(0.0, 0.0);
        let [x, y, z] = self.r;
        let n = for_square_shell(s, |m, n| {
            let kz = self.fl.k_z_checked(m, n)?;
            let phase = -C64::i() * (self.fl.k_x(m) * x + self.fl.k_y(n) * y + kz * z.abs());
            acc += phase.exp() / (2.0 * C64::i() * kz * self.area);
            Ok(())
        })?;
        Ok((acc, n))
    }
}

struct Spectral3D {
    fl: FloquetWavenumbers,
    r: Vec3,
    area: f64,
    lz: f64,
    kz0: C64,
}

impl ShellSeries for Spectral3D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let mut acc = C64::new(0.0, 0.0);
        let [x, y, z] = self.r;
        let j = C64::i();
        let one = C64::new(1.0, 0.0);
        let n = for_square_shell(s, |m, n| {
            let kz = self.fl.k_z_checked(m, n)?;
            let down = (-j * (kz - self.kz0) * self.lz).exp();
            let up = (-j * (kz + self.kz0) * self.lz).exp();
            for den in [one - down, one - up] {
                if den.norm() < 1e-12 {
                    return Err(PimError::WoodAnomaly {
                        index: (m, n),
                        magnitude: den.norm(),
                    });
                }
            }
            let stack = (-j * kz * z.abs()).exp()
                + down * (-j * kz * z).exp() / (one - down)
                + up * (j * kz * z).exp() / (one - up);
            let lateral = (-j * (self.fl.k_x(m) * x + self.fl.k_y(n) * y)).exp();
            acc += lateral * stack / (2.0 * j * kz * self.area);
            Ok(())
        })?;
        Ok((acc, n))
    }
}

enum SpectralSeries {
    One(Spectral1D),
    Two(Spectral2D),
    Three(Spectral3D),
}

impl ShellSeries for SpectralSeries {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        match self {
            SpectralSeries::One(a) => a.shell(s),
            SpectralSeries::Two(a) => a.shell(s),
            SpectralSeries::Three(a) => a.shell(s),
        }
    }
}

/// Builds the spectral series and the outer phase factor from z-wrapping (3D).
fn spectral_series(r: Vec3, cfg: &PeriodicityConfig) -> Result<(SpectralSeries, C64)> {
    if cfg.regime == Regime::Npsp {
        return Err(PimError::InvalidInput(
            "spectral series is undefined for the no-phase static case".to_string(),
        ));
    }
    let fl = FloquetWavenumbers::new(cfg);
    let [lx, ly, lz] = cfg.lattice;
    let one = C64::new(1.0, 0.0);
    match cfg.dim {
        Periodicity::P1D => {
            let rho = (r[1] * r[1] + r[2] * r[2]).sqrt();
            if rho == 0.0 {
                return Err(PimError::Domain(
                    "1D spectral series needs a nonzero transverse separation".to_string(),
                ));
            }
            let scale = one / (4.0 * C64::i() * lx);
            Ok((SpectralSeries::One(Spectral1D { fl, x: r[0], rho, scale }), one))
        }
        Periodicity::P2D => Ok((SpectralSeries::Two(Spectral2D { fl, r, area: lx * ly }), one)),
        Periodicity::P3D => {
            let (zw, k) = wrap(r[2], lz);
            let kz0 = cfg.kshift[2];
            let phase = (-C64::i() * kz0 * (k * lz)).exp();
            let series = Spectral3D {
                fl,
                r: [r[0], r[1], zw],
                area: lx * ly,
                lz,
                kz0,
            };
            Ok((SpectralSeries::Three(series), phase))
        }
    }
}

/// Floquet-mode representation of the PGF (dynamic and static-shifted regimes).
pub fn pgf_spectral(r: Vec3, cfg: &PeriodicityConfig, policy: &TruncationPolicy) -> Result<PgfSample> {
    let (series, phase) = spectral_series(r, cfg)?;
    let mut sample = sum_shells(&series, policy)?;
    sample.value *= phase;
    Ok(sample)
}

/// Number of extra K0 e-folds kept beyond ln(1/tol) in the inner lattice sums.
const INNER_SAFETY: f64 = 3.0;

/// Sum of K0(alpha * dist) over one lateral row (n) of images, centered on the
/// closest image, cut once the argument exceeds the smallest by ln(1/tol) + safety.
fn k0_row(alpha: f64, y: f64, ly: f64, zt: f64, cut: f64) -> Result<(f64, usize)> {
    let n0 = (-y / ly).round() as i64;
    let arg = |n: i64| alpha * (((n as f64) * ly + y).powi(2) + zt * zt).sqrt();
    let a0 = arg(n0);
    if a0 == 0.0 {
        return Err(PimError::Domain("lattice K0 argument vanishes".to_string()));
    }
    let limit = a0 + cut;
    let mut sum = bessel_k0_real(a0);
    let mut terms = 1;
    for dir in [-1i64, 1] {
        let mut n = n0 + dir;
        loop {
            let a = arg(n);
            if a > limit {
                break;
            }
            sum += bessel_k0_real(a);
            terms += 1;
            n += dir;
        }
    }
    Ok((sum, terms))
}

struct Lattice1D {
    lx: f64,
    x: f64,
    rho: f64,
}

impl ShellSeries for Lattice1D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let v = if s == 0 {
            -self.rho.ln() / (2.0 * PI * self.lx)
        } else {
            let m = s as f64;
            bessel_k0_real(2.0 * PI * m * self.rho / self.lx) * (2.0 * PI * m * self.x / self.lx).cos()
                / (PI * self.lx)
        };
        Ok((C64::new(v, 0.0), 1))
    }
}

fn log_trig(y: f64, ly: f64, dz: f64) -> Result<f64> {
    let e = (-2.0 * PI * dz.abs() / ly).exp();
    let arg = 1.0 - 2.0 * e * (2.0 * PI * y / ly).cos() + e * e;
    if !(arg > 0.0) {
        return Err(PimError::Domain("lattice logarithm argument vanishes".to_string()));
    }
    Ok(arg.ln())
}

struct Lattice2D {
    lattice: Vec3,
    r: Vec3,
    cut: f64,
}

impl ShellSeries for Lattice2D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let [lx, ly, _] = self.lattice;
        let [x, y, z] = self.r;
        if s == 0 {
            let v = -z.abs() / (2.0 * lx * ly) - log_trig(y, ly, z)? / (4.0 * PI * lx);
            return Ok((C64::new(v, 0.0), 1));
        }
        let m = s as f64;
        let alpha = 2.0 * PI * m / lx;
        let (row, terms) = k0_row(alpha, y, ly, z, self.cut)?;
        let v = row * (alpha * x).cos() / (PI * lx);
        Ok((C64::new(v, 0.0), terms))
    }
}

struct Lattice3D {
    lattice: Vec3,
    /// z already wrapped into [-Lz/2, Lz/2].
    r: Vec3,
    cut: f64,
    log_floor: f64,
}

impl ShellSeries for Lattice3D {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        let [lx, ly, lz] = self.lattice;
        let [x, y, z] = self.r;
        if s == 0 {
            let mut v = (z * z - z.abs() * lz) / (2.0 * lx * ly * lz);
            let k0 = (-z / lz).round() as i64;
            let mut logs = log_trig(y, ly, k0 as f64 * lz + z)?;
            let mut terms = 1;
            for dir in [-1i64, 1] {
                let mut k = k0 + dir;
                loop {
                    let dz = k as f64 * lz + z;
                    if (-2.0 * PI * dz.abs() / ly).exp() < self.log_floor {
                        break;
                    }
                    logs += log_trig(y, ly, dz)?;
                    terms += 1;
                    k += dir;
                }
            }
            v -= logs / (4.0 * PI * lx);
            return Ok((C64::new(v, 0.0), terms));
        }
        let m = s as f64;
        let alpha = 2.0 * PI * m / lx;
        // rows over k, each row summed over n; rows ordered outward from the closest
        let k0 = (-z / lz).round() as i64;
        let row_min = |k: i64| alpha * (k as f64 * lz + z).abs();
        let (first, mut terms) = k0_row(alpha, y, ly, k0 as f64 * lz + z, self.cut)?;
        let mut sum = first;
        let dy0 = (-y / ly).round() * ly + y;
        let dz0 = k0 as f64 * lz + z;
        let limit = alpha * (dy0 * dy0 + dz0 * dz0).sqrt() + self.cut;
        for dir in [-1i64, 1] {
            let mut k = k0 + dir;
            while row_min(k) <= limit {
                let (row, t) = k0_row(alpha, y, ly, k as f64 * lz + z, self.cut)?;
                sum += row;
                terms += t;
                k += dir;
            }
        }
        Ok((C64::new(sum * (alpha * x).cos() / (PI * lx), 0.0), terms))
    }
}

enum LatticeSeries {
    One(Lattice1D),
    Two(Lattice2D),
    Three(Lattice3D),
}

impl ShellSeries for LatticeSeries {
    fn shell(&self, s: usize) -> Result<(C64, usize)> {
        match self {
            LatticeSeries::One(a) => a.shell(s),
            LatticeSeries::Two(a) => a.shell(s),
            LatticeSeries::Three(a) => a.shell(s),
        }
    }
}

fn lattice_series(r: Vec3, cfg: &PeriodicityConfig, tol: f64) -> Result<LatticeSeries> {
    if cfg.regime != Regime::Npsp {
        return Err(PimError::InvalidInput(
            "lattice series applies only to the no-phase static case".to_string(),
        ));
    }
    let cut = (1.0 / tol).ln() + INNER_SAFETY;
    match cfg.dim {
        Periodicity::P1D => {
            let rho = (r[1] * r[1] + r[2] * r[2]).sqrt();
            if rho == 0.0 {
                return Err(PimError::Domain(
                    "1D lattice series needs a nonzero transverse separation".to_string(),
                ));
            }
            Ok(LatticeSeries::One(Lattice1D {
                lx: cfg.lattice[0],
                x: r[0],
                rho,
            }))
        }
        Periodicity::P2D => Ok(LatticeSeries::Two(Lattice2D {
            lattice: cfg.lattice,
            r,
            cut,
        })),
        Periodicity::P3D => {
            let (zw, _) = wrap(r[2], cfg.lattice[2]);
            Ok(LatticeSeries::Three(Lattice3D {
                lattice: cfg.lattice,
                r: [r[0], r[1], zw],
                cut,
                log_floor: tol * 1e-3,
            }))
        }
    }
}

/// Lattice (log plus K0) representation of the PGF for the no-phase static case.
/// Defined up to an additive constant; potentials of neutral sources do not depend on it.
pub fn pgf_lattice(r: Vec3, cfg: &PeriodicityConfig, policy: &TruncationPolicy) -> Result<PgfSample> {
    let series = lattice_series(r, cfg, policy.tol)?;
    sum_shells(&series, policy)
}

/// Total PGF, dispatched on the regime.
pub fn pgf_total(r: Vec3, cfg: &PeriodicityConfig, policy: &TruncationPolicy) -> Result<PgfSample> {
    match cfg.regime {
        Regime::Npsp => pgf_lattice(r, cfg, policy),
        Regime::Dynamic | Regime::StaticShifted => pgf_spectral(r, cfg, policy),
    }
}

/// Far-zone kernel: total PGF minus the images with |i_a| <= i_d.
pub fn pgf_far(r: Vec3, cfg: &PeriodicityConfig, i_d: usize, policy: &TruncationPolicy) -> Result<PgfSample> {
    let mut total = pgf_total(r, cfg, policy)?;
    total.value -= pgf_image_sum(r, cfg, [i_d; 3])?;
    Ok(total)
}

/// Cumulative partial sums S_0..S_shells of the total-PGF series at `r`.
pub fn partial_sums(r: Vec3, cfg: &PeriodicityConfig, shells: usize, inner_tol: f64) -> Result<Vec<C64>> {
    match cfg.regime {
        Regime::Npsp => partial_sums_of(&lattice_series(r, cfg, inner_tol)?, shells),
        Regime::Dynamic | Regime::StaticShifted => {
            let (series, phase) = spectral_series(r, cfg)?;
            Ok(partial_sums_of(&series, shells)?.into_iter().map(|v| v * phase).collect())
        }
    }
}
