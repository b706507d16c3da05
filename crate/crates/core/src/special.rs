//! Complex special functions used by the spectral and lattice series:
//! the branch-fixed square root, H0^(2) and K0.
//!
//! K0 is the workhorse. It is evaluated by its ascending series for |z| <= 2,
//! by Steed's continued fraction (the Temme/Thompson-Barnett CF2 form) for
//! 2 < |z| < 30 and by the Hankel asymptotic expansion beyond. H0^(2) in the
//! closed lower half plane goes through the connection formula
//! H0^(2)(z) = (2j/pi) K0(jz), which keeps exponentially small values accurate
//! when z is close to the negative imaginary axis.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{PimError, Result};
use crate::model::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Radius below which the ascending K0 series is used.
pub const K0_SERIES_RADIUS: f64 = 2.0;
/// Radius above which the asymptotic expansion is used.
pub const K0_ASYMPTOTIC_RADIUS: f64 = 30.0;
/// Radius below which J0/Y0 use their power series (upper half plane only).
pub const J0_SERIES_RADIUS: f64 = 17.0;

/// Square root with non-positive imaginary part; on the real axis, Re >= 0.
pub fn sqrt_nonpos_imag(z: C64) -> C64 {
    let w = z.sqrt();
    if w.im > 0.0 || (w.im == 0.0 && w.re < 0.0) {
        -w
    } else {
        w
    }
}

/// Modified Bessel function K0 for Re z > 0.
pub fn bessel_k0(z: C64) -> Result<C64> {
    if !(z.re > 0.0) || !z.im.is_finite() {
        return Err(PimError::Domain(format!("K0 requires Re z > 0, got {z}")));
    }
    Ok(k0_unchecked(z))
}

/// K0 on the closed right half plane minus the origin; no argument checks.
pub(crate) fn k0_unchecked(z: C64) -> C64 {
    let r = z.norm();
    if r <= K0_SERIES_RADIUS {
        k0_series(z)
    } else if r < K0_ASYMPTOTIC_RADIUS {
        k0_continued_fraction(z)
    } else {
        k0_asymptotic(z)
    }
}

/// K0(x) for real x > 0, the hot path of the lattice series.
pub fn bessel_k0_real(x: f64) -> f64 {
    if x > 700.0 {
        return 0.0;
    }
    k0_unchecked(C64::new(x, 0.0)).re
}

pub fn k0_series(z: C64) -> C64 {
    let t = z * z * 0.25;
    let mut term = C64::new(1.0, 0.0);
    let mut i0 = term;
    let mut acc = C64::new(0.0, 0.0);
    let mut harmonic = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= t / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        let add = term * harmonic;
        acc += add;
        if term.norm() < 1e-18 * i0.norm() && add.norm() < 1e-18 * acc.norm().max(1e-300) {
            break;
        }
    }
    -((z * 0.5).ln() + EULER_GAMMA) * i0 + acc
}

pub fn k0_continued_fraction(z: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let mut b = (one + z) * 2.0;
    let mut d = one / b;
    let mut delh = d;
    let mut q1 = C64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = C64::new(a1, 0.0);
    let mut c = C64::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 1..5000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -c * a / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = one / (b + d * a);
        delh = (b * d - one) * delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    (C64::new(FRAC_PI_2, 0.0) / z).sqrt() * (-z).exp() / s
}

/// Sum of the asymptotic series sum_k a_k / w^k, truncated at its smallest term.
fn asymptotic_tail(w: C64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (-(odd * odd) / (8.0 * kf)) / w;
        let mag = next.norm();
        if mag > last {
            break;
        }
        term = next;
        sum += term;
        last = mag;
        if mag < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

pub fn k0_asymptotic(z: C64) -> C64 {
    (C64::new(FRAC_PI_2, 0.0) / z).sqrt() * (-z).exp() * asymptotic_tail(z)
}

/// Hankel asymptotic form of H0^(2), valid for -2pi < arg z < pi.
fn hankel2_asymptotic(z: C64) -> C64 {
    let w = C64::i() * z;
    // sqrt(jz) continued along arg z + pi/2 rather than the principal branch
    let phase = 0.5 * (z.arg() + FRAC_PI_2);
    let sqrt_w = C64::from_polar(z.norm().sqrt(), phase);
    C64::new(0.0, 2.0 / PI) * (FRAC_PI_2.sqrt() / sqrt_w) * (-w).exp() * asymptotic_tail(w)
}

/// J0 and Y0 by their ascending series.
pub fn j0_y0_series(z: C64) -> (C64, C64) {
    let t = -z * z * 0.25;
    let mut term = C64::new(1.0, 0.0);
    let mut j0 = term;
    let mut acc = C64::new(0.0, 0.0);
    let mut harmonic = 0.0;
    for k in 1..300 {
        let kf = k as f64;
        term *= t / (kf * kf);
        harmonic += 1.0 / kf;
        j0 += term;
        acc += term * harmonic;
        if term.norm() * harmonic.max(1.0) < 1e-18 * j0.norm().max(acc.norm()).max(1e-300) {
            break;
        }
    }
    let y0 = (2.0 / PI) * (((z * 0.5).ln() + EULER_GAMMA) * j0 - acc);
    (j0, y0)
}

/// Zeroth-order Hankel function of the second kind, H0^(2) = J0 - j Y0.
pub fn hankel2_0(z: C64) -> Result<C64> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(PimError::Domain("H0^(2) is singular at z = 0".to_string()));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(PimError::Domain(format!("H0^(2) argument not finite: {z}")));
    }
    let lower = z.im < 0.0 || (z.im == 0.0 && z.re > 0.0);
    if lower {
        Ok(C64::new(0.0, 2.0 / PI) * k0_unchecked(C64::i() * z))
    } else if z.norm() <= J0_SERIES_RADIUS {
        let (j0, y0) = j0_y0_series(z);
        Ok(j0 - C64::i() * y0)
    } else {
        Ok(hankel2_asymptotic(z))
    }
}
