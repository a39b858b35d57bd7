//! Sine and cosine of a whole feature block at once.
//!
//! Cody–Waite reduction by `pi/2` (three-part constant) followed by the usual
//! minimax kernels on `[-pi/4, pi/4]`, written branch-free so the loop
//! vectorizes. Accuracy is within a couple of ulps of the libm results for
//! `|x| <= REDUCTION_LIMIT`; blocks with larger angles fall back to libm.

// Coefficients keep their published digits.
#![allow(clippy::excessive_precision)]

use std::f64::consts::FRAC_2_PI as INV_PIO2;

const REDUCTION_LIMIT: f64 = 1.0e5;

const PIO2_1: f64 = 1.570_796_326_734_125_614_17e+00;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_2T: f64 = 2.022_266_248_795_950_631_54e-21;
/// `1.5 * 2^52`: adding and subtracting it rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-01;
const S2: f64 = 8.333_333_333_322_489_461_24e-03;
const S3: f64 = -1.984_126_982_985_794_931_34e-04;
const S4: f64 = 2.755_731_370_707_006_767_89e-06;
const S5: f64 = -2.505_076_025_340_686_341_95e-08;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-02;
const C2: f64 = -1.388_888_888_887_410_957_49e-03;
const C3: f64 = 2.480_158_728_947_672_941_78e-05;
const C4: f64 = -2.755_731_435_139_066_330_35e-07;
const C5: f64 = 2.087_572_321_298_174_827_90e-09;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn sin_cos_reduced(x: f64) -> (f64, f64) {
    let shifted = x * INV_PIO2 + ROUND_MAGIC;
    let quadrant = shifted.to_bits() & 3;
    let n = shifted - ROUND_MAGIC;

    let t = x - n * PIO2_1;
    let w = n * PIO2_2;
    let head = t - w;
    let tail = n * PIO2_2T - ((t - head) - w);
    let r = head - tail;

    let z = r * r;
    let sr = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    let s = r + z * r * (S1 + z * sr);
    let cr = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let one_minus = 1.0 - hz;
    let c = one_minus + (((1.0 - one_minus) - hz) + z * cr);

    let swap = quadrant & 1 == 1;
    let (sv, cv) = if swap { (c, s) } else { (s, c) };
    let sin_flip = (quadrant & 2) << 62;
    let cos_flip = ((quadrant + 1) & 2) << 62;
    (
        f64::from_bits(sv.to_bits() ^ sin_flip),
        f64::from_bits(cv.to_bits() ^ cos_flip),
    )
}

/// Replaces each angle in `cos_out` by `scale * cos(angle)` and writes
/// `scale * sin(angle)` to the matching slot of `sin_out`.
pub(crate) fn scaled_sin_cos_in_place(cos_out: &mut [f64], sin_out: &mut [f64], scale: f64) {
    debug_assert_eq!(cos_out.len(), sin_out.len());
    let large = cos_out
        .iter()
        .any(|a| a.is_nan() || a.abs() > REDUCTION_LIMIT);
    if large {
        for (c, s) in cos_out.iter_mut().zip(sin_out.iter_mut()) {
            let (sv, cv) = c.sin_cos();
            *c = scale * cv;
            *s = scale * sv;
        }
        return;
    }
    for (c, s) in cos_out.iter_mut().zip(sin_out.iter_mut()) {
        let (sv, cv) = sin_cos_reduced(*c);
        *c = scale * cv;
        *s = scale * sv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_libm() {
        let mut worst = 0.0f64;
        let mut x = -REDUCTION_LIMIT;
        let mut k = 0u64;
        while x <= REDUCTION_LIMIT {
            for v in [x, x * 1e-3, x * 1e-6] {
                let (s, c) = sin_cos_reduced(v);
                worst = worst.max((s - v.sin()).abs()).max((c - v.cos()).abs());
            }
            k += 1;
            x += 0.37 + (k % 7) as f64 * 0.013;
        }
        assert!(worst <= 4.0 * f64::EPSILON, "max deviation {worst:e}");
    }

    #[test]
    fn quadrant_boundaries() {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        for v in [
            0.0,
            -0.0,
            FRAC_PI_4,
            FRAC_PI_2,
            PI,
            -PI,
            1.5 * PI,
            2.0 * PI,
            1e-300,
        ] {
            let (s, c) = sin_cos_reduced(v);
            assert!((s - v.sin()).abs() <= 2.0 * f64::EPSILON, "sin {v}");
            assert!((c - v.cos()).abs() <= 2.0 * f64::EPSILON, "cos {v}");
        }
    }

    #[test]
    fn large_angles_use_libm() {
        let mut c = [1e7, 0.5];
        let mut s = [0.0; 2];
        scaled_sin_cos_in_place(&mut c, &mut s, 1.0);
        assert_eq!((s[0], c[0]), 1e7f64.sin_cos());
        assert_eq!((s[1], c[1]), 0.5f64.sin_cos());
    }
}
