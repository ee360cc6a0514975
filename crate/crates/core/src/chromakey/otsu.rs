//! Otsu's threshold over a 256-bin depth histogram.
//!
//! Bins are uniform over `[min, max]` of the samples: value `v` falls in bin
//! `floor((v - min) * 256 / (max - min))`, clamped to 255. Candidate `t` in
//! `1..=255` puts bins `< t` in the near class and bins `>= t` in the far
//! class, which is the same as comparing `v >= min + t * (max - min) / 256`.
//! That threshold is a dyadic fraction of an integer range, so it is exact
//! in `f64` and the bin split and the value split never disagree.
//!
//! The between-class variance is compared in exact integer arithmetic, so the
//! "smallest maximizing threshold" tie-break is well defined.

use std::cmp::Ordering;

pub const OTSU_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuResult {
    /// Depth threshold in millimeters; the far class is `v >= threshold`.
    pub threshold: f64,
    /// Winning candidate bin (0 for degenerate, constant input).
    pub bin: usize,
    /// Between-class over total variance of the bin indices, in `[0, 1]`.
    pub separability: f64,
}

#[inline]
pub fn histogram_bin(v: u16, lo: u16, range: u32) -> usize {
    if range == 0 {
        return 0;
    }
    (((v - lo) as u64 * OTSU_BINS as u64) / range as u64).min(OTSU_BINS as u64 - 1) as usize
}

/// Threshold value of candidate bin `t` for samples spanning `[lo, lo + range]`.
#[inline]
pub fn bin_threshold(lo: u16, range: u32, t: usize) -> f64 {
    lo as f64 + (t as u64 * range as u64) as f64 / OTSU_BINS as f64
}

/// Compares `a / b` with `c / d` exactly (`b`, `d` > 0).
fn cmp_fraction(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    let mut flipped = false;
    loop {
        let (qa, qc) = (a / b, c / d);
        if qa != qc {
            let ord = qa.cmp(&qc);
            return if flipped { ord.reverse() } else { ord };
        }
        let (ra, rc) = (a % b, c % d);
        let ord = match (ra == 0, rc == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => {
                // a/b > c/d  <=>  b/ra < d/rc
                (a, b, c, d) = (b, ra, d, rc);
                flipped = !flipped;
                continue;
            }
        };
        return if flipped { ord.reverse() } else { ord };
    }
}

/// Otsu's method on depth samples (millimeters).
///
/// Panics on empty input.
pub fn otsu(samples: &[u16]) -> OtsuResult {
    assert!(!samples.is_empty(), "otsu needs at least one sample");
    let lo = *samples.iter().min().unwrap();
    let hi = *samples.iter().max().unwrap();
    let range = (hi - lo) as u32;
    if range == 0 {
        return OtsuResult { threshold: lo as f64, bin: 0, separability: 0.0 };
    }

    let mut hist = [0u64; OTSU_BINS];
    for &v in samples {
        hist[histogram_bin(v, lo, range)] += 1;
    }
    let n = samples.len() as u64;
    let total_sum: u64 = hist.iter().enumerate().map(|(b, &c)| b as u64 * c).sum();

    // sigma_b^2 * n^2 = (s0 n1 - s1 n0)^2 / (n0 n1) = (s0 n - S n0)^2 / (n0 n1)
    let mut best: Option<(usize, u128, u128)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 1..OTSU_BINS {
        n0 += hist[t - 1];
        s0 += (t as u64 - 1) * hist[t - 1];
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 as i128 * n as i128 - total_sum as i128 * n0 as i128).unsigned_abs();
        let num = diff * diff;
        let den = n0 as u128 * n1 as u128;
        match best {
            Some((_, bn, bd)) if cmp_fraction(num, den, bn, bd) != Ordering::Greater => {}
            _ => best = Some((t, num, den)),
        }
    }

    let (bin, num, den) = best.expect("min and max land in bins 0 and 255");
    let sq_sum: u128 = hist.iter().enumerate().map(|(b, &c)| (b * b) as u128 * c as u128).sum();
    let total_var = n as u128 * sq_sum - (total_sum as u128).pow(2);
    let separability = if total_var == 0 { 0.0 } else { (num as f64 / den as f64) / total_var as f64 };
    OtsuResult { threshold: bin_threshold(lo, range, bin), bin, separability: separability.min(1.0) }
}

/// Convenience wrapper returning only the threshold.
pub fn otsu_threshold(samples: &[u16]) -> f64 {
    otsu(samples).threshold
}
