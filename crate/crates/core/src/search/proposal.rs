use rand::Rng;
use rand_distr::StandardNormal;

use crate::testseq::SearchSpace;

/// Draws each dimension uniformly in its bounds, in dimension order.
pub fn propose_uniform<R: Rng + ?Sized>(rng: &mut R, domain: &SearchSpace) -> Vec<f64> {
    domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(&lo, &hi)| {
            let u: f64 = rng.random();
            lo + u * (hi - lo)
        })
        .collect()
}

/// Gaussian perturbation with standard deviation `step_fraction * (hi - lo)`
/// per dimension, reflected back into the bounds. One normal draw per
/// dimension, in dimension order, including zero-width dimensions.
pub fn propose_neighbor<R: Rng + ?Sized>(
    current: &[f64],
    rng: &mut R,
    domain: &SearchSpace,
    step_fraction: f64,
) -> Vec<f64> {
    current
        .iter()
        .zip(domain.lower.iter().zip(&domain.upper))
        .map(|(&x, (&lo, &hi))| {
            let z: f64 = rng.sample(StandardNormal);
            reflect(x + step_fraction * (hi - lo) * z, lo, hi)
        })
        .collect()
}

const MAX_BOUNCES: usize = 64;

/// Mirrors `x` at whichever bound it crosses until it lies in `[lo, hi]`.
pub fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    if lo == hi || !x.is_finite() {
        return lo;
    }
    for _ in 0..MAX_BOUNCES {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    // Far excursions (or widths near rounding scale): fold by the period.
    let width = hi - lo;
    let y = (x - lo).rem_euclid(2.0 * width);
    (lo + if y > width { 2.0 * width - y } else { y }).clamp(lo, hi)
}

/// Metropolis rule: improvements and ties are always accepted without
/// touching the generator; otherwise one uniform draw decides, with
/// probability `exp(-delta / temperature)`.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u < (-delta / temperature).exp()
}
