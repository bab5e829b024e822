//! Monte Carlo convexity measure of a region: the probability that the
//! segment between two independent draws from the region stays inside it.

use rand::Rng;

use crate::rng::RngStream;

/// Segment checks used when callers have no preference.
pub const DEFAULT_SEGMENT_CHECKS: usize = 16;

/// Estimates the convexity measure of the region described by `contains`.
///
/// `sampler` must draw from the input density restricted to the region.
/// Each segment is tested at `segment_checks` evenly spaced interior points.
pub fn estimate_convexity_measure<C, S>(
    contains: C,
    mut sampler: S,
    pairs: usize,
    segment_checks: usize,
    stream: &RngStream,
) -> f64
where
    C: Fn(&[f64]) -> bool,
    S: FnMut(&mut rand_chacha::ChaCha8Rng) -> Vec<f64>,
{
    if pairs == 0 {
        return 1.0;
    }
    let mut rng = stream.rng();
    let mut inside = 0usize;
    let mut point = Vec::new();
    for _ in 0..pairs {
        let x = sampler(&mut rng);
        let y = sampler(&mut rng);
        let ok = (1..=segment_checks).all(|k| {
            let t = k as f64 / (segment_checks + 1) as f64;
            point.clear();
            point.extend(x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b));
            contains(&point)
        });
        inside += usize::from(ok);
    }
    inside as f64 / pairs as f64
}

/// Uniform draw from the ball of `radius` around `centre`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, centre: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = centre.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
            return v.iter().zip(centre).map(|(a, c)| c + radius * a).collect();
        }
    }
}
