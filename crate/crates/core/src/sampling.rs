//! Uniform candidate generation in balls and axis-aligned boxes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `n` points drawn uniformly from the closed ball of `radius` around `center`.
///
/// The direction is a normalized standard-normal vector and the radius is
/// scaled by `u^(1/d)`, `u ~ U(0, 1]`, which is exactly uniform in any
/// dimension.
pub fn sample_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = center.len();
    let inv_d = 1.0 / d as f64;
    (0..n)
        .map(|_| {
            let mut dir: Vec<f64> = loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                if v.iter().any(|x: &f64| *x != 0.0) {
                    break v;
                }
            };
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = radius * u.powf(inv_d);
            dir.iter_mut().zip(center).for_each(|(x, c)| *x = c + *x / norm * r);
            dir
        })
        .collect()
}

/// `n` points drawn uniformly from the box `[lower, upper]`.
pub fn sample_box<R: Rng + ?Sized>(lower: &[f64], upper: &[f64], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect()
        })
        .collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_request() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_ball(&[0.0, 0.0], 1.0, 0, &mut rng).is_empty());
    }

    #[test]
    fn points_stay_inside_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=6 {
            let center: Vec<f64> = (0..d).map(|i| i as f64 - 2.0).collect();
            for p in sample_ball(&center, 0.7, 2000, &mut rng) {
                assert_eq!(p.len(), d);
                assert!(distance(&p, &center) <= 0.7 + 1e-12);
            }
        }
    }

    #[test]
    fn disk_area_ratio() {
        // P(|p - c| <= r/2) = 1/4 in two dimensions.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = sample_ball(&[1.0, -1.0], 2.0, 100_000, &mut rng);
        let inner = pts.iter().filter(|p| distance(p, &[1.0, -1.0]) <= 1.0).count();
        let frac = inner as f64 / pts.len() as f64;
        assert!((frac - 0.25).abs() < 0.01, "inner fraction {frac}");
    }

    #[test]
    fn ball_is_isotropic_in_higher_dimensions() {
        // In d = 5 the mean of each coordinate is 0 and the volume fraction
        // inside half the radius is 2^-5.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = sample_ball(&[0.0; 5], 1.0, 100_000, &mut rng);
        let inner = pts.iter().filter(|p| distance(p, &[0.0; 5]) <= 0.5).count() as f64 / 1e5;
        assert!((inner - 1.0 / 32.0).abs() < 0.003, "inner fraction {inner}");
        for k in 0..5 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / 1e5;
            assert!(mean.abs() < 0.01);
        }
    }

    #[test]
    fn box_samples_are_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in sample_box(&[-9.0, -7.0], &[14.0, 17.0], 5000, &mut rng) {
            assert!((-9.0..=14.0).contains(&p[0]) && (-7.0..=17.0).contains(&p[1]));
        }
    }
}
