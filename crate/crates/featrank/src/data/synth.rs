//! Deterministic synthetic datasets for experiments and tests.
//!
//! Everything here is a pure function of its arguments, so fixtures are
//! reproducible across machines.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::Dense2D;
use crate::rng::rng_from_seed;

/// Two-class Gaussian blobs centered at `±center` on every coordinate.
pub fn gaussian_blobs(n: usize, d: usize, center: f64, std: f64, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, std).expect("std must be finite");
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let sign = if label == 0 { -1.0 } else { 1.0 };
        for _ in 0..d {
            data.push(sign * center + normal.sample(&mut rng));
        }
        y.push(label);
    }
    Dataset::new(Dense2D::from_vec(n, d, data)?, y)
}

/// Standard-normal features where the label is the majority sign of the sum
/// over `informative` columns: 1 when the sum is positive, else 0. All other
/// columns are pure noise.
pub fn signal_noise(n: usize, d: usize, informative: &[usize], seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let sum: f64 = informative.iter().map(|&j| row[j]).sum();
        y.push(if sum > 0.0 { 1 } else { 0 });
        data.extend(row);
    }
    Dataset::new(Dense2D::from_vec(n, d, data)?, y)
}

const GRID: usize = 28;

/// Segment rectangles (row range, col range) of a seven-segment glyph placed
/// in the middle of the 28x28 canvas.
const SEGMENTS: [(usize, usize, usize, usize); 7] = [
    (5, 8, 8, 20),   // A: top bar
    (5, 14, 17, 20), // B: upper right
    (14, 23, 17, 20), // C: lower right
    (20, 23, 8, 20), // D: bottom bar
    (14, 23, 8, 11), // E: lower left
    (5, 14, 8, 11),  // F: upper left
    (12, 15, 8, 20), // G: middle bar
];

const DIGIT_SEGMENTS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],    // 0: ABCDEF
    &[1, 2],                // 1: BC
    &[0, 1, 6, 4, 3],       // 2: ABGED
    &[0, 1, 6, 2, 3],       // 3: ABGCD
    &[5, 6, 1, 2],          // 4: FGBC
    &[0, 5, 6, 2, 3],       // 5: AFGCD
    &[0, 5, 6, 4, 3, 2],    // 6: AFGEDC
    &[0, 1, 2],             // 7: ABC
    &[0, 1, 2, 3, 4, 5, 6], // 8: all
    &[0, 1, 2, 3, 5, 6],    // 9: ABCDFG
];

/// Ten-class digit images at MNIST geometry (28x28, features in `[0, 1]`).
///
/// Glyphs are seven-segment digits with per-image translation jitter and
/// intensity variation; the background is mostly exact zeros with sparse
/// low positive noise. Classes cycle `0..=9`, so counts are balanced.
pub fn grid_digits(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let d = GRID * GRID;
    let mut rng = rng_from_seed(seed);
    let background = Normal::new(-noise, noise.max(1e-12)).unwrap();
    let speckle = Normal::new(0.0, 0.05).unwrap();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let digit = i % 10;
        let dy = rng.random_range(-2i64..=2);
        let dx = rng.random_range(-2i64..=2);
        let intensity: f64 = rng.random_range(0.65..1.0);

        let mut image = vec![0.0f64; d];
        for p in image.iter_mut() {
            *p = background.sample(&mut rng).max(0.0).min(1.0);
        }
        for &s in DIGIT_SEGMENTS[digit] {
            let (r0, r1, c0, c1) = SEGMENTS[s];
            for r in r0..r1 {
                for c in c0..c1 {
                    let rr = r as i64 + dy;
                    let cc = c as i64 + dx;
                    if (0..GRID as i64).contains(&rr) && (0..GRID as i64).contains(&cc) {
                        let v = intensity + speckle.sample(&mut rng);
                        image[rr as usize * GRID + cc as usize] = v.clamp(0.0, 1.0);
                    }
                }
            }
        }
        data.extend(image);
        y.push(digit);
    }
    Dataset::new(Dense2D::from_vec(n, d, data)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(
            gaussian_blobs(20, 2, 2.0, 0.5, 3).unwrap(),
            gaussian_blobs(20, 2, 2.0, 0.5, 3).unwrap()
        );
        assert_eq!(
            signal_noise(20, 6, &[0, 2], 3).unwrap(),
            signal_noise(20, 6, &[0, 2], 3).unwrap()
        );
        assert_eq!(
            grid_digits(20, 0.2, 3).unwrap(),
            grid_digits(20, 0.2, 3).unwrap()
        );
    }

    #[test]
    fn signal_noise_labels_follow_majority_sign() {
        let ds = signal_noise(50, 5, &[1, 3], 9).unwrap();
        for i in 0..ds.n() {
            let sum = ds.x().get(i, 1) + ds.x().get(i, 3);
            assert_eq!(ds.y()[i], usize::from(sum > 0.0));
        }
    }

    #[test]
    fn grid_digits_shape_and_balance() {
        let ds = grid_digits(100, 0.2, 5).unwrap();
        assert_eq!(ds.feature_count(), 784);
        assert_eq!(ds.class_count(), 10);
        for c in 0..10 {
            assert_eq!(ds.y().iter().filter(|&&l| l == c).count(), 10);
        }
        assert!(ds.x().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // background corner stays mostly dark
        let zeros = (0..ds.n()).filter(|&i| ds.x().get(i, 0) == 0.0).count();
        assert!(zeros > 50, "corner pixel should usually be exactly 0, got {zeros}");
    }
}
