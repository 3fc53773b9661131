//! Synthetic images with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rapid_core::metrics::BinaryMask;
use rapid_core::{Image, LabelMap};

/// A gray image with its two-segment ground truth. Segment 1 is the ROI.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub image: Image,
    pub segments: LabelMap,
    pub mask: BinaryMask,
}

impl Fixture {
    fn from_region(width: u32, height: u32, noise: u8, seed: u64, lo: u8, hi: u8, inside: impl Fn(u32, u32) -> bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        let mut data = Vec::with_capacity(bits.capacity());
        for y in 0..height {
            for x in 0..width {
                let roi = inside(x, y);
                bits.push(roi);
                let base = if roi { hi } else { lo } as i32;
                let jitter = if noise > 0 { rng.gen_range(-(noise as i32)..=noise as i32) } else { 0 };
                data.push((base + jitter).clamp(0, 255) as u8);
            }
        }
        let segments = LabelMap::new(width, height, 2, bits.iter().map(|&b| b as u32).collect()).expect("two segments");
        Fixture {
            image: Image::new(width, height, 1, data).expect("fixture image"),
            segments,
            mask: BinaryMask { width, height, bits },
        }
    }
}

/// Dark left part (`x < edge`) and bright right part.
pub fn two_tone(width: u32, height: u32, edge: u32, lo: u8, hi: u8) -> Fixture {
    Fixture::from_region(width, height, 0, 0, lo, hi, |x, _| x >= edge)
}

/// A bright disk on a dark background with uniform noise of +-`noise`.
#[allow(clippy::too_many_arguments)]
pub fn disk(width: u32, height: u32, cx: f64, cy: f64, r: f64, lo: u8, hi: u8, noise: u8, seed: u64) -> Fixture {
    Fixture::from_region(width, height, noise, seed, lo, hi, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy < r * r
    })
}

/// Randomized two-region fixture: a disk or a straight edge at a random
/// position and angle, with random tones and noise.
pub fn random_two_region(seed: u64, width: u32, height: u32) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let lo = rng.gen_range(20..90u8);
    let hi = rng.gen_range(150..235u8);
    let noise = rng.gen_range(0..25u8);
    let (w, h) = (width as f64, height as f64);
    if rng.gen_bool(0.5) {
        let cx = rng.gen_range(0.3 * w..0.7 * w);
        let cy = rng.gen_range(0.3 * h..0.7 * h);
        let r = rng.gen_range(0.15..0.3) * w.min(h);
        disk(width, height, cx, cy, r, lo, hi, noise, seed)
    } else {
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (nx, ny) = (angle.cos(), angle.sin());
        let c = nx * rng.gen_range(0.35 * w..0.65 * w) + ny * rng.gen_range(0.35 * h..0.65 * h);
        Fixture::from_region(width, height, noise, seed, lo, hi, move |x, y| nx * x as f64 + ny * y as f64 > c)
    }
}

/// Uniform noise, optionally RGB.
pub fn noise(width: u32, height: u32, channels: u8, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(width, height, channels, |_, _, _| rng.gen()).expect("noise image")
}

/// Smooth random blobs: a sum of a few Gaussian bumps, quantized.
pub fn blobs(width: u32, height: u32, channels: u8, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..6);
    let bumps: Vec<(f64, f64, f64, [f64; 3])> = (0..k)
        .map(|_| {
            (
                rng.gen_range(0.0..width as f64),
                rng.gen_range(0.0..height as f64),
                rng.gen_range(0.1..0.4) * width.max(height) as f64,
                [rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0)],
            )
        })
        .collect();
    let base: f64 = rng.gen_range(60.0..190.0);
    Image::from_fn(width, height, channels, |x, y, c| {
        let mut v = base;
        for (bx, by, s, amp) in &bumps {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            v += amp[c as usize] * (-d2 / (2.0 * s * s)).exp();
        }
        v.clamp(0.0, 255.0) as u8
    })
    .expect("blob image")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tone_truth() {
        let f = two_tone(8, 2, 3, 10, 200);
        assert_eq!(f.image.pixel(2, 0), &[10]);
        assert_eq!(f.image.pixel(3, 1), &[200]);
        assert_eq!(f.mask.positives(), 10);
        assert_eq!(f.segments.get(3, 0), 1);
    }

    #[test]
    fn seeded_fixtures_repeat() {
        let a = random_two_region(7, 32, 32);
        let b = random_two_region(7, 32, 32);
        assert_eq!(a.image, b.image);
        assert!(a.mask.positives() > 0 && a.mask.positives() < 1024);
    }
}
