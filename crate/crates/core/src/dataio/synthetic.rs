//! Seeded generator for labeled point clouds with the ingestion schema.
//!
//! Each class draws coordinates, intensity and color from its own
//! distribution (ground classes near z = 0, vegetation green, buildings
//! tall and grey, cars small and brightly colored, artefacts noisy) with
//! enough overlap that classifiers do not reach perfect accuracy. Class
//! frequencies are imbalanced.

use super::{Dataset, PointRecord};
use crate::numerics::SeededRng;

/// Class frequencies used by [`generate`], indexed by class.
pub const CLASS_WEIGHTS: [f64; 8] = [0.22, 0.18, 0.17, 0.07, 0.20, 0.06, 0.03, 0.07];

pub fn generate(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = SeededRng::new(seed);
    let records: Vec<PointRecord<f64>> = (0..n)
        .map(|_| {
            let label = pick_class(&mut rng);
            point(label, &mut rng)
        })
        .collect();
    Dataset::from_records(&records).expect("generated records are valid")
}

fn pick_class(rng: &mut SeededRng) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (c, &w) in CLASS_WEIGHTS.iter().enumerate() {
        acc += w;
        if u < acc {
            return c;
        }
    }
    CLASS_WEIGHTS.len() - 1
}

fn color(rng: &mut SeededRng, base: [f64; 3], spread: f64) -> [f64; 3] {
    base.map(|c| (c + spread * rng.normal()).clamp(0.0, 255.0).round())
}

fn point(label: usize, rng: &mut SeededRng) -> PointRecord<f64> {
    let mut x = rng.uniform(-50.0, 50.0);
    let mut y = rng.uniform(-50.0, 50.0);
    let (z, intensity, rgb) = match label {
        // man-made terrain
        0 => (
            0.15 * rng.normal(),
            -900.0 + 150.0 * rng.normal(),
            color(rng, [125.0, 125.0, 120.0], 20.0),
        ),
        // natural terrain
        1 => (
            0.3 + 0.3 * rng.normal(),
            -1100.0 + 200.0 * rng.normal(),
            color(rng, [130.0, 110.0, 80.0], 25.0),
        ),
        // high vegetation
        2 => (
            rng.uniform(3.0, 15.0),
            -1300.0 + 200.0 * rng.normal(),
            color(rng, [60.0, 95.0, 50.0], 20.0),
        ),
        // low vegetation
        3 => (
            rng.uniform(0.2, 2.0),
            -1200.0 + 200.0 * rng.normal(),
            color(rng, [85.0, 115.0, 60.0], 25.0),
        ),
        // buildings
        4 => {
            x = rng.uniform(15.0, 50.0);
            (
                rng.uniform(0.0, 20.0),
                -700.0 + 250.0 * rng.normal(),
                color(rng, [170.0, 160.0, 150.0], 30.0),
            )
        }
        // hard scape
        5 => (
            rng.uniform(0.0, 3.0),
            -800.0 + 250.0 * rng.normal(),
            color(rng, [140.0, 140.0, 140.0], 35.0),
        ),
        // scanning artefacts
        6 => (
            rng.uniform(-1.0, 10.0),
            -1000.0 + 500.0 * rng.normal(),
            [rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0)]
                .map(f64::round),
        ),
        // cars
        _ => {
            y = rng.uniform(-12.0, -4.0);
            let paint = [rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0)];
            (
                rng.uniform(0.0, 1.8),
                -600.0 + 300.0 * rng.normal(),
                color(rng, paint, 15.0),
            )
        }
    };
    PointRecord {
        x,
        y,
        z,
        intensity: intensity.round(),
        r: rgb[0],
        g: rgb[1],
        b: rgb[2],
        label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_imbalanced() {
        let a = generate(5000, 3);
        assert_eq!(a, generate(5000, 3));
        let counts = a.class_counts();
        assert!(counts.iter().all(|&c| c > 0));
        assert!(counts[0] > 4 * counts[6]);
        assert!(a.features().iter_rows().all(|r| (0.0..=255.0).contains(&r[4])));
    }
}
