#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salsa2d::geometry::{euclidean_distances, DistanceMatrix, Point, PointSet, Polygon};
use salsa2d::ppm::{assemble_dataset, generate_pseudo_absences, PpmDataset};
use salsa2d::salsa::{build_candidate_knots, PseudoKnotCount};

pub fn unit_square() -> Polygon {
    Polygon::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)).unwrap()
}

/// Relative intensity of the two-bump surface on the unit square.
pub fn two_bump_intensity(x: f64, y: f64) -> f64 {
    let b1 = (-((x - 0.3).powi(2) + (y - 0.3).powi(2)) / (2.0 * 0.08f64.powi(2))).exp();
    let b2 = 0.7 * (-((x - 0.7).powi(2) + (y - 0.65).powi(2)) / (2.0 * 0.12f64.powi(2))).exp();
    0.1 + b1 + b2
}

/// `n` presences drawn by rejection from `intensity` on the unit square.
pub fn sample_presences(n: usize, seed: u64, intensity: impl Fn(f64, f64) -> f64, peak: f64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        if rng.random::<f64>() * peak < intensity(x, y) {
            pts.push((x, y));
        }
    }
    PointSet::from_xy(&pts).unwrap()
}

pub struct Benchmark {
    pub presences: PointSet,
    pub pseudo: PointSet,
    pub data: PpmDataset,
    pub candidates: PointSet,
    pub data_dist: DistanceMatrix,
    pub cand_dist: DistanceMatrix,
}

impl Benchmark {
    pub fn from_presences(presences: PointSet, grid: usize) -> Self {
        let pseudo = generate_pseudo_absences(&unit_square(), None, 1.0 / (grid as f64 - 1.0)).unwrap();
        assert_eq!(pseudo.len(), grid * grid);
        let data = assemble_dataset(&presences, &pseudo, 1.0, Vec::new()).unwrap();
        let cands = build_candidate_knots(&presences, &pseudo, PseudoKnotCount::Fraction(0.2)).unwrap();
        let data_dist = euclidean_distances(&data.points, &cands.points).unwrap();
        let cand_dist = euclidean_distances(&cands.points, &cands.points).unwrap();
        Benchmark { presences, pseudo, data, candidates: cands.points, data_dist, cand_dist }
    }

    /// About 500 presences from the two-bump surface, 40 × 40 pseudo grid.
    pub fn two_bump(seed: u64) -> Self {
        Self::from_presences(sample_presences(500, seed, two_bump_intensity, 1.1), 40)
    }
}
