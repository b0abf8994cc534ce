use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;
use crate::ppm::PpmDataset;

/// Observed-minus-expected score of one knot region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScore {
    pub candidate: usize,
    pub observed: f64,
    pub expected: f64,
    pub score: f64,
    pub n_points: usize,
}

/// Partitions the data points by their nearest legal remaining candidate and
/// scores each region by `|O - E|`.
///
/// `O` counts presence rows (already expanded by multiplicity); `E` sums
/// `lambda * w` over the region's pseudo-absence rows. `distances` is
/// data × candidates under the model's metric. Sorted by descending score,
/// ties to the lower candidate index.
pub fn knot_region_residuals(
    data: &PpmDataset,
    distances: &DistanceMatrix,
    intensity: &[f64],
    legal_remaining: &[usize],
) -> Result<Vec<RegionScore>> {
    if legal_remaining.is_empty() {
        return Err(Error::invalid("no legal candidate locations remain"));
    }
    if distances.rows() != data.len() || intensity.len() != data.len() {
        return Err(Error::invalid("residual inputs disagree on the number of data points"));
    }
    if let Some(&c) = legal_remaining.iter().find(|&&c| c >= distances.cols()) {
        return Err(Error::invalid(format!("candidate {c} outside the distance matrix")));
    }
    let mut sorted = legal_remaining.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut regions: Vec<RegionScore> = sorted
        .iter()
        .map(|&c| RegionScore { candidate: c, observed: 0.0, expected: 0.0, score: 0.0, n_points: 0 })
        .collect();
    for i in 0..data.len() {
        let row = distances.row(i);
        let mut best = 0;
        for (slot, &c) in sorted.iter().enumerate() {
            if row[c] < row[sorted[best]] {
                best = slot;
            }
        }
        let r = &mut regions[best];
        r.n_points += 1;
        if data.is_presence[i] {
            r.observed += 1.0;
        } else {
            r.expected += intensity[i] * data.w[i];
        }
    }
    for r in &mut regions {
        r.score = (r.observed - r.expected).abs();
    }
    regions.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.candidate.cmp(&b.candidate)));
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euclidean_distances, PointSet};
    use crate::ppm::assemble_dataset;

    fn dataset() -> PpmDataset {
        // Three presences near x = 0, four pseudo-absences; two near each candidate.
        let pres = PointSet::from_xy(&[(0.0, 0.1), (0.1, 0.0), (0.0, 0.0)]).unwrap();
        let pseudo = PointSet::from_xy(&[(0.2, 0.0), (0.0, 0.2), (1.0, 0.1), (1.1, 0.0)]).unwrap();
        assemble_dataset(&pres, &pseudo, 4.0, Vec::new()).unwrap()
    }

    #[test]
    fn arithmetic_example() {
        let data = dataset();
        let cands = PointSet::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let d = euclidean_distances(&data.points, &cands).unwrap();
        // w = 1 for every pseudo point: E1 = 0.6 + 0.6, E2 = 0.15 + 0.15.
        let lambda = vec![0.0, 0.0, 0.0, 0.6, 0.6, 0.15, 0.15];
        let r = knot_region_residuals(&data, &d, &lambda, &[0, 1]).unwrap();
        assert_eq!(r[0].candidate, 0);
        assert!((r[0].score - 1.8).abs() < 1e-12);
        assert!((r[1].score - 0.3).abs() < 1e-12);
        assert_eq!(r.iter().map(|x| x.n_points).sum::<usize>(), data.len());
        assert_eq!(r.iter().map(|x| x.observed).sum::<f64>(), 3.0);
    }

    #[test]
    fn perfect_fit_scores_zero() {
        let data = dataset();
        let cands = PointSet::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let d = euclidean_distances(&data.points, &cands).unwrap();
        let lambda = vec![0.0, 0.0, 0.0, 1.5, 1.5, 0.0, 0.0];
        let r = knot_region_residuals(&data, &d, &lambda, &[0, 1]).unwrap();
        assert!(r.iter().all(|x| x.score.abs() < 1e-12));
    }

    #[test]
    fn empty_remaining_is_an_error() {
        let data = dataset();
        let cands = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let d = euclidean_distances(&data.points, &cands).unwrap();
        assert!(knot_region_residuals(&data, &d, &[1.0; 7], &[]).is_err());
    }
}
