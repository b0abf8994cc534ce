use crate::error::{Error, Result};
use crate::geometry::{DistanceMatrix, PointSet};

/// How many pseudo-absence locations join the legal knot set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PseudoKnotCount {
    /// `ceil(f / (1 - f) * n_unique_presences)`, so pseudo knots make up
    /// roughly a fraction `f` of all legal knots.
    Fraction(f64),
    /// A fixed count, independent of the number of presences (50 in the
    /// Etosha configuration).
    Fixed(usize),
}

impl Default for PseudoKnotCount {
    fn default() -> Self {
        PseudoKnotCount::Fraction(0.2)
    }
}

/// Legal knot locations: unique presences first, then space-filled
/// pseudo-absences.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: PointSet,
    pub n_presence: usize,
    /// Index into the pseudo-absence set for each pseudo candidate.
    pub pseudo_indices: Vec<usize>,
}

pub fn build_candidate_knots(presences: &PointSet, pseudo: &PointSet, count: PseudoKnotCount) -> Result<CandidateSet> {
    if presences.is_empty() {
        return Err(Error::invalid("candidate knots need at least one presence"));
    }
    let unique = presences.dedup();
    let n_unique = unique.len();
    let wanted = match count {
        PseudoKnotCount::Fraction(f) => {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::invalid(format!("pseudo knot fraction must be in [0, 1), got {f}")));
            }
            (f / (1.0 - f) * n_unique as f64).ceil() as usize
        }
        PseudoKnotCount::Fixed(n) => n,
    }
    .min(pseudo.len());

    let pseudo_indices = if wanted == 0 {
        Vec::new()
    } else {
        let pts = pseudo.points();
        let start = nearest_to_centroid(pseudo);
        space_fill_by(pts.len(), start, wanted, |i, j| pts[i].distance(&pts[j]))
    };
    let points = PointSet::new(unique.points().to_vec())?.concat(&PointSet::new(
        pseudo_indices.iter().map(|&i| pseudo.get(i)).collect(),
    )?);
    Ok(CandidateSet { points, n_presence: n_unique, pseudo_indices })
}

fn nearest_to_centroid(points: &PointSet) -> usize {
    let c = points.centroid().expect("non-empty point set");
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.distance(&c) < points.get(best).distance(&c) {
            best = i;
        }
    }
    best
}

/// Maximin space-filling subset of `k` candidates.
///
/// Starts from the candidate nearest the centroid, adds the candidate farthest
/// from the current selection until `k` are chosen, then swaps members of the
/// closest pair for outside candidates while that strictly improves the
/// design (larger minimum separation, or equal separation attained by fewer
/// pairs). Ties go to the lowest index. Returned indices are sorted.
pub fn space_fill(candidates: &PointSet, k: usize, distance: &DistanceMatrix) -> Result<Vec<usize>> {
    let n = candidates.len();
    if distance.rows() != n || distance.cols() != n {
        return Err(Error::invalid("space filling needs a square candidate distance matrix"));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot select {k} knots from {n} candidates")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let start = nearest_to_centroid(candidates);
    Ok(space_fill_by(n, start, k, |i, j| distance.get(i, j)))
}

pub(crate) fn space_fill_by<F: Fn(usize, usize) -> f64>(n: usize, start: usize, k: usize, dist: F) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    if k == 1 {
        return vec![start];
    }
    let mut selected = vec![start];
    let mut in_set = vec![false; n];
    in_set[start] = true;
    let mut min_d: Vec<f64> = (0..n).map(|i| dist(i, start)).collect();
    while selected.len() < k {
        let mut best = None;
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            if best.is_none_or(|b: usize| min_d[i] > min_d[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("candidates remain");
        selected.push(b);
        in_set[b] = true;
        for i in 0..n {
            let d = dist(i, b);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }

    // Swap refinement on the bottleneck pair.
    let score = |set: &[usize]| -> (f64, usize) {
        let mut min = f64::INFINITY;
        let mut count = 0;
        for a in 0..set.len() {
            for b in (a + 1)..set.len() {
                let d = dist(set[a], set[b]);
                if d < min {
                    min = d;
                    count = 1;
                } else if d == min {
                    count += 1;
                }
            }
        }
        (min, count)
    };
    let better = |a: (f64, usize), b: (f64, usize)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
    let max_rounds = 10 * n;
    for _ in 0..max_rounds {
        let current = score(&selected);
        let mut pair = (0, 1);
        let mut pmin = f64::INFINITY;
        for a in 0..selected.len() {
            for b in (a + 1)..selected.len() {
                let d = dist(selected[a], selected[b]);
                if d < pmin {
                    pmin = d;
                    pair = (a, b);
                }
            }
        }
        let mut best: Option<(usize, usize, (f64, usize))> = None;
        for slot in [pair.0, pair.1] {
            let mut trial = selected.clone();
            for c in 0..n {
                if in_set[c] {
                    continue;
                }
                trial[slot] = c;
                let s = score(&trial);
                if better(s, current) && best.is_none_or(|(_, _, bs)| better(s, bs)) {
                    best = Some((slot, c, s));
                }
            }
        }
        match best {
            Some((slot, c, _)) => {
                in_set[selected[slot]] = false;
                in_set[c] = true;
                selected[slot] = c;
            }
            None => break,
        }
    }
    selected.sort_unstable();
    selected
}
