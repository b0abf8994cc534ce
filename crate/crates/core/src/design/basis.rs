use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

/// Radial basis family.
///
/// * exponential: `exp(-h / r^2)`; larger `r` is more global.
/// * gaussian: `exp(-(h r)^2)`; smaller `r` is more global.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Exponential,
    Gaussian,
}

impl BasisKind {
    #[inline]
    pub fn eval(self, h: f64, r: f64) -> f64 {
        match self {
            BasisKind::Exponential => (-h / (r * r)).exp(),
            BasisKind::Gaussian => {
                let s = h * r;
                (-(s * s)).exp()
            }
        }
    }

    /// The `r` at which the basis takes `value` at distance `h`.
    fn r_for_value(self, h: f64, value: f64) -> f64 {
        let decay = -value.ln();
        match self {
            BasisKind::Exponential => (h / decay).sqrt(),
            BasisKind::Gaussian => decay.sqrt() / h,
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::Exponential => "exponential",
            BasisKind::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(BasisKind::Exponential),
            "gaussian" | "gaus" => Ok(BasisKind::Gaussian),
            other => Err(Error::invalid(format!("unknown basis '{other}'"))),
        }
    }
}

/// Radial basis value at distance `h`. Infinite distance maps to 0.
pub fn radial_basis(h: f64, r: f64, kind: BasisKind) -> Result<f64> {
    if h.is_nan() || h < 0.0 {
        return Err(Error::invalid(format!("distance must be non-negative, got {h}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("range parameter must be positive, got {r}")));
    }
    if h.is_infinite() {
        return Ok(0.0);
    }
    Ok(kind.eval(h, r))
}

/// Ordered candidate values of the range parameter.
///
/// Index 0 is always the most local option and the last index the most
/// global, whatever the basis kind. For the exponential basis the raw values
/// therefore increase with index; for the gaussian they decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSequence {
    kind: BasisKind,
    values: Vec<f64>,
}

impl RSequence {
    pub fn new(kind: BasisKind, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("range sequence is empty"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("range values must be positive and finite"));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        let oriented = match kind {
            BasisKind::Exponential => increasing,
            BasisKind::Gaussian => decreasing,
        };
        if values.len() > 1 && !oriented {
            return Err(Error::invalid(format!(
                "{kind} range values must run from local to global"
            )));
        }
        Ok(RSequence { kind, values })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Zero-based index of the initialisation default, the 1-based
    /// `ceil(R / 2)`-th option.
    pub fn middle(&self) -> usize {
        self.values.len().div_ceil(2) - 1
    }
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

const LOCAL_QUANTILE: f64 = 0.05;
const GLOBAL_QUANTILE: f64 = 0.95;
const LOCAL_VALUE: f64 = 0.1;
const GLOBAL_VALUE: f64 = 0.9;

/// Builds `count` range values spanning local to global influence.
///
/// With `q_lo`, `q_hi` the 5% and 95% quantiles of the finite off-diagonal
/// distances, the most local `r` makes the basis fall to 0.1 at `q_lo` and the
/// most global keeps it at 0.9 at `q_hi`. Intermediate values are spaced
/// geometrically.
pub fn r_sequence(h: &DistanceMatrix, count: usize, kind: BasisKind) -> Result<RSequence> {
    if count < 2 {
        return Err(Error::invalid(format!("range sequence needs at least 2 values, got {count}")));
    }
    let square = h.rows() == h.cols();
    let mut d: Vec<f64> = Vec::new();
    for i in 0..h.rows() {
        for (j, &v) in h.row(i).iter().enumerate() {
            if (!square || i != j) && v.is_finite() {
                d.push(v);
            }
        }
    }
    d.sort_by(f64::total_cmp);
    let smallest_positive = d.iter().copied().find(|&v| v > 0.0).ok_or_else(|| {
        Error::invalid("range sequence needs positive distances; all are zero or missing")
    })?;
    let q_lo = quantile(&d, LOCAL_QUANTILE).max(smallest_positive);
    let q_hi = quantile(&d, GLOBAL_QUANTILE).max(q_lo);

    let local = kind.r_for_value(q_lo, LOCAL_VALUE);
    let global = kind.r_for_value(q_hi, GLOBAL_VALUE);
    let (ln_a, ln_b) = (local.ln(), global.ln());
    let values = (0..count)
        .map(|i| (ln_a + (ln_b - ln_a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    RSequence::new(kind, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euclidean_distances, PointSet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_distance_is_one() {
        for kind in [BasisKind::Exponential, BasisKind::Gaussian] {
            for r in [0.1, 1.0, 7.0] {
                assert_eq!(radial_basis(0.0, r, kind).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn direct_substitution() {
        assert_relative_eq!(radial_basis(25.0, 5.0, BasisKind::Exponential).unwrap(), 0.367879, epsilon = 1e-6);
        assert_relative_eq!(radial_basis(2.0, 0.5, BasisKind::Gaussian).unwrap(), 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn infinite_distance_is_zero_and_negative_rejected() {
        assert_eq!(radial_basis(f64::INFINITY, 1.0, BasisKind::Gaussian).unwrap(), 0.0);
        assert!(radial_basis(-1.0, 1.0, BasisKind::Exponential).is_err());
    }

    fn random_candidates(seed: u64) -> DistanceMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> =
            (0..60).map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
        let set = PointSet::from_xy(&pts).unwrap();
        euclidean_distances(&set, &set).unwrap()
    }

    fn median_off_diagonal(h: &DistanceMatrix) -> f64 {
        let mut d = Vec::new();
        for i in 0..h.rows() {
            for j in 0..h.cols() {
                if i != j {
                    d.push(h.get(i, j));
                }
            }
        }
        d.sort_by(f64::total_cmp);
        quantile(&d, 0.5)
    }

    #[test]
    fn sequence_contract() {
        let h = random_candidates(1);
        for kind in [BasisKind::Exponential, BasisKind::Gaussian] {
            let seq = r_sequence(&h, 10, kind).unwrap();
            assert_eq!(seq.len(), 10);
            assert_eq!(seq.middle(), 4);
            assert!(seq.values().iter().all(|v| *v > 0.0));
            let increasing = seq.values().windows(2).all(|w| w[1] > w[0]);
            assert_eq!(increasing, kind == BasisKind::Exponential);
        }
    }

    #[test]
    fn sequence_spans_local_to_global_at_median() {
        for seed in 0..5 {
            let h = random_candidates(seed);
            let med = median_off_diagonal(&h);
            for kind in [BasisKind::Exponential, BasisKind::Gaussian] {
                let seq = r_sequence(&h, 10, kind).unwrap();
                let local = radial_basis(med, seq.get(0), kind).unwrap();
                let global = radial_basis(med, seq.get(9), kind).unwrap();
                assert!(global >= 0.9, "{kind} global value {global}");
                assert!(local <= 0.1, "{kind} local value {local}");
            }
        }
    }

    #[test]
    fn degenerate_distances_rejected() {
        let h = DistanceMatrix::from_row_major(2, 2, vec![0.0; 4], crate::geometry::MetricTag::Euclidean).unwrap();
        assert!(r_sequence(&h, 10, BasisKind::Exponential).is_err());
        assert!(r_sequence(&random_candidates(0), 1, BasisKind::Exponential).is_err());
    }

    #[test]
    fn middle_of_odd_and_even_lengths() {
        let seq = RSequence::new(BasisKind::Exponential, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(seq.middle(), 1);
        let seq = RSequence::new(BasisKind::Exponential, vec![1.0]).unwrap();
        assert_eq!(seq.middle(), 0);
    }

    proptest::proptest! {
        #[test]
        fn radial_in_unit_interval_and_monotone(h in 0.0f64..1e3, dh in 1e-6f64..10.0, r in 1e-2f64..50.0, dr in 1e-3f64..5.0) {
            for kind in [BasisKind::Exponential, BasisKind::Gaussian] {
                let v = radial_basis(h, r, kind).unwrap();
                proptest::prop_assert!((0.0..=1.0).contains(&v));
                proptest::prop_assert!(radial_basis(h + dh, r, kind).unwrap() <= v);
            }
            let hp = h + 1e-3;
            proptest::prop_assert!(radial_basis(hp, r + dr, BasisKind::Exponential).unwrap() >= radial_basis(hp, r, BasisKind::Exponential).unwrap());
            proptest::prop_assert!(radial_basis(hp, r + dr, BasisKind::Gaussian).unwrap() <= radial_basis(hp, r, BasisKind::Gaussian).unwrap());
        }
    }
}
