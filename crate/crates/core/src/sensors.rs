//! Rules choosing the next pair of boundary sensors from a posterior ensemble.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::PosteriorEnsemble;
use crate::heat::{FluxRing, PolarGrid};
use crate::par;
use crate::{Error, Result};

/// Two sensors on angular nodes. Equality via [`SensorPair::same_nodes`] ignores order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorPair(pub usize, pub usize);

impl SensorPair {
    pub fn new(a: usize, b: usize, n_theta: usize) -> Result<Self> {
        for i in [a, b] {
            if i >= n_theta {
                return Err(Error::SensorOutOfRange { index: i, n_theta });
            }
        }
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "sensor pair ({a}, {b}) is degenerate"
            )));
        }
        Ok(Self(a, b))
    }

    pub fn indices(&self) -> [usize; 2] {
        [self.0, self.1]
    }

    pub fn angles(&self, grid: &PolarGrid) -> [f64; 2] {
        [grid.angle(self.0), grid.angle(self.1)]
    }

    pub fn same_nodes(&self, other: &SensorPair) -> bool {
        (self.0 == other.0 && self.1 == other.1) || (self.0 == other.1 && self.1 == other.0)
    }
}

impl fmt::Display for SensorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Fixed,
    RandomEachRound,
    /// Circle sources only: move next to the posterior-mean center angle.
    PosteriorAngle,
    /// Move to the two nodes with the largest flux variance over the ensemble.
    MaxFluxVariance,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Fixed => "fixed",
            StrategyKind::RandomEachRound => "random-each-round",
            StrategyKind::PosteriorAngle => "posterior-angle",
            StrategyKind::MaxFluxVariance => "max-flux-variance",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleMean {
    #[default]
    Arithmetic,
    Circular,
}

fn mean_angle(omegas: &[f64], how: AngleMean) -> f64 {
    let n = omegas.len() as f64;
    match how {
        AngleMean::Arithmetic => omegas.iter().sum::<f64>() / n,
        AngleMean::Circular => {
            let (s, c) = omegas
                .iter()
                .fold((0.0, 0.0), |(s, c), w| (s + w.sin(), c + w.cos()));
            s.atan2(c).rem_euclid(TAU)
        }
    }
}

/// `(floor(w / h), ceil(w / h))` for the mean angle `w`, reduced mod `n_theta`.
/// An exact multiple `k h` gives `(k, k + 1)`.
pub fn posterior_angle_rule(omegas: &[f64], grid: &PolarGrid, how: AngleMean) -> Result<SensorPair> {
    if omegas.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    let w = mean_angle(omegas, how);
    pair_from_angle(w, grid)
}

pub fn pair_from_angle(w: f64, grid: &PolarGrid) -> Result<SensorPair> {
    let n = grid.n_theta() as i64;
    let x = w / grid.h_theta();
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("mean angle {w} is not finite")));
    }
    let lo = x.floor() as i64;
    let mut hi = x.ceil() as i64;
    if hi == lo {
        hi = lo + 1;
    }
    Ok(SensorPair(lo.rem_euclid(n) as usize, hi.rem_euclid(n) as usize))
}

/// Per-node flux variance over an ensemble of rings.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxVarianceMap {
    variances: Vec<f64>,
}

impl FluxVarianceMap {
    pub fn from_rings(rings: &[FluxRing]) -> Result<Self> {
        if rings.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                have: rings.len(),
            });
        }
        let n = rings[0].len();
        let count = rings.len() as f64;
        let variances = par::map_range(n, |k| {
            let mean = rings.iter().map(|r| r.values()[k]).sum::<f64>() / count;
            let ss: f64 = rings
                .iter()
                .map(|r| {
                    let d = r.values()[k] - mean;
                    d * d
                })
                .sum();
            ss / (count - 1.0)
        });
        Ok(Self { variances })
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Nodes of the largest and second-largest variance; ties go to the lower index.
    pub fn top_pair(&self) -> Result<SensorPair> {
        if self.variances.len() < 2 {
            return Err(Error::InvalidParameter("variance map needs two nodes".into()));
        }
        let mut order: Vec<usize> = (0..self.variances.len()).collect();
        order.sort_by(|&a, &b| self.variances[b].total_cmp(&self.variances[a]).then(a.cmp(&b)));
        Ok(SensorPair(order[0], order[1]))
    }
}

pub fn flux_variance_rule(ensemble: &PosteriorEnsemble, burn_in: f64) -> Result<SensorPair> {
    FluxVarianceMap::from_rings(ensemble.retained_rings(burn_in))?.top_pair()
}

/// Two distinct nodes drawn uniformly without replacement.
pub fn random_rule<R: Rng + ?Sized>(n_theta: usize, rng: &mut R) -> Result<SensorPair> {
    if n_theta < 2 {
        return Err(Error::InvalidParameter(format!("n_theta = {n_theta} < 2")));
    }
    let picked = rand::seq::index::sample(rng, n_theta, 2);
    Ok(SensorPair(picked.index(0), picked.index(1)))
}

/// True when `proposed` repeats a pair already used, in either order.
pub fn should_stop(history: &[SensorPair], proposed: &SensorPair) -> bool {
    history.iter().any(|p| p.same_nodes(proposed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn grid() -> PolarGrid {
        PolarGrid::new(33, 36).unwrap()
    }

    fn rings_from(values: &[Vec<f64>]) -> Vec<FluxRing> {
        values.iter().map(|v| FluxRing::new(v.clone(), 1.0)).collect()
    }

    #[test]
    fn pair_validation() {
        assert!(SensorPair::new(3, 3, 36).is_err());
        assert!(SensorPair::new(3, 36, 36).is_err());
        assert!(SensorPair::new(22, 30, 36)
            .unwrap()
            .same_nodes(&SensorPair(30, 22)));
    }

    #[test]
    fn angle_rule_fractional() {
        let p = posterior_angle_rule(&[0.55 * PI], &grid(), AngleMean::Arithmetic).unwrap();
        assert_eq!(p, SensorPair(9, 10));
    }

    #[test]
    fn angle_rule_exact_multiple() {
        let g = grid();
        let p = posterior_angle_rule(&[9.0 * g.h_theta()], &g, AngleMean::Arithmetic).unwrap();
        assert_eq!(p, SensorPair(9, 10));
        // exact multiple at the top of the range wraps
        let p = pair_from_angle(35.0 * g.h_theta(), &g).unwrap();
        assert_eq!(p, SensorPair(35, 0));
    }

    #[test]
    fn angle_rule_wraps_past_last_node() {
        let g = grid();
        let p = pair_from_angle(35.5 * g.h_theta(), &g).unwrap();
        assert_eq!(p, SensorPair(35, 0));
    }

    #[test]
    fn angle_rule_round_two_interval() {
        // any mean strictly between 10 h and 11 h gives the second-round pair
        let g = grid();
        for frac in [0.01, 0.5, 0.99] {
            let p = pair_from_angle((10.0 + frac) * g.h_theta(), &g).unwrap();
            assert_eq!(p, SensorPair(10, 11));
        }
    }

    #[test]
    fn angle_rule_uses_sample_mean() {
        let g = grid();
        let p = posterior_angle_rule(&[0.5 * PI, 0.6 * PI], &g, AngleMean::Arithmetic).unwrap();
        assert_eq!(p, SensorPair(9, 10));
        assert!(posterior_angle_rule(&[], &g, AngleMean::Arithmetic).is_err());
    }

    #[test]
    fn circular_mean_handles_the_cut() {
        let g = grid();
        let eps = 0.1 * g.h_theta();
        let samples = [eps, TAU - 3.0 * eps];
        // arithmetic mean lands near pi; circular mean near 0
        let a = posterior_angle_rule(&samples, &g, AngleMean::Arithmetic).unwrap();
        assert_eq!(a, SensorPair(17, 18));
        let c = posterior_angle_rule(&samples, &g, AngleMean::Circular).unwrap();
        assert_eq!(c, SensorPair(35, 0));
    }

    #[test]
    fn variance_rule_argmax() {
        let mut base = vec![0.0; 36];
        base[2] = 5.0_f64.sqrt();
        base[4] = 2.0_f64.sqrt();
        let neg: Vec<f64> = base.iter().map(|v| -v).collect();
        // two rings +v and -v: per-node variance is 2 v^2
        let rings = rings_from(&[base, neg]);
        let map = FluxVarianceMap::from_rings(&rings).unwrap();
        assert!((map.variances()[2] - 10.0).abs() < 1e-12);
        assert_eq!(map.top_pair().unwrap(), SensorPair(2, 4));
    }

    #[test]
    fn variance_rule_direct_map() {
        let mut v = vec![0.0; 36];
        v[2] = 5.0;
        v[4] = 2.0;
        let map = FluxVarianceMap { variances: v };
        assert_eq!(map.top_pair().unwrap(), SensorPair(2, 4));
    }

    #[test]
    fn variance_rule_ties_and_identical_rings() {
        let rings = rings_from(&[vec![1.5; 36], vec![1.5; 36], vec![1.5; 36]]);
        let map = FluxVarianceMap::from_rings(&rings).unwrap();
        assert!(map.variances().iter().all(|&v| v == 0.0));
        assert_eq!(map.top_pair().unwrap(), SensorPair(0, 1));

        let mut v = vec![1.0; 36];
        v[20] = 3.0;
        let map = FluxVarianceMap { variances: v };
        assert_eq!(map.top_pair().unwrap(), SensorPair(20, 0));
    }

    #[test]
    fn variance_rule_needs_two_rings() {
        assert!(FluxVarianceMap::from_rings(&rings_from(&[vec![0.0; 36]])).is_err());
        let ens = PosteriorEnsemble::default();
        assert!(flux_variance_rule(&ens, 0.2).is_err());
    }

    #[test]
    fn random_rule_small_and_seeded() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_rule(2, &mut rng).unwrap();
            assert!(p.same_nodes(&SensorPair(0, 1)));
        }
        let a = random_rule(36, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = random_rule(36, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(random_rule(1, &mut rng).is_err());
    }

    #[test]
    fn random_rule_is_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let draws = 10_000;
        let mut counts = [0usize; 36];
        for _ in 0..draws {
            let p = random_rule(36, &mut rng).unwrap();
            assert_ne!(p.0, p.1);
            counts[p.0] += 1;
            counts[p.1] += 1;
        }
        // each node appears in a draw with probability 1/18
        let prob = 1.0 / 18.0;
        let sd = (draws as f64 * prob * (1.0 - prob)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * prob).abs() < 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn stop_rule_examples() {
        let history = [SensorPair(4, 5), SensorPair(19, 20)];
        assert!(!should_stop(&history, &SensorPair(20, 21)));
        assert!(should_stop(&history, &SensorPair(4, 5)));
        assert!(should_stop(&history, &SensorPair(5, 4)));
        assert!(!should_stop(&[], &SensorPair(4, 5)));
    }

    #[test]
    fn reference_itinerary_stops_at_round_five() {
        // pairs used at T1..T4, then the suggestion for T5
        let used = [
            SensorPair(11, 5),
            SensorPair(28, 27),
            SensorPair(4, 5),
            SensorPair(19, 20),
        ];
        for k in 1..used.len() {
            assert!(!should_stop(&used[..k], &used[k]));
        }
        assert!(should_stop(&used, &SensorPair(4, 5)));
    }

    proptest! {
        #[test]
        fn angle_rule_gives_adjacent_distinct_nodes(w in 0.0f64..TAU, n in 4usize..72) {
            let g = PolarGrid::new(5, n).unwrap();
            let p = pair_from_angle(w, &g).unwrap();
            prop_assert!(p.0 < n && p.1 < n && p.0 != p.1);
            prop_assert_eq!((p.0 + 1) % n, p.1);
        }

        #[test]
        fn variance_rule_shift_invariant_and_rotation_equivariant(
            seed in any::<u64>(),
            shift in 0usize..36,
            offset in proptest::collection::vec(-5.0f64..5.0, 36),
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let raw: Vec<Vec<f64>> = (0..8).map(|_| (0..36).map(|_| rng.random::<f64>()).collect()).collect();
            let base = FluxVarianceMap::from_rings(&rings_from(&raw)).unwrap().top_pair().unwrap();

            let shifted: Vec<Vec<f64>> = raw.iter()
                .map(|r| r.iter().zip(&offset).map(|(a, b)| a + b).collect())
                .collect();
            let s = FluxVarianceMap::from_rings(&rings_from(&shifted)).unwrap().top_pair().unwrap();
            prop_assert_eq!(s, base);

            let rotated: Vec<Vec<f64>> = raw.iter()
                .map(|r| (0..36).map(|k| r[(k + 36 - shift) % 36]).collect())
                .collect();
            let rot = FluxVarianceMap::from_rings(&rings_from(&rotated)).unwrap().top_pair().unwrap();
            prop_assert_eq!(rot, SensorPair((base.0 + shift) % 36, (base.1 + shift) % 36));
        }

        #[test]
        fn stop_rule_is_monotone(
            hist in proptest::collection::vec((0usize..36, 0usize..36), 0..6),
            extra in proptest::collection::vec((0usize..36, 0usize..36), 0..6),
            a in 0usize..36, b in 0usize..36,
        ) {
            let h: Vec<SensorPair> = hist.iter().map(|&(x, y)| SensorPair(x, y)).collect();
            let mut bigger = h.clone();
            bigger.extend(extra.iter().map(|&(x, y)| SensorPair(x, y)));
            let p = SensorPair(a, b);
            if should_stop(&h, &p) {
                prop_assert!(should_stop(&bigger, &p));
            }
        }
    }
}
