//! Gibbs sampling of signed networks.
//!
//! Sampling `Y_t` given `y_{t-1}` runs a random-scan Gibbs chain over the
//! dyad array: each toggle picks one dyad uniformly at random and redraws
//! its state from the conditional multinomial distribution, whose weights
//! are `exp(theta' Delta^{0->k})` for `k` in `{+, -, 0}`. Burn-in and the
//! retention interval are both measured in single-dyad toggles.
//!
//! Chains for different periods (and different estimation iterations or
//! bridge points) are independent: each gets its own ChaCha stream derived
//! deterministically from the seed, so results do not depend on thread
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DyadState, DyadicCovariates, NetworkSeries, SignedNetwork};
use crate::statistics::{change_term, eval_vector, ModelSpec, StatVector};

/// Initial state of a Gibbs chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainStart {
    /// Start from the observed network. [`sample_series`] resolves this to
    /// the period's observed network; [`sample_period`], which only sees the
    /// conditioning network, starts there instead.
    Observed,
    /// Start from the all-zero network.
    Empty,
    /// Start from an explicit network.
    Given(SignedNetwork),
}

/// Tuning of one sampling phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    /// Toggles discarded before retention starts.
    pub burn_in: usize,
    /// Toggles between retained samples (at least 1).
    pub interval: usize,
    /// Number of retained samples `M` (at least 1).
    pub sample_count: usize,
    pub start: ChainStart,
    pub seed: u64,
}

impl SamplerSettings {
    pub fn new(burn_in: usize, interval: usize, sample_count: usize, start: ChainStart, seed: u64) -> Result<Self> {
        let settings = SamplerSettings { burn_in, interval, sample_count, start, seed };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval < 1 {
            return Err(Error::InvalidSettings("sampler interval must be at least 1".into()));
        }
        if self.sample_count < 1 {
            return Err(Error::InvalidSettings("sampler must retain at least 1 network".into()));
        }
        Ok(())
    }
}

/// Networks retained from one chain, with the statistic of each retained
/// network (recomputed from scratch at retention time, so the chain can be
/// reproduced exactly from the stored networks) and toggle bookkeeping.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub networks: Vec<SignedNetwork>,
    pub stat_chain: Vec<StatVector>,
    /// Total toggles performed, including burn-in.
    pub toggles: usize,
    /// Toggles that changed a dyad state.
    pub changed: usize,
}

/// Purpose tag mixed into derived seeds so the estimation, variance, and
/// bridge samplers draw from disjoint randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerPhase {
    Estimation,
    Variance,
    Bridge,
    Gof,
    Simulate,
}

impl SamplerPhase {
    fn id(self) -> u64 {
        match self {
            SamplerPhase::Estimation => 1,
            SamplerPhase::Variance => 2,
            SamplerPhase::Bridge => 3,
            SamplerPhase::Gof => 4,
            SamplerPhase::Simulate => 5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for `(phase, counter)`, e.g. one estimation
/// iteration or one bridge point.
pub fn derive_seed(base: u64, phase: SamplerPhase, counter: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ phase.id()) ^ counter)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Conditional probabilities `(p_plus, p_minus, p_zero)` of dyad `(i, j)`
/// given the rest of the network. Invariant to the dyad's current state and
/// normalized to sum to one.
pub fn dyad_conditional(
    spec: &ModelSpec,
    theta: &[f64],
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
    i: usize,
    j: usize,
) -> Result<(f64, f64, f64)> {
    check_theta(spec, theta)?;
    let (lp, lm) = logodds(spec, theta, y, y_prev, covariates, i, j)?;
    Ok(softmax3(lp, lm))
}

fn check_theta(spec: &ModelSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.p() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} coordinates, spec has {}",
            theta.len(),
            spec.p()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("theta".into()));
    }
    Ok(())
}

/// `(theta' Delta^{0->+}, theta' Delta^{0->-})` without allocating.
fn logodds(
    spec: &ModelSpec,
    theta: &[f64],
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    let mut lp = 0.0;
    let mut lm = 0.0;
    for (q, term) in spec.terms().iter().enumerate() {
        if theta[q] == 0.0 {
            continue;
        }
        lp += theta[q] * change_term(term, y, y_prev, covariates, i, j, DyadState::Plus)?;
        lm += theta[q] * change_term(term, y, y_prev, covariates, i, j, DyadState::Minus)?;
    }
    Ok((lp, lm))
}

fn softmax3(lp: f64, lm: f64) -> (f64, f64, f64) {
    let max = lp.max(lm).max(0.0);
    let wp = (lp - max).exp();
    let wm = (lm - max).exp();
    let wz = (-max).exp();
    let total = wp + wm + wz;
    (wp / total, wm / total, wz / total)
}

/// Runs one chain for `Y_t | y_prev`, retaining `sample_count` networks.
pub fn sample_period(
    spec: &ModelSpec,
    theta: &[f64],
    y_prev: &SignedNetwork,
    covariates: &DyadicCovariates,
    settings: &SamplerSettings,
) -> Result<SampleBatch> {
    settings.validate()?;
    check_theta(spec, theta)?;
    let start = resolve_start(&settings.start, y_prev, y_prev)?;
    let mut rng = rng_for(settings.seed, 0);
    run_chain(spec, theta, y_prev, covariates, start, settings, &mut rng)
}

/// Independent chains for every modeled period, each conditioned on the
/// observed previous network. Chains run in parallel; period `t` uses ChaCha
/// stream `t - 1`, so the first period reproduces [`sample_period`] exactly.
pub fn sample_series(
    spec: &ModelSpec,
    theta: &[f64],
    series: &NetworkSeries,
    settings: &SamplerSettings,
) -> Result<Vec<SampleBatch>> {
    settings.validate()?;
    check_theta(spec, theta)?;
    spec.validate_for_series(series)?;
    (1..=series.period_count())
        .into_par_iter()
        .map(|t| {
            let covariates = series.covariates_for(t);
            let start = resolve_start(&settings.start, series.lag(t), series.network(t))?;
            let mut rng = rng_for(settings.seed, (t - 1) as u64);
            run_chain(spec, theta, series.lag(t), &covariates, start, settings, &mut rng)
        })
        .collect()
}

fn resolve_start(
    start: &ChainStart,
    y_prev: &SignedNetwork,
    observed: &SignedNetwork,
) -> Result<SignedNetwork> {
    let network = match start {
        ChainStart::Observed => observed.clone(),
        ChainStart::Empty => SignedNetwork::empty(y_prev.actor_count())?,
        ChainStart::Given(network) => {
            if network.actor_count() != y_prev.actor_count() {
                return Err(Error::DimensionMismatch(
                    "start network actor count differs from the series".into(),
                ));
            }
            network.clone()
        }
    };
    Ok(network)
}

fn run_chain(
    spec: &ModelSpec,
    theta: &[f64],
    y_prev: &SignedNetwork,
    covariates: &DyadicCovariates,
    start: SignedNetwork,
    settings: &SamplerSettings,
    rng: &mut ChaCha12Rng,
) -> Result<SampleBatch> {
    let mut y = start;
    // Fail fast on missing covariates or lags before entering the loop.
    eval_vector(spec, &y, Some(y_prev), covariates)?;

    let dyads: Vec<(usize, usize)> = y.dyads().collect();
    let mut networks = Vec::with_capacity(settings.sample_count);
    let mut stat_chain = Vec::with_capacity(settings.sample_count);
    let mut toggles = 0usize;
    let mut changed = 0usize;

    let total = settings.burn_in + settings.sample_count * settings.interval;
    for step in 1..=total {
        let (i, j) = dyads[rng.random_range(0..dyads.len())];
        let (lp, lm) = logodds(spec, theta, &y, Some(y_prev), covariates, i, j)?;
        let (pp, pm, _) = softmax3(lp, lm);
        let u: f64 = rng.random();
        let new_state = if u < pp {
            DyadState::Plus
        } else if u < pp + pm {
            DyadState::Minus
        } else {
            DyadState::Zero
        };
        toggles += 1;
        if y.state(i, j) != new_state {
            y.set_state(i, j, new_state);
            changed += 1;
        }
        if step > settings.burn_in && (step - settings.burn_in) % settings.interval == 0 {
            stat_chain.push(eval_vector(spec, &y, Some(y_prev), covariates)?);
            networks.push(y.clone());
        }
    }
    debug_assert_eq!(networks.len(), settings.sample_count);
    Ok(SampleBatch { networks, stat_chain, toggles, changed })
}

/// Per-sample summed statistics `sum_t s(y_t^(m), y_{t-1})` across the
/// batches of one [`sample_series`] call.
pub fn summed_stat_samples(batches: &[SampleBatch]) -> Vec<StatVector> {
    assert!(!batches.is_empty());
    let m = batches[0].stat_chain.len();
    let p = batches[0].stat_chain[0].len();
    (0..m)
        .map(|k| {
            let mut total = StatVector::zeros(p);
            for batch in batches {
                total.add_assign(&batch.stat_chain[k]);
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CovariateSet, Sign};
    use crate::statistics::Term;
    use approx::assert_abs_diff_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    fn edges_spec() -> ModelSpec {
        ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::Edges { sign: Sign::Minus },
        ])
        .unwrap()
    }

    fn settings(burn_in: usize, interval: usize, m: usize, seed: u64) -> SamplerSettings {
        SamplerSettings::new(burn_in, interval, m, ChainStart::Empty, seed).unwrap()
    }

    #[test]
    fn zero_theta_gives_uniform_conditional() {
        let spec = edges_spec();
        let y = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let (pp, pm, pz) = dyad_conditional(&spec, &[0.0, 0.0], &y, None, &covs, 0, 1).unwrap();
        assert_abs_diff_eq!(pp, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pm, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pz, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn single_edges_term_weights_two_one_one() {
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Plus }]).unwrap();
        let y = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let (pp, pm, pz) = dyad_conditional(&spec, &[LN2], &y, None, &covs, 0, 1).unwrap();
        assert_abs_diff_eq!(pp, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pm, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(pz, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(pp + pm + pz, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conditional_invariant_to_current_dyad_state() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEse { sign: Sign::Plus, alpha: LN2, form: Default::default() },
        ])
        .unwrap();
        let covs = DyadicCovariates::none();
        let theta = [0.4, -0.7];
        let mut y = SignedNetwork::from_edges(4, &[(0, 2, -1), (1, 2, -1), (2, 3, 1)]).unwrap();
        let mut probs = Vec::new();
        for state in [DyadState::Zero, DyadState::Plus, DyadState::Minus] {
            y.set_state(0, 1, state);
            probs.push(dyad_conditional(&spec, &theta, &y, None, &covs, 0, 1).unwrap());
        }
        for window in probs.windows(2) {
            assert_abs_diff_eq!(window[0].0, window[1].0, epsilon = 1e-14);
            assert_abs_diff_eq!(window[0].1, window[1].1, epsilon = 1e-14);
            assert_abs_diff_eq!(window[0].2, window[1].2, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_finite_theta_rejected() {
        let spec = edges_spec();
        let y = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        assert!(dyad_conditional(&spec, &[f64::NAN, 0.0], &y, None, &covs, 0, 1).is_err());
        assert!(dyad_conditional(&spec, &[0.0], &y, None, &covs, 0, 1).is_err());
    }

    #[test]
    fn zero_theta_chain_mean_matches_multinomial() {
        let spec = edges_spec();
        let y_prev = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let batch = sample_period(&spec, &[0.0, 0.0], &y_prev, &covs, &settings(300, 12, 4000, 7)).unwrap();
        let mean: f64 = batch.stat_chain.iter().map(|s| s[0]).sum::<f64>() / 4000.0;
        // Three dyads, each Plus with probability 1/3: mean 1, sd sqrt(2/3).
        // Three Monte-Carlo standard errors with a margin for residual
        // autocorrelation.
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn strongly_positive_theta_fills_the_network() {
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Plus }]).unwrap();
        let y_prev = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let batch = sample_period(&spec, &[20.0], &y_prev, &covs, &settings(300, 3, 25, 11)).unwrap();
        for network in &batch.networks {
            assert_eq!(network.count(DyadState::Plus), 3);
        }
    }

    #[test]
    fn chains_are_deterministic_in_the_seed() {
        let spec = edges_spec();
        let y_prev = SignedNetwork::empty(4).unwrap();
        let covs = DyadicCovariates::none();
        let theta = [0.3, -0.2];
        let a = sample_period(&spec, &theta, &y_prev, &covs, &settings(100, 5, 50, 42)).unwrap();
        let b = sample_period(&spec, &theta, &y_prev, &covs, &settings(100, 5, 50, 42)).unwrap();
        assert_eq!(a.networks, b.networks);
        assert_eq!(a.stat_chain, b.stat_chain);
        let c = sample_period(&spec, &theta, &y_prev, &covs, &settings(100, 5, 50, 43)).unwrap();
        assert_ne!(a.networks, c.networks);
    }

    #[test]
    fn stat_chain_matches_recomputation_from_networks() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEsf { sign: Sign::Plus, alpha: 1.5, form: Default::default() },
        ])
        .unwrap();
        let y_prev = SignedNetwork::empty(5).unwrap();
        let covs = DyadicCovariates::none();
        let batch = sample_period(&spec, &[0.2, 0.3], &y_prev, &covs, &settings(50, 7, 40, 3)).unwrap();
        for (network, stats) in batch.networks.iter().zip(&batch.stat_chain) {
            let fresh = eval_vector(&spec, network, Some(&y_prev), &covs).unwrap();
            assert_eq!(&fresh, stats);
        }
    }

    #[test]
    fn series_first_period_reproduces_sample_period() {
        let spec = edges_spec();
        let theta = [0.1, -0.1];
        let y0 = SignedNetwork::empty(4).unwrap();
        let y1 = SignedNetwork::from_edges(4, &[(0, 1, 1), (2, 3, -1)]).unwrap();
        let series = NetworkSeries::new(vec![y0.clone(), y1], CovariateSet::empty()).unwrap();
        let s = SamplerSettings::new(80, 4, 30, ChainStart::Empty, 9).unwrap();
        let from_series = sample_series(&spec, &theta, &series, &s).unwrap();
        let direct = sample_period(&spec, &theta, &y0, &series.covariates_for(1), &s).unwrap();
        assert_eq!(from_series.len(), 1);
        assert_eq!(from_series[0].networks, direct.networks);
    }

    #[test]
    fn identical_periods_without_lag_terms_agree_in_distribution() {
        let spec = edges_spec();
        let theta = [0.4, -0.3];
        let y = SignedNetwork::from_edges(4, &[(0, 1, 1), (1, 2, -1)]).unwrap();
        let series = NetworkSeries::new(
            vec![y.clone(), y.clone(), y.clone()],
            CovariateSet::empty(),
        )
        .unwrap();
        let s = SamplerSettings::new(200, 10, 2000, ChainStart::Empty, 17).unwrap();
        let batches = sample_series(&spec, &theta, &series, &s).unwrap();
        let m = s.sample_count as f64;
        for q in 0..2 {
            let mean = |b: &SampleBatch| b.stat_chain.iter().map(|v| v[q]).sum::<f64>() / m;
            let var = |b: &SampleBatch, mu: f64| {
                b.stat_chain.iter().map(|v| (v[q] - mu).powi(2)).sum::<f64>() / (m - 1.0)
            };
            let (m1, m2) = (mean(&batches[0]), mean(&batches[1]));
            let se = ((var(&batches[0], m1) + var(&batches[1], m2)) / m).sqrt();
            assert!(
                (m1 - m2).abs() <= 4.0 * se.max(1e-3),
                "coordinate {q}: means {m1} vs {m2}, se {se}"
            );
        }
    }

    #[test]
    fn summed_samples_add_over_periods() {
        let spec = edges_spec();
        let theta = [0.0, 0.0];
        let y = SignedNetwork::from_edges(3, &[(0, 1, 1)]).unwrap();
        let series = NetworkSeries::new(
            vec![y.clone(), y.clone(), y.clone()],
            CovariateSet::empty(),
        )
        .unwrap();
        let s = SamplerSettings::new(30, 3, 10, ChainStart::Empty, 5).unwrap();
        let batches = sample_series(&spec, &theta, &series, &s).unwrap();
        let summed = summed_stat_samples(&batches);
        assert_eq!(summed.len(), 10);
        for (k, total) in summed.iter().enumerate() {
            let expect: f64 = batches.iter().map(|b| b.stat_chain[k][0]).sum();
            assert_eq!(total[0], expect);
        }
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(SamplerSettings::new(0, 0, 10, ChainStart::Empty, 1).is_err());
        assert!(SamplerSettings::new(0, 1, 0, ChainStart::Empty, 1).is_err());
    }
}
