//! Exact computations over the full signed-network space for small `n`.
//!
//! The space of signed networks on `n` actors has `3^(n(n-1)/2)` elements,
//! which stays enumerable up to `n = 5` (59,049 networks). Within that
//! budget this module computes normalizing constants, likelihoods, moments,
//! and the exact maximum-likelihood estimate by brute force. These routines
//! are the ground truth against which the samplers and estimators are
//! tested; they are deliberately simple and make no use of the Monte-Carlo
//! machinery they validate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{DyadState, DyadicCovariates, NetworkSeries, SignedNetwork};
use crate::statistics::{eval_vector, sum_over_time, ModelSpec, StatVector};

/// Cap on the number of networks an enumeration may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_states: u64,
}

impl Default for EnumerationBudget {
    /// `3^10 = 59049` states, i.e. up to 5 actors.
    fn default() -> Self {
        EnumerationBudget { max_states: 59_049 }
    }
}

/// Number of signed networks on `n` actors.
pub fn space_size(n: usize) -> u128 {
    3u128.pow((n * (n - 1) / 2) as u32)
}

fn check_budget(n: usize, budget: EnumerationBudget) -> Result<()> {
    let states = space_size(n);
    if states > budget.max_states as u128 {
        return Err(Error::BudgetExceeded { states, max_states: budget.max_states });
    }
    Ok(())
}

/// Iterator over every signed network on `n` actors, in base-3 counting
/// order over the dyad array (dyad 0 least significant; Zero < Plus <
/// Minus). The first network is the empty one.
pub struct SpaceIter {
    current: Option<SignedNetwork>,
}

impl Iterator for SpaceIter {
    type Item = SignedNetwork;

    fn next(&mut self) -> Option<SignedNetwork> {
        let network = self.current.take()?;
        let mut succ = network.clone();
        let mut advanced = false;
        for d in 0..succ.dyad_count() {
            match succ.state_by_index(d) {
                DyadState::Zero => {
                    succ.set_state_by_index(d, DyadState::Plus);
                    advanced = true;
                    break;
                }
                DyadState::Plus => {
                    succ.set_state_by_index(d, DyadState::Minus);
                    advanced = true;
                    break;
                }
                DyadState::Minus => {
                    succ.set_state_by_index(d, DyadState::Zero);
                    // Carry into the next dyad.
                }
            }
        }
        if advanced {
            self.current = Some(succ);
        }
        Some(network)
    }
}

/// Visits each network in the space exactly once, deterministic order.
pub fn enumerate_space(n: usize, budget: EnumerationBudget) -> Result<SpaceIter> {
    check_budget(n, budget)?;
    Ok(SpaceIter { current: Some(SignedNetwork::empty(n)?) })
}

/// Log normalizing constant `log kappa(theta, y_prev)`: the log-sum-exp of
/// `theta' s(y, y_prev)` over the whole space, computed with a running-max
/// shift so large weights cannot overflow.
pub fn exact_kappa(
    spec: &ModelSpec,
    theta: &[f64],
    y_prev: &SignedNetwork,
    covariates: &DyadicCovariates,
    budget: EnumerationBudget,
) -> Result<f64> {
    if theta.len() != spec.p() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} coordinates, spec has {}",
            theta.len(),
            spec.p()
        )));
    }
    let mut max = f64::NEG_INFINITY;
    let mut scaled_sum = 0.0;
    for y in enumerate_space(y_prev.actor_count(), budget)? {
        let weight = eval_vector(spec, &y, Some(y_prev), covariates)?.dot(theta);
        if weight > max {
            scaled_sum = scaled_sum * (max - weight).exp() + 1.0;
            max = weight;
        } else {
            scaled_sum += (weight - max).exp();
        }
    }
    Ok(max + scaled_sum.ln())
}

/// Exact log-likelihood of a series:
/// `sum_t [theta' s(y_t, y_{t-1}) - log kappa(theta, y_{t-1})]`.
pub fn exact_loglik(
    spec: &ModelSpec,
    theta: &[f64],
    series: &NetworkSeries,
    budget: EnumerationBudget,
) -> Result<f64> {
    spec.validate_for_series(series)?;
    let mut total = 0.0;
    for t in 1..=series.period_count() {
        let covariates = series.covariates_for(t);
        let observed = eval_vector(spec, series.network(t), Some(series.lag(t)), &covariates)?;
        let kappa = exact_kappa(spec, theta, series.lag(t), &covariates, budget)?;
        total += observed.dot(theta) - kappa;
    }
    Ok(total)
}

/// Exact probabilities of every network in enumeration order under the
/// model conditioned on `y_prev`.
pub fn exact_distribution(
    spec: &ModelSpec,
    theta: &[f64],
    y_prev: &SignedNetwork,
    covariates: &DyadicCovariates,
    budget: EnumerationBudget,
) -> Result<Vec<f64>> {
    let kappa = exact_kappa(spec, theta, y_prev, covariates, budget)?;
    enumerate_space(y_prev.actor_count(), budget)?
        .map(|y| {
            let weight = eval_vector(spec, &y, Some(y_prev), covariates)?.dot(theta);
            Ok((weight - kappa).exp())
        })
        .collect()
}

/// Exact mean and covariance of `s(Y, y_prev)` under the model.
pub fn exact_moments(
    spec: &ModelSpec,
    theta: &[f64],
    y_prev: &SignedNetwork,
    covariates: &DyadicCovariates,
    budget: EnumerationBudget,
) -> Result<(StatVector, DMatrix<f64>)> {
    let p = spec.p();
    let kappa = exact_kappa(spec, theta, y_prev, covariates, budget)?;

    let mut mean = DVector::<f64>::zeros(p);
    for y in enumerate_space(y_prev.actor_count(), budget)? {
        let stats = eval_vector(spec, &y, Some(y_prev), covariates)?;
        let prob = (stats.dot(theta) - kappa).exp();
        for q in 0..p {
            mean[q] += prob * stats[q];
        }
    }

    let mut cov = DMatrix::<f64>::zeros(p, p);
    for y in enumerate_space(y_prev.actor_count(), budget)? {
        let stats = eval_vector(spec, &y, Some(y_prev), covariates)?;
        let prob = (stats.dot(theta) - kappa).exp();
        for q in 0..p {
            let dq = stats[q] - mean[q];
            for r in q..p {
                let dr = stats[r] - mean[r];
                cov[(q, r)] += prob * dq * dr;
            }
        }
    }
    for q in 0..p {
        for r in 0..q {
            cov[(q, r)] = cov[(r, q)];
        }
    }
    Ok((StatVector(mean.iter().copied().collect()), cov))
}

/// Coordinate-wise attainable range of the summed statistics over the
/// space, used to detect observations on the boundary.
fn summed_stat_ranges(
    spec: &ModelSpec,
    series: &NetworkSeries,
    budget: EnumerationBudget,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = spec.p();
    let mut min = vec![0.0; p];
    let mut max = vec![0.0; p];
    for t in 1..=series.period_count() {
        let covariates = series.covariates_for(t);
        let mut period_min = vec![f64::INFINITY; p];
        let mut period_max = vec![f64::NEG_INFINITY; p];
        for y in enumerate_space(series.actor_count(), budget)? {
            let stats = eval_vector(spec, &y, Some(series.lag(t)), &covariates)?;
            for q in 0..p {
                period_min[q] = period_min[q].min(stats[q]);
                period_max[q] = period_max[q].max(stats[q]);
            }
        }
        for q in 0..p {
            min[q] += period_min[q];
            max[q] += period_max[q];
        }
    }
    Ok((min, max))
}

/// Exact maximum-likelihood estimate by Newton ascent on [`exact_loglik`],
/// using the exact mean as gradient and the exact covariance as (negated)
/// Hessian. Errors with [`Error::Boundary`] when a coordinate of the
/// observed summed statistic sits on the edge of its attainable range.
pub fn exact_mle(
    spec: &ModelSpec,
    series: &NetworkSeries,
    budget: EnumerationBudget,
) -> Result<Vec<f64>> {
    spec.validate_for_series(series)?;
    let p = spec.p();
    let observed = sum_over_time(spec, series)?;

    let (min, max) = summed_stat_ranges(spec, series, budget)?;
    for q in 0..p {
        let at_edge = (observed[q] - min[q]).abs() < 1e-9
            || (max[q] - observed[q]).abs() < 1e-9
            || (max[q] - min[q]).abs() < 1e-9;
        if at_edge {
            return Err(Error::Boundary {
                term: spec.terms()[q].label(),
                observed: observed[q],
                min: min[q],
                max: max[q],
            });
        }
    }

    let mut theta = DVector::<f64>::zeros(p);
    let mut loglik = exact_loglik(spec, theta.as_slice(), series, budget)?;
    for _ in 0..200 {
        let mut gradient = DVector::<f64>::from_column_slice(observed.as_slice());
        let mut hessian = DMatrix::<f64>::zeros(p, p);
        for t in 1..=series.period_count() {
            let covariates = series.covariates_for(t);
            let (mean, cov) = exact_moments(spec, theta.as_slice(), series.lag(t), &covariates, budget)?;
            for q in 0..p {
                gradient[q] -= mean[q];
            }
            hessian += cov;
        }
        if gradient.norm() < 1e-9 {
            return Ok(theta.iter().copied().collect());
        }
        let step = hessian
            .clone()
            .lu()
            .solve(&gradient)
            .ok_or_else(|| Error::Degeneracy("singular information matrix in exact MLE".into()))?;
        // Damped Newton: exponential-family log-likelihoods are concave, so
        // halving until the objective improves always terminates.
        let mut scale = 1.0;
        loop {
            let candidate = &theta + scale * &step;
            let candidate_loglik = exact_loglik(spec, candidate.as_slice(), series, budget)?;
            if candidate_loglik >= loglik - 1e-12 {
                theta = candidate;
                loglik = candidate_loglik;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::NonConvergence { iterations: 200 });
            }
        }
    }
    Err(Error::NonConvergence { iterations: 200 })
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

    fn budget() -> EnumerationBudget {
        EnumerationBudget::default()
    }

    #[test]
    fn space_counts() {
        for (n, expected) in [(2usize, 3usize), (3, 27), (4, 729)] {
            let count = enumerate_space(n, budget()).unwrap().count();
            assert_eq!(count, expected);
        }
    }

    #[test]
    fn enumeration_visits_distinct_networks() {
        let keys: std::collections::HashSet<u64> = enumerate_space(3, budget())
            .unwrap()
            .map(|y| y.state_index())
            .collect();
        assert_eq!(keys.len(), 27);
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            enumerate_space(6, budget()),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn kappa_at_zero_counts_the_space() {
        let spec = edges_spec();
        let zero = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let kappa = exact_kappa(&spec, &[0.0, 0.0], &zero, &covs, budget()).unwrap();
        assert_abs_diff_eq!(kappa, 27f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn kappa_factorizes_over_independent_dyads() {
        // Per-dyad factor e^(ln 2) + 1 + 1 = 4, three dyads: kappa = 64.
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Plus }]).unwrap();
        let zero = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let kappa = exact_kappa(&spec, &[LN2], &zero, &covs, budget()).unwrap();
        assert_abs_diff_eq!(kappa, 64f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn loglik_at_zero_is_uniform() {
        let spec = edges_spec();
        let y = SignedNetwork::from_edges(3, &[(0, 1, 1), (0, 2, -1)]).unwrap();
        let series = NetworkSeries::cross_sectional(y, CovariateSet::empty()).unwrap();
        let ll = exact_loglik(&spec, &[0.0, 0.0], &series, budget()).unwrap();
        assert_abs_diff_eq!(ll, -3.0 * 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn moments_at_zero_match_multinomial_closed_form() {
        let spec = edges_spec();
        let zero = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let (mean, cov) = exact_moments(&spec, &[0.0, 0.0], &zero, &covs, budget()).unwrap();
        // Each of 3 dyads is Plus with probability 1/3.
        assert_abs_diff_eq!(mean[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(1, 1)], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 1)], -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEsf { sign: Sign::Plus, alpha: LN2, form: Default::default() },
        ])
        .unwrap();
        let zero = SignedNetwork::empty(4).unwrap();
        let covs = DyadicCovariates::none();
        let (_, cov) = exact_moments(&spec, &[0.3, 0.4], &zero, &covs, budget()).unwrap();
        let eigen = nalgebra::SymmetricEigen::new(cov);
        assert!(eigen.eigenvalues.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn score_identity_holds() {
        // d/d theta_q of log kappa equals the exact mean.
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEse { sign: Sign::Minus, alpha: LN2, form: Default::default() },
        ])
        .unwrap();
        let zero = SignedNetwork::empty(4).unwrap();
        let covs = DyadicCovariates::none();
        let theta = [0.25, -0.4];
        let (mean, _) = exact_moments(&spec, &theta, &zero, &covs, budget()).unwrap();
        let h = 1e-5;
        for q in 0..2 {
            let mut up = theta;
            up[q] += h;
            let mut down = theta;
            down[q] -= h;
            let fd = (exact_kappa(&spec, &up, &zero, &covs, budget()).unwrap()
                - exact_kappa(&spec, &down, &zero, &covs, budget()).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(fd, mean[q], epsilon = 1e-6);
        }
    }

    #[test]
    fn information_identity_holds() {
        let spec = edges_spec();
        let zero = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let theta = [0.3, -0.2];
        let (_, cov) = exact_moments(&spec, &theta, &zero, &covs, budget()).unwrap();
        let h = 1e-4;
        let kappa = |t: &[f64]| exact_kappa(&spec, t, &zero, &covs, budget()).unwrap();
        // Diagonal second difference.
        for q in 0..2 {
            let mut up = theta;
            up[q] += h;
            let mut down = theta;
            down[q] -= h;
            let second = (kappa(&up) - 2.0 * kappa(&theta) + kappa(&down)) / (h * h);
            assert_abs_diff_eq!(second, cov[(q, q)], epsilon = 1e-4);
        }
    }

    #[test]
    fn mle_with_equal_counts_is_zero() {
        let spec = edges_spec();
        let y = SignedNetwork::from_edges(3, &[(0, 1, 1), (0, 2, -1)]).unwrap();
        let series = NetworkSeries::cross_sectional(y, CovariateSet::empty()).unwrap();
        let theta = exact_mle(&spec, &series, budget()).unwrap();
        assert_abs_diff_eq!(theta[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(theta[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn mle_satisfies_the_moment_equation() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::Edges { sign: Sign::Minus },
        ])
        .unwrap();
        let y = SignedNetwork::from_edges(4, &[(0, 1, 1), (0, 2, 1), (1, 2, -1), (2, 3, 1)]).unwrap();
        let series = NetworkSeries::cross_sectional(y, CovariateSet::empty()).unwrap();
        let theta = exact_mle(&spec, &series, budget()).unwrap();
        let covs = series.covariates_for(1);
        let (mean, _) = exact_moments(&spec, &theta, series.lag(1), &covs, budget()).unwrap();
        let observed = sum_over_time(&spec, &series).unwrap();
        assert_abs_diff_eq!(mean[0], observed[0], epsilon = 1e-8);
        assert_abs_diff_eq!(mean[1], observed[1], epsilon = 1e-8);
    }

    #[test]
    fn saturated_data_hits_the_boundary() {
        let spec = edges_spec();
        let y = SignedNetwork::from_edges(3, &[(0, 1, 1), (0, 2, 1), (1, 2, 1)]).unwrap();
        let series = NetworkSeries::cross_sectional(y, CovariateSet::empty()).unwrap();
        let err = exact_mle(&spec, &series, budget()).unwrap_err();
        match err {
            Error::Boundary { term, .. } => assert_eq!(term, "edges+"),
            other => panic!("expected boundary error, got {other:?}"),
        }
    }
}
