//! Maximum pseudo-likelihood seeding and Monte-Carlo maximum likelihood.
//!
//! The Monte-Carlo MLE only exists when the observed summed statistics lie
//! inside the convex hull of the sampled ones, so the outer loop uses
//! partial stepping: each iteration targets the blend
//! `xi = gamma * observed + (1 - gamma) * sample_mean` with the largest
//! grid value of `gamma` whose safety-margin point (5% closer to the
//! observation) is still inside the sampled hull. Hull membership is decided
//! by a phase-one simplex on the linear-programming feasibility problem.
//! Once `gamma` reaches 1 twice in a row the loop switches to the observed
//! statistics and iterates until the estimates stabilize.
//!
//! Each update uses the closed-form Newton step under a Gaussian
//! approximation of the summed statistics:
//! `theta_next = theta + cov^-1 (xi - mean)`, with mean and covariance
//! estimated from the current iteration's samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, VarianceReport};
use crate::network::{DyadState, NetworkSeries};
use crate::sampler::{
    derive_seed, sample_series, summed_stat_samples, SampleBatch, SamplerPhase, SamplerSettings,
};
use crate::statistics::{change_statistics, sum_over_time, ModelSpec, StatVector};

/// Tuning of the outer estimation loop and its three sampling phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    /// Number of grid points for `gamma` on `(0, 1]`.
    pub gamma_grid: usize,
    /// Margin factor applied to `gamma` in the hull test.
    pub step_margin: f64,
    pub max_outer_iters: usize,
    /// Relative-change threshold for the stabilization stop rule.
    pub stabilize_tol: f64,
    /// Ridge factor: `ridge_eps * trace(cov) / p` is added to the diagonal
    /// when the sample covariance is ill-conditioned.
    pub ridge_eps: f64,
    /// Confidence level for the reported intervals.
    pub ci_level: f64,
    pub estimation: SamplerSettings,
    pub variance: SamplerSettings,
    pub bridge: SamplerSettings,
}

impl EstimationSettings {
    /// Defaults for a moderate static network, matching the published
    /// tuning table: burn-in 10,000 / interval 1,000 / M 1,000 for the
    /// estimation phase, M 3,000 for variance, interval 2,000 and an empty
    /// start for the bridge phase, gamma grid 2,000.
    pub fn with_seed(seed: u64) -> Self {
        use crate::sampler::ChainStart;
        EstimationSettings {
            gamma_grid: 2000,
            step_margin: 1.05,
            max_outer_iters: 100,
            stabilize_tol: 1e-3,
            ridge_eps: 1e-8,
            ci_level: 0.95,
            estimation: SamplerSettings {
                burn_in: 10_000,
                interval: 1000,
                sample_count: 1000,
                start: ChainStart::Observed,
                seed,
            },
            variance: SamplerSettings {
                burn_in: 10_000,
                interval: 1000,
                sample_count: 3000,
                start: ChainStart::Observed,
                seed,
            },
            bridge: SamplerSettings {
                burn_in: 10_000,
                interval: 2000,
                sample_count: 1000,
                start: ChainStart::Empty,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid < 10 {
            return Err(Error::InvalidSettings("gamma grid needs at least 10 points".into()));
        }
        if !(self.step_margin > 1.0) {
            return Err(Error::InvalidSettings("step margin must exceed 1".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidSettings("need at least one outer iteration".into()));
        }
        if !(self.stabilize_tol > 0.0) || !(self.ridge_eps >= 0.0) {
            return Err(Error::InvalidSettings("tolerances must be positive".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidSettings("confidence level must be in (0, 1)".into()));
        }
        self.estimation.validate()?;
        self.variance.validate()?;
        self.bridge.validate()
    }
}

/// Per-iteration trace of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `gamma` used in each outer iteration (1.0 once the loop has switched
    /// to the observed statistics).
    pub gamma_trace: Vec<f64>,
    /// `theta` after each outer iteration, starting with the seed value.
    pub theta_trace: Vec<Vec<f64>>,
    pub iterations: usize,
    pub seed: u64,
}

/// Result of a Monte-Carlo maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub term_labels: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub variance: VarianceReport,
    /// Observed summed statistics.
    pub observed: Vec<f64>,
    /// Mean of the sampled summed statistics in the final estimation
    /// iteration.
    pub sample_mean: Vec<f64>,
    /// Statistic chains of the final estimation iteration, one per modeled
    /// period: `stat_chains[t-1][m][q]`.
    pub stat_chains: Vec<Vec<Vec<f64>>>,
    /// Filled by model selection.
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Maximum pseudo-likelihood estimate: Newton-Raphson on the product of
/// dyadwise conditional multinomials, with change statistics as predictors.
pub fn fit_mple(spec: &ModelSpec, series: &NetworkSeries) -> Result<Vec<f64>> {
    let observations = collect_dyad_observations(spec, series)?;
    check_pseudo_boundary(spec, &observations)?;
    newton_multinomial(spec.p(), &observations)
}

/// One dyad observation: both change-statistic vectors and the realized
/// category.
pub(crate) struct DyadObservation {
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub observed: DyadState,
}

pub(crate) fn collect_dyad_observations(
    spec: &ModelSpec,
    series: &NetworkSeries,
) -> Result<Vec<DyadObservation>> {
    spec.validate_for_series(series)?;
    let mut observations = Vec::new();
    for t in 1..=series.period_count() {
        let y = series.network(t);
        let prev = Some(series.lag(t));
        let covariates = series.covariates_for(t);
        for (i, j) in y.dyads() {
            let delta_plus =
                change_statistics(spec, y, prev, &covariates, i, j, DyadState::Plus)?.0;
            let delta_minus =
                change_statistics(spec, y, prev, &covariates, i, j, DyadState::Minus)?.0;
            observations.push(DyadObservation { delta_plus, delta_minus, observed: y.state(i, j) });
        }
    }
    Ok(observations)
}

/// Coordinate-wise separation check: the pseudo-likelihood maximum exists
/// only if each coordinate of the realized sufficient statistic is strictly
/// between the smallest and largest value attainable by re-choosing dyad
/// categories.
fn check_pseudo_boundary(spec: &ModelSpec, observations: &[DyadObservation]) -> Result<()> {
    let p = spec.p();
    for q in 0..p {
        let mut realized = 0.0;
        let mut lower = 0.0;
        let mut upper = 0.0;
        for obs in observations {
            let dp = obs.delta_plus[q];
            let dm = obs.delta_minus[q];
            realized += match obs.observed {
                DyadState::Plus => dp,
                DyadState::Minus => dm,
                DyadState::Zero => 0.0,
            };
            lower += dp.min(dm).min(0.0);
            upper += dp.max(dm).max(0.0);
        }
        let eps = 1e-9 * (1.0 + upper.abs() + lower.abs());
        if (upper - lower).abs() <= eps
            || (realized - lower).abs() <= eps
            || (upper - realized).abs() <= eps
        {
            return Err(Error::Boundary {
                term: spec.terms()[q].label(),
                observed: realized,
                min: lower,
                max: upper,
            });
        }
    }
    Ok(())
}

/// Log-probabilities `(log p_plus, log p_minus, log p_zero)` for one dyad.
fn dyad_log_probs(theta: &DVector<f64>, obs: &DyadObservation) -> (f64, f64, f64) {
    let lp: f64 = theta.iter().zip(&obs.delta_plus).map(|(t, d)| t * d).sum();
    let lm: f64 = theta.iter().zip(&obs.delta_minus).map(|(t, d)| t * d).sum();
    let max = lp.max(lm).max(0.0);
    let lse = max + ((lp - max).exp() + (lm - max).exp() + (-max).exp()).ln();
    (lp - lse, lm - lse, -lse)
}

pub(crate) fn pseudo_loglik(theta: &[f64], observations: &[DyadObservation]) -> f64 {
    let theta = DVector::from_column_slice(theta);
    observations
        .iter()
        .map(|obs| {
            let (lp, lm, lz) = dyad_log_probs(&theta, obs);
            match obs.observed {
                DyadState::Plus => lp,
                DyadState::Minus => lm,
                DyadState::Zero => lz,
            }
        })
        .sum()
}

fn newton_multinomial(p: usize, observations: &[DyadObservation]) -> Result<Vec<f64>> {
    let mut theta = DVector::<f64>::zeros(p);
    let mut loglik = pseudo_loglik(theta.as_slice(), observations);
    for _ in 0..100 {
        let mut gradient = DVector::<f64>::zeros(p);
        let mut information = DMatrix::<f64>::zeros(p, p);
        for obs in observations {
            let (lp, lm, _) = dyad_log_probs(&theta, obs);
            let (pp, pm) = (lp.exp(), lm.exp());
            for q in 0..p {
                let realized = match obs.observed {
                    DyadState::Plus => obs.delta_plus[q],
                    DyadState::Minus => obs.delta_minus[q],
                    DyadState::Zero => 0.0,
                };
                let mean_q = pp * obs.delta_plus[q] + pm * obs.delta_minus[q];
                gradient[q] += realized - mean_q;
                for r in q..p {
                    let mean_r = pp * obs.delta_plus[r] + pm * obs.delta_minus[r];
                    information[(q, r)] += pp * obs.delta_plus[q] * obs.delta_plus[r]
                        + pm * obs.delta_minus[q] * obs.delta_minus[r]
                        - mean_q * mean_r;
                }
            }
        }
        for q in 0..p {
            for r in 0..q {
                information[(q, r)] = information[(r, q)];
            }
        }
        if gradient.norm() < 1e-8 {
            return Ok(theta.iter().copied().collect());
        }
        let step = information
            .lu()
            .solve(&gradient)
            .ok_or_else(|| Error::Degeneracy("singular information in pseudo-likelihood".into()))?;
        let mut scale = 1.0;
        loop {
            let candidate = &theta + scale * &step;
            let candidate_loglik = pseudo_loglik(candidate.as_slice(), observations);
            if candidate_loglik >= loglik - 1e-12 {
                theta = candidate;
                loglik = candidate_loglik;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::NonConvergence { iterations: 100 });
            }
        }
        if theta.amax() > 100.0 {
            return Err(Error::Degeneracy(
                "pseudo-likelihood estimates diverging; the data may be separated".into(),
            ));
        }
    }
    Err(Error::NonConvergence { iterations: 100 })
}

/// Whether `point` lies in the convex hull of `samples` (boundary points
/// count as contained), decided by phase-one simplex on the feasibility
/// problem `sum(w) = 1, w >= 0, sum(w * sample) = point` with tolerance
/// 1e-9 on the scaled constraint residuals.
pub fn hull_contains(point: &[f64], samples: &[Vec<f64>]) -> Result<bool> {
    if samples.is_empty() {
        return Err(Error::DimensionMismatch("hull test needs at least one sample".into()));
    }
    let p = point.len();
    if samples.iter().any(|s| s.len() != p) {
        return Err(Error::DimensionMismatch(
            "hull samples must match the point's dimension".into(),
        ));
    }
    let rows = p + 1;
    let cols = samples.len();
    let mut matrix = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (c, sample) in samples.iter().enumerate() {
        for (r, &value) in sample.iter().enumerate() {
            matrix[(r, c)] = value;
        }
        matrix[(p, c)] = 1.0;
    }
    for r in 0..p {
        rhs[r] = point[r];
    }
    rhs[p] = 1.0;
    phase_one_feasible(matrix, rhs)
}

/// Phase-one simplex with Bland's rule. Returns whether `A w = b, w >= 0`
/// is feasible within tolerance.
fn phase_one_feasible(mut matrix: DMatrix<f64>, mut rhs: DVector<f64>) -> Result<bool> {
    let rows = matrix.nrows();
    let cols = matrix.ncols();

    // Row scaling keeps the residual tolerance meaningful across statistic
    // scales.
    for r in 0..rows {
        let mut magnitude = rhs[r].abs();
        for c in 0..cols {
            magnitude = magnitude.max(matrix[(r, c)].abs());
        }
        if magnitude > 1.0 {
            for c in 0..cols {
                matrix[(r, c)] /= magnitude;
            }
            rhs[r] /= magnitude;
        }
        if rhs[r] < 0.0 {
            for c in 0..cols {
                matrix[(r, c)] = -matrix[(r, c)];
            }
            rhs[r] = -rhs[r];
        }
    }

    // Tableau: real columns, then one artificial per row.
    let total_cols = cols + rows;
    let mut tableau = DMatrix::<f64>::zeros(rows, total_cols);
    tableau.view_mut((0, 0), (rows, cols)).copy_from(&matrix);
    for r in 0..rows {
        tableau[(r, cols + r)] = 1.0;
    }
    let mut basis: Vec<usize> = (cols..total_cols).collect();

    // Phase-one reduced costs: cost 1 on artificials, 0 elsewhere.
    let mut cost = vec![0.0f64; total_cols];
    for (c, entry) in cost.iter_mut().enumerate().take(cols) {
        *entry = -(0..rows).map(|r| tableau[(r, c)]).sum::<f64>();
    }
    let mut objective: f64 = rhs.iter().sum();

    const PIVOT_TOL: f64 = 1e-11;
    for _ in 0..100_000 {
        // Bland's rule: first column with a negative reduced cost.
        let Some(entering) = (0..total_cols).find(|&c| cost[c] < -PIVOT_TOL) else {
            break;
        };
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            let coeff = tableau[(r, entering)];
            if coeff > PIVOT_TOL {
                let ratio = rhs[r] / coeff;
                let tie = (ratio - best_ratio).abs() <= PIVOT_TOL
                    && leaving.is_some_and(|l| basis[r] < basis[l]);
                if ratio < best_ratio - PIVOT_TOL || tie {
                    best_ratio = ratio;
                    leaving = Some(r);
                }
            }
        }
        let Some(leaving) = leaving else {
            // Phase-one objective is bounded below by zero, so an unbounded
            // ray means the residual cannot be driven further down.
            break;
        };

        let pivot = tableau[(leaving, entering)];
        for c in 0..total_cols {
            tableau[(leaving, c)] /= pivot;
        }
        rhs[leaving] /= pivot;
        for r in 0..rows {
            if r != leaving {
                let factor = tableau[(r, entering)];
                if factor != 0.0 {
                    for c in 0..total_cols {
                        tableau[(r, c)] -= factor * tableau[(leaving, c)];
                    }
                    rhs[r] -= factor * rhs[leaving];
                }
            }
        }
        let cost_factor = cost[entering];
        if cost_factor != 0.0 {
            for c in 0..total_cols {
                cost[c] -= cost_factor * tableau[(leaving, c)];
            }
            objective -= cost_factor * rhs[leaving];
        }
        basis[leaving] = entering;
    }
    Ok(objective.abs() <= 1e-9 * rows as f64)
}

/// Result of the step-length search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaResult {
    pub gamma: f64,
    /// Set when not even the smallest grid value passed the hull test (the
    /// sampled hull is degenerate or the observation is far outside); the
    /// smallest grid value is returned in that case.
    pub degenerate: bool,
}

/// Largest grid value of `gamma` in `(0, 1]` such that the margin point
/// `margin * gamma * observed + (1 - margin * gamma) * mean` lies in the
/// convex hull of the samples. Containment is monotone along the segment,
/// so the grid is binary-searched.
pub fn find_gamma(
    observed: &[f64],
    mean: &[f64],
    samples: &[StatVector],
    grid: usize,
    margin: f64,
) -> Result<GammaResult> {
    let p = observed.len();
    if mean.len() != p || samples.iter().any(|s| s.len() != p) {
        return Err(Error::DimensionMismatch("gamma search inputs disagree on dimension".into()));
    }
    if samples.is_empty() || grid == 0 {
        return Err(Error::InvalidSettings("gamma search needs samples and a grid".into()));
    }

    // Standardize jointly (hull membership is affine-invariant) and drop
    // duplicate sample points; both sharpen and shrink the LP.
    let mut scale = vec![0.0f64; p];
    for sample in samples {
        for q in 0..p {
            scale[q] = scale[q].max((sample[q] - mean[q]).abs());
        }
    }
    for s in scale.iter_mut() {
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let standardized: Vec<Vec<f64>> = {
        let mut seen = std::collections::HashSet::new();
        let mut unique = Vec::new();
        for sample in samples {
            let z: Vec<f64> = (0..p).map(|q| (sample[q] - mean[q]) / scale[q]).collect();
            let key: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                unique.push(z);
            }
        }
        unique
    };
    let margin_point = |gamma: f64| -> Vec<f64> {
        let blend = margin * gamma;
        (0..p).map(|q| blend * (observed[q] - mean[q]) / scale[q]).collect()
    };
    let contained = |g: usize| -> Result<bool> {
        hull_contains(&margin_point(g as f64 / grid as f64), &standardized)
    };

    if contained(grid)? {
        return Ok(GammaResult { gamma: 1.0, degenerate: false });
    }
    if !contained(1)? {
        return Ok(GammaResult { gamma: 1.0 / grid as f64, degenerate: true });
    }
    // Invariant: contained(low), !contained(high).
    let (mut low, mut high) = (1usize, grid);
    while high - low > 1 {
        let mid = low + (high - low) / 2;
        if contained(mid)? {
            low = mid;
        } else {
            high = mid;
        }
    }
    Ok(GammaResult { gamma: low as f64 / grid as f64, degenerate: false })
}

pub(crate) fn mean_of(samples: &[StatVector]) -> Vec<f64> {
    let p = samples[0].len();
    let mut mean = vec![0.0; p];
    for sample in samples {
        for q in 0..p {
            mean[q] += sample[q];
        }
    }
    for v in mean.iter_mut() {
        *v /= samples.len() as f64;
    }
    mean
}

pub(crate) fn covariance_of(samples: &[StatVector], mean: &[f64]) -> DMatrix<f64> {
    let p = mean.len();
    let m = samples.len();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for sample in samples {
        for q in 0..p {
            let dq = sample[q] - mean[q];
            for r in q..p {
                cov[(q, r)] += dq * (sample[r] - mean[r]);
            }
        }
    }
    let denom = (m - 1).max(1) as f64;
    for q in 0..p {
        for r in 0..p {
            if r < q {
                cov[(q, r)] = cov[(r, q)];
            } else {
                cov[(q, r)] /= denom;
            }
        }
    }
    cov
}

/// Closed-form partial-stepping update `theta + cov^-1 (xi - mean)`, with
/// mean and covariance taken from the sampled summed statistics. A ridge
/// `ridge_eps * trace / p` is added when the covariance condition number
/// exceeds 1e12.
pub fn partial_step_update(
    theta: &[f64],
    xi: &[f64],
    samples: &[StatVector],
    ridge_eps: f64,
) -> Result<Vec<f64>> {
    let p = theta.len();
    if xi.len() != p || samples.iter().any(|s| s.len() != p) {
        return Err(Error::DimensionMismatch("partial step inputs disagree on dimension".into()));
    }
    if samples.len() < 2 {
        return Err(Error::Degeneracy("partial step needs at least two samples".into()));
    }
    let mean = mean_of(samples);
    let mut cov = covariance_of(samples, &mean);
    let trace: f64 = (0..p).map(|q| cov[(q, q)]).sum();
    if trace <= 0.0 {
        return Err(Error::Degeneracy("all sampled statistics identical; zero covariance".into()));
    }
    let eigen = nalgebra::SymmetricEigen::new(cov.clone());
    let max_eig = eigen.eigenvalues.amax();
    let min_eig = eigen.eigenvalues.min();
    if min_eig <= 0.0 || max_eig / min_eig > 1e12 {
        let ridge = ridge_eps * trace / p as f64;
        for q in 0..p {
            cov[(q, q)] += ridge;
        }
    }
    let residual = DVector::from_iterator(p, (0..p).map(|q| xi[q] - mean[q]));
    let step = cov
        .lu()
        .solve(&residual)
        .ok_or_else(|| Error::Degeneracy("sample covariance not invertible after ridge".into()))?;
    Ok((0..p).map(|q| theta[q] + step[q]).collect())
}

/// Monte-Carlo maximum likelihood seeded at the pseudo-likelihood estimate.
pub fn fit_mcmc_mle(
    spec: &ModelSpec,
    series: &NetworkSeries,
    settings: &EstimationSettings,
) -> Result<FitResult> {
    let theta0 = fit_mple(spec, series)?;
    fit_mcmc_mle_from(spec, series, theta0, settings)
}

/// As [`fit_mcmc_mle`] but with an explicit starting value; used to study
/// the partial-stepping path from deliberately poor starts.
pub fn fit_mcmc_mle_from(
    spec: &ModelSpec,
    series: &NetworkSeries,
    theta0: Vec<f64>,
    settings: &EstimationSettings,
) -> Result<FitResult> {
    settings.validate()?;
    spec.validate_for_series(series)?;
    if theta0.len() != spec.p() {
        return Err(Error::DimensionMismatch("starting theta has the wrong dimension".into()));
    }
    let observed = sum_over_time(spec, series)?;

    let mut theta = theta0.clone();
    let mut gamma_trace: Vec<f64> = Vec::new();
    let mut theta_trace: Vec<Vec<f64>> = vec![theta0];
    let mut consecutive_full_gamma = 0usize;
    let mut polishing = false;
    let mut stable_iters = 0usize;
    let mut degenerate_iters = 0usize;
    let mut final_batches: Option<Vec<SampleBatch>> = None;
    let mut final_mean: Vec<f64> = vec![0.0; spec.p()];
    let mut converged_at: Option<usize> = None;

    for iteration in 1..=settings.max_outer_iters {
        let mut phase_settings = settings.estimation.clone();
        phase_settings.seed =
            derive_seed(settings.estimation.seed, SamplerPhase::Estimation, iteration as u64);
        let batches = sample_series(spec, &theta, series, &phase_settings)?;
        let samples = summed_stat_samples(&batches);
        let mean = mean_of(&samples);

        let extreme = batches
            .iter()
            .flat_map(|b| &b.networks)
            .filter(|y| y.is_empty_network() || y.is_complete())
            .count();
        let total_networks: usize = batches.iter().map(|b| b.networks.len()).sum();
        if extreme as f64 > 0.99 * total_networks as f64 {
            degenerate_iters += 1;
            if degenerate_iters >= 2 {
                return Err(Error::Degeneracy(
                    "sampler collapsed to full or empty networks in two consecutive iterations"
                        .into(),
                ));
            }
        } else {
            degenerate_iters = 0;
        }

        let xi: Vec<f64> = if polishing {
            gamma_trace.push(1.0);
            observed.as_slice().to_vec()
        } else {
            let gamma = find_gamma(
                observed.as_slice(),
                &mean,
                &samples,
                settings.gamma_grid,
                settings.step_margin,
            )?;
            gamma_trace.push(gamma.gamma);
            if gamma.gamma >= 1.0 {
                consecutive_full_gamma += 1;
                if consecutive_full_gamma >= 2 {
                    polishing = true;
                }
            } else {
                consecutive_full_gamma = 0;
            }
            let g = gamma.gamma;
            (0..spec.p()).map(|q| g * observed[q] + (1.0 - g) * mean[q]).collect()
        };

        let next = partial_step_update(&theta, &xi, &samples, settings.ridge_eps)?;
        let relative_change = next
            .iter()
            .zip(&theta)
            .map(|(new, old)| (new - old).abs() / (1.0 + old.abs()))
            .fold(0.0f64, f64::max);
        theta_trace.push(next.clone());
        theta = next;
        final_batches = Some(batches);
        final_mean = mean;

        if polishing {
            if relative_change < settings.stabilize_tol {
                stable_iters += 1;
            } else {
                stable_iters = 0;
            }
            if stable_iters >= 2 {
                converged_at = Some(iteration);
                break;
            }
        }
    }
    let iterations = match converged_at {
        Some(k) => k,
        None => return Err(Error::NonConvergence { iterations: settings.max_outer_iters }),
    };

    // Variance phase: fresh chains at the returned estimate.
    let mut variance_settings = settings.variance.clone();
    variance_settings.seed = derive_seed(settings.variance.seed, SamplerPhase::Variance, 0);
    let variance_batches = sample_series(spec, &theta, series, &variance_settings)?;
    let variance_samples = summed_stat_samples(&variance_batches);
    let fisher = inference::fisher_from_samples(spec, &variance_samples)?;
    let mcmc_se_stats = inference::mcmc_standard_error(&variance_samples)?;
    let variance = inference::variance_report(&theta, &fisher, &mcmc_se_stats, settings.ci_level)?;

    let batches = final_batches.expect("at least one outer iteration ran");
    Ok(FitResult {
        term_labels: spec.labels(),
        theta_hat: theta,
        variance,
        observed: observed.as_slice().to_vec(),
        sample_mean: final_mean,
        stat_chains: batches
            .iter()
            .map(|b| b.stat_chain.iter().map(|s| s.as_slice().to_vec()).collect())
            .collect(),
        loglik: None,
        aic: None,
        diagnostics: FitDiagnostics {
            gamma_trace,
            theta_trace,
            iterations,
            seed: settings.estimation.seed,
        },
    })
}
