//! Sufficient statistics, change statistics, and descriptive summaries.
//!
//! A [`ModelSpec`] is an ordered list of [`Term`]s; its order fixes the
//! coordinate order of every statistic vector, coefficient vector, and
//! covariance matrix in the crate.
//!
//! Terms fall in three groups:
//!
//! * contemporaneous endogenous terms (edge counts, isolates, geometrically
//!   weighted edgewise-shared partners and degrees) that read only the
//!   current network,
//! * lagged terms (stability, common friends/enemies) whose inner counts are
//!   taken on the previous network,
//! * exogenous terms that weight dyad states by a named covariate.
//!
//! The edgewise-shared counts are signed on both axes: `ESE_k` of an edge
//! counts third actors tied negatively to both endpoints, `ESF_k` counts
//! actors tied positively to both, and the superscript sign is the state of
//! the focal edge itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DyadState, DyadicCovariates, NetworkSeries, Sign, SignedNetwork};

/// Weighting form for geometrically weighted terms.
///
/// `Standard` is the usual declining-increment aggregation
/// `e^a * sum_k (1 - (1 - e^-a)^k) * count_k`, for which each additional
/// shared partner (or degree unit) contributes `(1 - e^-a)^k * e^a * e^-a`
/// less than the previous one and which matches the alternating k-triangle
/// equivalence. `Literal` weights `count_k` by `e^(a(1-k))` instead; it is
/// provided for comparison and selected via `gw_form = "literal"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GwForm {
    #[default]
    Standard,
    Literal,
}

impl GwForm {
    /// Weight given to one unit (edge or actor) with count `k`.
    #[inline]
    pub fn weight(self, alpha: f64, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self {
            GwForm::Standard => alpha.exp() * (1.0 - (1.0 - (-alpha).exp()).powi(k as i32)),
            GwForm::Literal => (alpha * (1.0 - k as f64)).exp(),
        }
    }
}

/// Sign restriction for exogenous terms: weight positive ties, negative
/// ties, or any tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignFilter {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    Any,
}

impl SignFilter {
    #[inline]
    fn matches(self, state: DyadState) -> bool {
        match self {
            SignFilter::Plus => state == DyadState::Plus,
            SignFilter::Minus => state == DyadState::Minus,
            SignFilter::Any => state != DyadState::Zero,
        }
    }
}

fn serialize_sign<S: serde::Serializer>(sign: &Sign, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(sign.label())
}

fn deserialize_sign<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Sign, D::Error> {
    let raw = String::deserialize(de)?;
    match raw.as_str() {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        other => Err(serde::de::Error::custom(format!("unknown sign '{other}'"))),
    }
}

/// One sufficient-statistic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// Count of ties with the given sign.
    Edges {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
    },
    /// Count of actors with zero degree in the given sign, regardless of
    /// their degree in the other sign.
    Isolates {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
    },
    /// Count of dyads holding the given sign in both the current and the
    /// previous network.
    Stability {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
    },
    /// Geometrically weighted edgewise-shared enemies of edges with the
    /// given sign.
    GwEse {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
        alpha: f64,
        #[serde(rename = "gw_form", default)]
        form: GwForm,
    },
    /// Geometrically weighted edgewise-shared friends of edges with the
    /// given sign.
    GwEsf {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
        alpha: f64,
        #[serde(rename = "gw_form", default)]
        form: GwForm,
    },
    /// Geometrically weighted degree counts in the given sign.
    GwDegree {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
        alpha: f64,
        #[serde(rename = "gw_form", default)]
        form: GwForm,
    },
    /// Sum of a dyadic covariate over ties passing the sign filter.
    Exo { sign: SignFilter, covariate: String },
    /// Lagged common-friends count: ties with the given sign at `t` weighted
    /// by the number of shared positive partners at `t-1`.
    CommonFriends {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
    },
    /// Lagged common-enemies count: as [`Term::CommonFriends`] with shared
    /// negative partners at `t-1`.
    CommonEnemies {
        #[serde(serialize_with = "serialize_sign", deserialize_with = "deserialize_sign")]
        sign: Sign,
    },
}

impl Term {
    /// Short label used for coefficient names in reports and CSV headers.
    pub fn label(&self) -> String {
        match self {
            Term::Edges { sign } => format!("edges{}", sign.label()),
            Term::Isolates { sign } => format!("isolates{}", sign.label()),
            Term::Stability { sign } => format!("stability{}", sign.label()),
            Term::GwEse { sign, .. } => format!("gwese{}", sign.label()),
            Term::GwEsf { sign, .. } => format!("gwesf{}", sign.label()),
            Term::GwDegree { sign, .. } => format!("gwd{}", sign.label()),
            Term::Exo { sign: SignFilter::Plus, covariate } => format!("exo+:{covariate}"),
            Term::Exo { sign: SignFilter::Minus, covariate } => format!("exo-:{covariate}"),
            Term::Exo { sign: SignFilter::Any, covariate } => format!("exo:{covariate}"),
            Term::CommonFriends { sign } => format!("cf{}", sign.label()),
            Term::CommonEnemies { sign } => format!("ce{}", sign.label()),
        }
    }

    /// Whether the term's change statistic is free of endogenous dependence
    /// on the rest of the current network. For these terms the conditional
    /// likelihood factorizes over dyads.
    pub fn is_dyadic_independent(&self) -> bool {
        matches!(
            self,
            Term::Edges { .. }
                | Term::Stability { .. }
                | Term::Exo { .. }
                | Term::CommonFriends { .. }
                | Term::CommonEnemies { .. }
        )
    }

    /// Whether the term reads the previous network.
    pub fn needs_lag(&self) -> bool {
        matches!(
            self,
            Term::Stability { .. } | Term::CommonFriends { .. } | Term::CommonEnemies { .. }
        )
    }

    pub fn covariate(&self) -> Option<&str> {
        match self {
            Term::Exo { covariate, .. } => Some(covariate),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Term::GwEse { alpha, .. } | Term::GwEsf { alpha, .. } | Term::GwDegree { alpha, .. } => {
                if !alpha.is_finite() || *alpha <= 0.0 {
                    return Err(Error::InvalidSettings(format!(
                        "term '{}' needs a finite decay alpha > 0, got {alpha}",
                        self.label()
                    )));
                }
            }
            Term::Exo { covariate, .. } => {
                if covariate.is_empty() {
                    return Err(Error::InvalidSettings("exo term with empty covariate name".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Ordered list of terms defining the statistic map `s(y_t, y_{t-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    terms: Vec<Term>,
}

impl ModelSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let spec = ModelSpec { terms };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::EmptySpec);
        }
        for term in &self.terms {
            term.validate()?;
        }
        Ok(())
    }

    /// Number of terms, i.e. the dimension `p` of statistic and coefficient
    /// vectors.
    pub fn p(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::label).collect()
    }

    /// Marks the dyadic-independent coordinate subset.
    pub fn dyadic_independent_mask(&self) -> Vec<bool> {
        self.terms.iter().map(Term::is_dyadic_independent).collect()
    }

    /// Checks the spec can be evaluated on the series: lag-dependent terms
    /// need genuine lag networks, exogenous terms need their covariates.
    pub fn validate_for_series(&self, series: &NetworkSeries) -> Result<()> {
        self.validate()?;
        for term in &self.terms {
            if term.needs_lag() && series.is_cross_sectional() {
                return Err(Error::MissingLagNetwork { term: term.label() });
            }
            if let Some(name) = term.covariate() {
                if !series.covariates().has_dyadic(name) {
                    return Err(Error::MissingCovariate { name: name.to_owned(), period: 1 });
                }
            }
        }
        Ok(())
    }
}

/// Real vector aligned coordinate-by-coordinate with a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatVector(pub Vec<f64>);

impl StatVector {
    pub fn zeros(p: usize) -> Self {
        StatVector(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn add_assign(&mut self, other: &StatVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &StatVector) -> StatVector {
        debug_assert_eq!(self.len(), other.len());
        StatVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dot(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(self.len(), theta.len());
        self.0.iter().zip(theta).map(|(a, b)| a * b).sum()
    }
}

impl std::ops::Index<usize> for StatVector {
    type Output = f64;
    fn index(&self, q: usize) -> &f64 {
        &self.0[q]
    }
}

/// Reads a dyad state, treating one dyad as `Zero` when requested. Change
/// statistics are defined on the network with the toggled dyad removed, so
/// every helper goes through this accessor.
#[inline]
fn read_state(y: &SignedNetwork, a: usize, b: usize, zeroed: Option<(usize, usize)>) -> DyadState {
    if let Some((zi, zj)) = zeroed {
        if (a == zi && b == zj) || (a == zj && b == zi) {
            return DyadState::Zero;
        }
    }
    y.state(a, b)
}

/// Number of third actors tied to both `a` and `b` in `state`.
#[inline]
fn shared_count(
    y: &SignedNetwork,
    a: usize,
    b: usize,
    state: DyadState,
    zeroed: Option<(usize, usize)>,
) -> usize {
    (0..y.actor_count())
        .filter(|&h| {
            h != a
                && h != b
                && read_state(y, a, h, zeroed) == state
                && read_state(y, b, h, zeroed) == state
        })
        .count()
}

fn gw_shared_sum(
    y: &SignedNetwork,
    focal: DyadState,
    partner: DyadState,
    alpha: f64,
    form: GwForm,
) -> f64 {
    y.dyads()
        .filter(|&(i, j)| y.state(i, j) == focal)
        .map(|(i, j)| form.weight(alpha, shared_count(y, i, j, partner, None)))
        .sum()
}

fn lagged_shared_sum(y: &SignedNetwork, y_prev: &SignedNetwork, focal: DyadState, partner: DyadState) -> f64 {
    y.dyads()
        .filter(|&(i, j)| y.state(i, j) == focal)
        .map(|(i, j)| shared_count(y_prev, i, j, partner, None) as f64)
        .sum()
}

fn lag_for<'a>(term: &Term, y_prev: Option<&'a SignedNetwork>) -> Result<&'a SignedNetwork> {
    y_prev.ok_or_else(|| Error::MissingLagNetwork { term: term.label() })
}

fn covariate_value(values: &[f64], y: &SignedNetwork, i: usize, j: usize, name: &str) -> Result<f64> {
    if values.len() != y.dyad_count() {
        return Err(Error::DimensionMismatch(format!(
            "covariate '{name}' has {} entries, network has {} dyads",
            values.len(),
            y.dyad_count()
        )));
    }
    let x = values[y.dyad_index(i, j)];
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("covariate '{name}' at dyad ({i},{j})")));
    }
    Ok(x)
}

/// Evaluates one term on `(y, y_prev)`.
pub fn eval_term(
    term: &Term,
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
) -> Result<f64> {
    let n = y.actor_count();
    match term {
        Term::Edges { sign } => Ok(y.count(sign.state()) as f64),
        Term::Isolates { sign } => {
            let state = sign.state();
            Ok((0..n).filter(|&a| y.degree(a, state) == 0).count() as f64)
        }
        Term::Stability { sign } => {
            let prev = lag_for(term, y_prev)?;
            if prev.actor_count() != n {
                return Err(Error::DimensionMismatch(
                    "lag network actor count differs from current network".into(),
                ));
            }
            let state = sign.state();
            Ok(y
                .dyads()
                .filter(|&(i, j)| y.state(i, j) == state && prev.state(i, j) == state)
                .count() as f64)
        }
        Term::GwEse { sign, alpha, form } => {
            Ok(gw_shared_sum(y, sign.state(), DyadState::Minus, *alpha, *form))
        }
        Term::GwEsf { sign, alpha, form } => {
            Ok(gw_shared_sum(y, sign.state(), DyadState::Plus, *alpha, *form))
        }
        Term::GwDegree { sign, alpha, form } => {
            let state = sign.state();
            Ok((0..n).map(|a| form.weight(*alpha, y.degree(a, state))).sum())
        }
        Term::Exo { sign, covariate } => {
            let values = covariates.get(covariate)?;
            let mut total = 0.0;
            for (i, j) in y.dyads() {
                if sign.matches(y.state(i, j)) {
                    total += covariate_value(values, y, i, j, covariate)?;
                }
            }
            Ok(total)
        }
        Term::CommonFriends { sign } => {
            let prev = lag_for(term, y_prev)?;
            Ok(lagged_shared_sum(y, prev, sign.state(), DyadState::Plus))
        }
        Term::CommonEnemies { sign } => {
            let prev = lag_for(term, y_prev)?;
            Ok(lagged_shared_sum(y, prev, sign.state(), DyadState::Minus))
        }
    }
}

/// Evaluates the full statistic vector `s(y, y_prev)` in spec order.
pub fn eval_vector(
    spec: &ModelSpec,
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
) -> Result<StatVector> {
    let mut values = Vec::with_capacity(spec.p());
    for term in spec.terms() {
        values.push(eval_term(term, y, y_prev, covariates)?);
    }
    Ok(StatVector(values))
}

/// Observed summed statistics `sum_t s(y_t, y_{t-1})` over all modeled
/// periods of a series.
pub fn sum_over_time(spec: &ModelSpec, series: &NetworkSeries) -> Result<StatVector> {
    spec.validate_for_series(series)?;
    let mut total = StatVector::zeros(spec.p());
    for t in 1..=series.period_count() {
        let per_period = eval_vector(
            spec,
            series.network(t),
            Some(series.lag(t)),
            &series.covariates_for(t),
        )?;
        total.add_assign(&per_period);
    }
    Ok(total)
}

/// Change in one term from setting dyad `(i, j)` of `y` to `to` versus
/// `Zero`, holding everything else fixed. The stored state of `(i, j)` is
/// ignored: all counts are taken on the network with that dyad zeroed.
pub(crate) fn change_term(
    term: &Term,
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
    i: usize,
    j: usize,
    to: DyadState,
) -> Result<f64> {
    if to == DyadState::Zero {
        return Ok(0.0);
    }
    match term {
        Term::Edges { sign } => Ok(if to == sign.state() { 1.0 } else { 0.0 }),
        Term::Isolates { sign } => {
            let state = sign.state();
            if to != state {
                return Ok(0.0);
            }
            let mut delta = 0.0;
            if y.degree_excluding(i, state, j) == 0 {
                delta -= 1.0;
            }
            if y.degree_excluding(j, state, i) == 0 {
                delta -= 1.0;
            }
            Ok(delta)
        }
        Term::Stability { sign } => {
            let prev = lag_for(term, y_prev)?;
            let state = sign.state();
            Ok(if to == state && prev.state(i, j) == state { 1.0 } else { 0.0 })
        }
        Term::GwEse { sign, alpha, form } => {
            Ok(change_gw_shared(y, i, j, to, sign.state(), DyadState::Minus, *alpha, *form))
        }
        Term::GwEsf { sign, alpha, form } => {
            Ok(change_gw_shared(y, i, j, to, sign.state(), DyadState::Plus, *alpha, *form))
        }
        Term::GwDegree { sign, alpha, form } => {
            let state = sign.state();
            if to != state {
                return Ok(0.0);
            }
            let di = y.degree_excluding(i, state, j);
            let dj = y.degree_excluding(j, state, i);
            Ok(form.weight(*alpha, di + 1) - form.weight(*alpha, di)
                + form.weight(*alpha, dj + 1)
                - form.weight(*alpha, dj))
        }
        Term::Exo { sign, covariate } => {
            if !sign.matches(to) {
                return Ok(0.0);
            }
            let values = covariates.get(covariate)?;
            covariate_value(values, y, i, j, covariate)
        }
        Term::CommonFriends { sign } => {
            let prev = lag_for(term, y_prev)?;
            if to != sign.state() {
                return Ok(0.0);
            }
            Ok(shared_count(prev, i, j, DyadState::Plus, None) as f64)
        }
        Term::CommonEnemies { sign } => {
            let prev = lag_for(term, y_prev)?;
            if to != sign.state() {
                return Ok(0.0);
            }
            Ok(shared_count(prev, i, j, DyadState::Minus, None) as f64)
        }
    }
}

/// Change in a geometrically weighted shared-partner term from setting
/// `(i, j)` to `to`. Two effects can fire: the dyad itself becomes a focal
/// edge, and (when `to` matches the partner sign) existing focal edges
/// incident to `i` or `j` gain a shared partner.
fn change_gw_shared(
    y: &SignedNetwork,
    i: usize,
    j: usize,
    to: DyadState,
    focal: DyadState,
    partner: DyadState,
    alpha: f64,
    form: GwForm,
) -> f64 {
    let zeroed = Some((i, j));
    let mut delta = 0.0;
    if to == focal {
        delta += form.weight(alpha, shared_count(y, i, j, partner, zeroed));
    }
    if to == partner {
        for b in 0..y.actor_count() {
            if b == i || b == j {
                continue;
            }
            // Focal edge (i, b) gains partner j once y_ij holds the partner
            // sign, provided the other leg y_bj already does.
            if read_state(y, i, b, zeroed) == focal && read_state(y, b, j, zeroed) == partner {
                let k = shared_count(y, i, b, partner, zeroed);
                delta += form.weight(alpha, k + 1) - form.weight(alpha, k);
            }
            if read_state(y, j, b, zeroed) == focal && read_state(y, b, i, zeroed) == partner {
                let k = shared_count(y, j, b, partner, zeroed);
                delta += form.weight(alpha, k + 1) - form.weight(alpha, k);
            }
        }
    }
    delta
}

/// Change statistics `Delta^{0 -> to}` for dyad `(i, j)`: the statistic
/// vector of `y` with `y_ij := to` minus that of `y` with `y_ij := Zero`.
/// Uses per-term local formulas; equals the brute difference of two
/// [`eval_vector`] calls.
pub fn change_statistics(
    spec: &ModelSpec,
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
    i: usize,
    j: usize,
    to: DyadState,
) -> Result<StatVector> {
    let n = y.actor_count();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    if i == j {
        return Err(Error::SelfLoop { actor: i });
    }
    let mut values = Vec::with_capacity(spec.p());
    for term in spec.terms() {
        values.push(change_term(term, y, y_prev, covariates, i, j, to)?);
    }
    Ok(StatVector(values))
}

/// Relative log-odds of dyad `(i, j)` being `Plus` or `Minus` rather than
/// `Zero`, given the rest of the network: `(theta' Delta^{0->+},
/// theta' Delta^{0->-})`.
pub fn conditional_logodds(
    spec: &ModelSpec,
    theta: &[f64],
    y: &SignedNetwork,
    y_prev: Option<&SignedNetwork>,
    covariates: &DyadicCovariates,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    if theta.len() != spec.p() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} coordinates, spec has {}",
            theta.len(),
            spec.p()
        )));
    }
    let plus = change_statistics(spec, y, y_prev, covariates, i, j, DyadState::Plus)?;
    let minus = change_statistics(spec, y, y_prev, covariates, i, j, DyadState::Minus)?;
    Ok((plus.dot(theta), minus.dot(theta)))
}

/// Balance notion for the triad census.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMode {
    /// Balanced iff the triad has an even number of negative ties (zero or
    /// two), i.e. an odd number of positive ties.
    Strong,
    /// As `Strong`, but all-negative triads also count as balanced.
    Weak,
}

/// Result of [`triad_balance_census`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceCensus {
    pub balanced: usize,
    pub imbalanced: usize,
    /// `balanced / (balanced + imbalanced)`; NaN when the network has no
    /// complete triads.
    pub fraction_balanced: f64,
}

/// Census over complete triads (all three dyads non-zero) only.
pub fn triad_balance_census(y: &SignedNetwork, mode: BalanceMode) -> BalanceCensus {
    let n = y.actor_count();
    let mut balanced = 0usize;
    let mut imbalanced = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let yij = y.state(i, j);
            if yij == DyadState::Zero {
                continue;
            }
            for k in j + 1..n {
                let yik = y.state(i, k);
                let yjk = y.state(j, k);
                if yik == DyadState::Zero || yjk == DyadState::Zero {
                    continue;
                }
                let minus_ties = [yij, yik, yjk]
                    .iter()
                    .filter(|&&s| s == DyadState::Minus)
                    .count();
                let is_balanced = match mode {
                    BalanceMode::Strong => minus_ties % 2 == 0,
                    BalanceMode::Weak => minus_ties % 2 == 0 || minus_ties == 3,
                };
                if is_balanced {
                    balanced += 1;
                } else {
                    imbalanced += 1;
                }
            }
        }
    }
    let total = balanced + imbalanced;
    BalanceCensus {
        balanced,
        imbalanced,
        fraction_balanced: if total > 0 { balanced as f64 / total as f64 } else { f64::NAN },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LN2: f64 = std::f64::consts::LN_2;

    fn net(n: usize, edges: &[(usize, usize, i8)]) -> SignedNetwork {
        SignedNetwork::from_edges(n, edges).unwrap()
    }

    fn eval(term: &Term, y: &SignedNetwork) -> f64 {
        eval_term(term, y, None, &DyadicCovariates::none()).unwrap()
    }

    #[test]
    fn edge_counts() {
        let y = net(3, &[(0, 1, 1), (0, 2, -1)]);
        assert_eq!(eval(&Term::Edges { sign: Sign::Plus }, &y), 1.0);
        assert_eq!(eval(&Term::Edges { sign: Sign::Minus }, &y), 1.0);
    }

    #[test]
    fn gwese_single_shared_enemy_has_unit_weight_in_both_forms() {
        // One positive edge whose endpoints share exactly one enemy.
        let y = net(3, &[(0, 1, 1), (0, 2, -1), (1, 2, -1)]);
        for form in [GwForm::Standard, GwForm::Literal] {
            let term = Term::GwEse { sign: Sign::Plus, alpha: LN2, form };
            assert_abs_diff_eq!(eval(&term, &y), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn gwesf_all_positive_triangle() {
        let y = net(3, &[(0, 1, 1), (0, 2, 1), (1, 2, 1)]);
        for alpha in [0.1, LN2, 1.5, 3.0] {
            let term = Term::GwEsf { sign: Sign::Plus, alpha, form: GwForm::Standard };
            assert_abs_diff_eq!(eval(&term, &y), 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gw_forms_differ_at_two_shared_partners() {
        // Edge (0,1) positive with two shared enemies 2 and 3.
        let y = net(4, &[(0, 1, 1), (0, 2, -1), (1, 2, -1), (0, 3, -1), (1, 3, -1)]);
        let standard = Term::GwEse { sign: Sign::Plus, alpha: LN2, form: GwForm::Standard };
        let literal = Term::GwEse { sign: Sign::Plus, alpha: LN2, form: GwForm::Literal };
        // e^a (1 - (1 - e^-a)^2) with a = ln 2: 2 * (1 - 1/4) = 1.5.
        assert_abs_diff_eq!(eval(&standard, &y), 1.5, epsilon = 1e-12);
        // e^(a(1-2)) = e^-a = 1/2.
        assert_abs_diff_eq!(eval(&literal, &y), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn shared_partner_counts_are_signed_on_both_axes() {
        // Edge (0,1) negative; 2 is a shared friend, 3 a shared enemy.
        let y = net(4, &[(0, 1, -1), (0, 2, 1), (1, 2, 1), (0, 3, -1), (1, 3, -1)]);
        let esf_minus = Term::GwEsf { sign: Sign::Minus, alpha: LN2, form: GwForm::Standard };
        let ese_minus = Term::GwEse { sign: Sign::Minus, alpha: LN2, form: GwForm::Standard };
        let esf_plus = Term::GwEsf { sign: Sign::Plus, alpha: LN2, form: GwForm::Standard };
        // Only (0,1) has a shared friend; all three negative edges have
        // exactly one shared enemy each.
        assert_abs_diff_eq!(eval(&esf_minus, &y), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eval(&ese_minus, &y), 3.0, epsilon = 1e-12);
        // The positive edges (0,2) and (1,2) have no shared friends.
        assert_abs_diff_eq!(eval(&esf_plus, &y), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn stability_counts_persisting_ties() {
        let prev = net(3, &[(0, 1, 1), (0, 2, 1)]);
        let term = Term::Stability { sign: Sign::Plus };
        let value = eval_term(&term, &prev, Some(&prev), &DyadicCovariates::none()).unwrap();
        assert_eq!(value, 2.0);
        let err = eval_term(&term, &prev, None, &DyadicCovariates::none()).unwrap_err();
        assert!(matches!(err, Error::MissingLagNetwork { .. }));
    }

    #[test]
    fn common_friends_counts_lagged_two_paths() {
        // At t the edge (0,1) is positive; at t-1 both endpoints were tied
        // positively to 2 and to 3.
        let y = net(4, &[(0, 1, 1)]);
        let prev = net(4, &[(0, 2, 1), (1, 2, 1), (0, 3, 1), (1, 3, 1)]);
        let term = Term::CommonFriends { sign: Sign::Plus };
        let value = eval_term(&term, &y, Some(&prev), &DyadicCovariates::none()).unwrap();
        assert_eq!(value, 2.0);
    }

    #[test]
    fn isolates_count_per_sign() {
        // 0-1 positive, 2 negative to 0: actor 2 is a positive isolate,
        // actors 1 and 3 are negative isolates (3 isolated entirely).
        let y = net(4, &[(0, 1, 1), (0, 2, -1)]);
        assert_eq!(eval(&Term::Isolates { sign: Sign::Plus }, &y), 2.0); // actors 2, 3
        assert_eq!(eval(&Term::Isolates { sign: Sign::Minus }, &y), 2.0); // actors 1, 3
    }

    #[test]
    fn exo_terms_weight_by_covariate() {
        let y = net(3, &[(0, 1, 1), (0, 2, -1)]);
        let values = [0.5, 2.0, 7.0];
        let mut covs = DyadicCovariates::none();
        covs.insert("x", &values);
        let any = Term::Exo { sign: SignFilter::Any, covariate: "x".into() };
        let pos = Term::Exo { sign: SignFilter::Plus, covariate: "x".into() };
        let neg = Term::Exo { sign: SignFilter::Minus, covariate: "x".into() };
        assert_eq!(eval_term(&any, &y, None, &covs).unwrap(), 2.5);
        assert_eq!(eval_term(&pos, &y, None, &covs).unwrap(), 0.5);
        assert_eq!(eval_term(&neg, &y, None, &covs).unwrap(), 2.0);
        let missing = eval_term(&any, &y, None, &DyadicCovariates::none()).unwrap_err();
        assert!(matches!(missing, Error::MissingCovariate { .. }));
    }

    #[test]
    fn eval_vector_follows_spec_order() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::Edges { sign: Sign::Minus },
        ])
        .unwrap();
        let empty = SignedNetwork::empty(4).unwrap();
        assert_eq!(
            eval_vector(&spec, &empty, None, &DyadicCovariates::none()).unwrap(),
            StatVector(vec![0.0, 0.0])
        );

        let triangle = net(3, &[(0, 1, 1), (0, 2, 1), (1, 2, 1)]);
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEsf { sign: Sign::Plus, alpha: LN2, form: GwForm::Standard },
        ])
        .unwrap();
        let v = eval_vector(&spec, &triangle, None, &DyadicCovariates::none()).unwrap();
        assert_abs_diff_eq!(v[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sum_over_time_is_additive() {
        use crate::network::{CovariateSet, NetworkSeries};
        let y = net(3, &[(0, 1, 1), (0, 2, -1)]);
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::Edges { sign: Sign::Minus },
        ])
        .unwrap();
        // Duplicated period with no lag terms: exactly twice one period.
        let series = NetworkSeries::new(
            vec![SignedNetwork::empty(3).unwrap(), y.clone(), y.clone()],
            CovariateSet::empty(),
        )
        .unwrap();
        let total = sum_over_time(&spec, &series).unwrap();
        let single = eval_vector(&spec, &y, None, &DyadicCovariates::none()).unwrap();
        assert_eq!(total.0, vec![2.0 * single[0], 2.0 * single[1]]);
    }

    #[test]
    fn lag_terms_rejected_on_cross_sectional_series() {
        use crate::network::{CovariateSet, NetworkSeries};
        let y = net(3, &[(0, 1, 1)]);
        let series = NetworkSeries::cross_sectional(y, CovariateSet::empty()).unwrap();
        let spec = ModelSpec::new(vec![Term::Stability { sign: Sign::Plus }]).unwrap();
        assert!(matches!(
            sum_over_time(&spec, &series),
            Err(Error::MissingLagNetwork { .. })
        ));
    }

    #[test]
    fn change_to_zero_is_zero_vector() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEse { sign: Sign::Plus, alpha: LN2, form: GwForm::Standard },
        ])
        .unwrap();
        let y = net(4, &[(0, 1, 1), (2, 3, -1)]);
        let d = change_statistics(&spec, &y, None, &DyadicCovariates::none(), 0, 2, DyadState::Zero)
            .unwrap();
        assert_eq!(d.0, vec![0.0, 0.0]);
    }

    #[test]
    fn change_ignores_the_stored_state_of_the_dyad() {
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Minus }]).unwrap();
        let y = net(3, &[(0, 1, -1)]);
        // Dyad already Minus; the change 0 -> Minus is still +1.
        let d = change_statistics(&spec, &y, None, &DyadicCovariates::none(), 0, 1, DyadState::Minus)
            .unwrap();
        assert_eq!(d.0, vec![1.0]);
    }

    #[test]
    fn change_rejects_self_loops_and_bad_indices() {
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Plus }]).unwrap();
        let y = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        assert!(change_statistics(&spec, &y, None, &covs, 1, 1, DyadState::Plus).is_err());
        assert!(change_statistics(&spec, &y, None, &covs, 0, 5, DyadState::Plus).is_err());
    }

    #[test]
    fn conditional_logodds_inner_product() {
        let spec = ModelSpec::new(vec![Term::Edges { sign: Sign::Plus }]).unwrap();
        let y = SignedNetwork::empty(3).unwrap();
        let covs = DyadicCovariates::none();
        let (lp, lm) = conditional_logodds(&spec, &[LN2], &y, None, &covs, 0, 1).unwrap();
        assert_abs_diff_eq!(lp, LN2, epsilon = 1e-15);
        assert_abs_diff_eq!(lm, 0.0, epsilon = 1e-15);

        let (zp, zm) = conditional_logodds(&spec, &[0.0], &y, None, &covs, 0, 1).unwrap();
        assert_eq!((zp, zm), (0.0, 0.0));

        assert!(conditional_logodds(&spec, &[1.0, 2.0], &y, None, &covs, 0, 1).is_err());
    }

    #[test]
    fn census_classifies_canonical_triangles() {
        let all_plus = net(3, &[(0, 1, 1), (0, 2, 1), (1, 2, 1)]);
        let one_minus = net(3, &[(0, 1, 1), (0, 2, 1), (1, 2, -1)]);
        let all_minus = net(3, &[(0, 1, -1), (0, 2, -1), (1, 2, -1)]);

        for mode in [BalanceMode::Strong, BalanceMode::Weak] {
            assert_eq!(triad_balance_census(&all_plus, mode).balanced, 1);
            assert_eq!(triad_balance_census(&one_minus, mode).imbalanced, 1);
        }
        assert_eq!(triad_balance_census(&all_minus, BalanceMode::Strong).imbalanced, 1);
        assert_eq!(triad_balance_census(&all_minus, BalanceMode::Weak).balanced, 1);
    }

    #[test]
    fn census_skips_incomplete_triads() {
        let y = net(3, &[(0, 1, 1), (0, 2, 1)]);
        let census = triad_balance_census(&y, BalanceMode::Strong);
        assert_eq!((census.balanced, census.imbalanced), (0, 0));
        assert!(census.fraction_balanced.is_nan());
    }

    #[test]
    fn gw_standard_approaches_sharing_edge_count_as_alpha_vanishes() {
        // Two positive edges with >= 1 shared enemy, one without.
        let y = net(
            5,
            &[(0, 1, 1), (0, 2, -1), (1, 2, -1), (1, 3, 1), (2, 3, -1), (0, 4, 1)],
        );
        // Edge (0,1): shared enemy 2. Edge (1,3): shared enemy 2. Edge (0,4): none.
        let term = Term::GwEse { sign: Sign::Plus, alpha: 1e-8, form: GwForm::Standard };
        assert_abs_diff_eq!(eval(&term, &y), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn spec_serialization_round_trips() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::GwEsf { sign: Sign::Minus, alpha: 1.5, form: GwForm::Literal },
            Term::Exo { sign: SignFilter::Any, covariate: "distance".into() },
            Term::CommonEnemies { sign: Sign::Minus },
        ])
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        assert!(json.contains("\"gw_form\":\"literal\""));
        assert!(json.contains("\"kind\":\"gw_esf\""));
    }

    #[test]
    fn labels_and_independence_mask() {
        let spec = ModelSpec::new(vec![
            Term::Edges { sign: Sign::Plus },
            Term::Isolates { sign: Sign::Minus },
            Term::GwDegree { sign: Sign::Plus, alpha: 1.5, form: GwForm::Standard },
            Term::Exo { sign: SignFilter::Plus, covariate: "x".into() },
            Term::Stability { sign: Sign::Minus },
        ])
        .unwrap();
        assert_eq!(spec.labels(), vec!["edges+", "isolates-", "gwd+", "exo+:x", "stability-"]);
        assert_eq!(
            spec.dyadic_independent_mask(),
            vec![true, false, false, true, true]
        );
    }

    #[test]
    fn invalid_alpha_rejected() {
        let bad = ModelSpec::new(vec![Term::GwEse {
            sign: Sign::Plus,
            alpha: 0.0,
            form: GwForm::Standard,
        }]);
        assert!(matches!(bad, Err(Error::InvalidSettings(_))));
        assert!(matches!(ModelSpec::new(vec![]), Err(Error::EmptySpec)));
    }
}
