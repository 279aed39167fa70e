//! Signed-network and panel containers.
//!
//! A [`SignedNetwork`] stores the state of every unordered actor pair
//! (dyad) of an undirected network without self-loops. Dyad states live in
//! a flat upper-triangular array: the dyad `(i, j)` with `i < j` sits at
//! index `i*(2n - i - 1)/2 + (j - i - 1)`, which makes single-dyad toggles
//! O(1) in the Gibbs inner loop.
//!
//! A [`NetworkSeries`] is an ordered panel `y_0..y_T` over one shared actor
//! set plus per-period covariates. Index 0 is the conditioning network:
//! modeled periods are `t = 1..=T`. Cross-sectional data is represented as
//! `T = 1` with an all-zero `y_0`, so estimation code has a single path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of one dyad: positive tie, negative tie, or no tie.
///
/// `Zero` is the reference state; change statistics and conditional odds are
/// defined relative to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DyadState {
    Plus,
    Minus,
    Zero,
}

impl DyadState {
    /// Integer encoding used at file boundaries: `+1`, `-1`, `0`.
    pub fn to_int(self) -> i8 {
        match self {
            DyadState::Plus => 1,
            DyadState::Minus => -1,
            DyadState::Zero => 0,
        }
    }

    pub fn from_int(value: i8) -> Option<Self> {
        match value {
            1 => Some(DyadState::Plus),
            -1 => Some(DyadState::Minus),
            0 => Some(DyadState::Zero),
            _ => None,
        }
    }

    pub fn is_tie(self) -> bool {
        self != DyadState::Zero
    }
}

/// Tie sign, for statistics that exist in a positive and a negative variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn state(self) -> DyadState {
        match self {
            Sign::Plus => DyadState::Plus,
            Sign::Minus => DyadState::Minus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Undirected signed network on `n` actors, stored as an upper-triangular
/// dyad array. Symmetry (`y_ij = y_ji`) holds by construction and the
/// diagonal is absent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedNetwork {
    n: usize,
    states: Vec<DyadState>,
}

impl SignedNetwork {
    /// All-zero network on `n >= 2` actors.
    pub fn empty(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewActors { n });
        }
        Ok(SignedNetwork {
            n,
            states: vec![DyadState::Zero; n * (n - 1) / 2],
        })
    }

    /// Builds a network from an edge list of `(i, j, sign)` with 0-based
    /// actor indices and `sign` in `{+1, -1}`. Unlisted dyads stay `Zero`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, i8)]) -> Result<Self> {
        let mut network = SignedNetwork::empty(n)?;
        for &(i, j, sign) in edges {
            let state = match sign {
                1 => DyadState::Plus,
                -1 => DyadState::Minus,
                _ => {
                    return Err(Error::InvalidSettings(format!(
                        "edge ({i},{j}) has sign {sign}, expected +1 or -1"
                    )))
                }
            };
            let index = network.checked_index(i, j)?;
            if network.states[index] != DyadState::Zero {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                return Err(Error::DuplicateDyad { i: a, j: b });
            }
            network.states[index] = state;
        }
        Ok(network)
    }

    pub fn actor_count(&self) -> usize {
        self.n
    }

    pub fn dyad_count(&self) -> usize {
        self.states.len()
    }

    /// Flat index of dyad `(i, j)` in the documented upper-triangular order.
    #[inline]
    pub fn dyad_index(&self, i: usize, j: usize) -> usize {
        self.index_unchecked(i, j)
    }

    #[inline]
    fn index_unchecked(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n && j < self.n);
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn checked_index(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if j >= self.n {
            return Err(Error::IndexOutOfRange { index: j, n: self.n });
        }
        if i == j {
            return Err(Error::SelfLoop { actor: i });
        }
        Ok(self.index_unchecked(i, j))
    }

    /// Dyad state, panicking on self-loops or out-of-range actors. Hot-path
    /// accessor; use [`get_dyad`](Self::get_dyad) for validated access.
    #[inline]
    pub fn state(&self, i: usize, j: usize) -> DyadState {
        self.states[self.index_unchecked(i, j)]
    }

    #[inline]
    pub fn set_state(&mut self, i: usize, j: usize, state: DyadState) {
        let index = self.index_unchecked(i, j);
        self.states[index] = state;
    }

    /// Validated dyad read; order of `i` and `j` does not matter.
    pub fn get_dyad(&self, i: usize, j: usize) -> Result<DyadState> {
        Ok(self.states[self.checked_index(i, j)?])
    }

    /// Validated dyad write.
    pub fn set_dyad(&mut self, i: usize, j: usize, state: DyadState) -> Result<()> {
        let index = self.checked_index(i, j)?;
        self.states[index] = state;
        Ok(())
    }

    /// State by flat dyad index (the documented upper-triangular order).
    #[inline]
    pub fn state_by_index(&self, index: usize) -> DyadState {
        self.states[index]
    }

    #[inline]
    pub fn set_state_by_index(&mut self, index: usize, state: DyadState) {
        self.states[index] = state;
    }

    /// Number of dyads incident to `actor` with the given sign.
    pub fn signed_degree(&self, actor: usize, sign: Sign) -> Result<usize> {
        if actor >= self.n {
            return Err(Error::IndexOutOfRange { index: actor, n: self.n });
        }
        Ok(self.degree(actor, sign.state()))
    }

    /// Unvalidated degree count in one state.
    #[inline]
    pub fn degree(&self, actor: usize, state: DyadState) -> usize {
        (0..self.n)
            .filter(|&h| h != actor && self.state(actor, h) == state)
            .count()
    }

    /// Degree of `actor` in `state` ignoring the dyad `(actor, excluded)`,
    /// i.e. the degree in the network with that dyad set to `Zero`.
    #[inline]
    pub fn degree_excluding(&self, actor: usize, state: DyadState, excluded: usize) -> usize {
        (0..self.n)
            .filter(|&h| h != actor && h != excluded && self.state(actor, h) == state)
            .count()
    }

    /// Iterates all dyads `(i, j)` with `i < j` in flat index order.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    /// Iterates non-zero dyads as `(i, j, state)`.
    pub fn ties(&self) -> impl Iterator<Item = (usize, usize, DyadState)> + '_ {
        self.dyads().filter_map(|(i, j)| {
            let s = self.state(i, j);
            s.is_tie().then_some((i, j, s))
        })
    }

    /// Counts dyads in the given state.
    pub fn count(&self, state: DyadState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn is_empty_network(&self) -> bool {
        self.states.iter().all(|&s| s == DyadState::Zero)
    }

    pub fn is_complete(&self) -> bool {
        self.states.iter().all(|&s| s != DyadState::Zero)
    }

    /// Base-3 encoding of the dyad array (dyad 0 least significant;
    /// Zero=0, Plus=1, Minus=2). Only valid for networks with at most 40
    /// dyads; used to key empirical distributions over small spaces.
    pub fn state_index(&self) -> u64 {
        assert!(self.states.len() <= 40, "state_index overflows beyond 40 dyads");
        let mut key = 0u64;
        for &s in self.states.iter().rev() {
            let digit = match s {
                DyadState::Zero => 0,
                DyadState::Plus => 1,
                DyadState::Minus => 2,
            };
            key = key * 3 + digit;
        }
        key
    }

    /// Applies a permutation of the actor labels; `perm[old] = new`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation length {} does not match actor count {}",
                perm.len(),
                self.n
            )));
        }
        let mut out = SignedNetwork::empty(self.n)?;
        for (i, j) in self.dyads() {
            out.set_state(perm[i], perm[j], self.state(i, j));
        }
        Ok(out)
    }
}

/// Dyadic covariate values for a single modeled period, keyed by name.
/// Values are flat upper-triangular arrays aligned with the dyad index of
/// the networks they accompany.
#[derive(Debug, Clone, Default)]
pub struct DyadicCovariates<'a> {
    period: usize,
    values: BTreeMap<&'a str, &'a [f64]>,
}

impl<'a> DyadicCovariates<'a> {
    pub fn none() -> Self {
        DyadicCovariates::default()
    }

    pub fn for_single_period(period: usize) -> Self {
        DyadicCovariates { period, values: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &'a str, values: &'a [f64]) {
        self.values.insert(name, values);
    }

    pub fn get(&self, name: &str) -> Result<&'a [f64]> {
        self.values.get(name).copied().ok_or_else(|| Error::MissingCovariate {
            name: name.to_owned(),
            period: self.period,
        })
    }
}

/// Named covariates for every modeled period of a series.
///
/// Dyadic covariates hold one upper-triangular array per modeled period
/// `t = 1..=T` (stored at index `t - 1`). Nodal covariates hold one value
/// per actor per modeled period; statistic terms only consume dyadic
/// covariates, so nodal data is transformed at ingestion via
/// [`nodal_abs_diff`] or [`nodal_match`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CovariateSet {
    dyadic: BTreeMap<String, Vec<Vec<f64>>>,
    nodal: BTreeMap<String, Vec<Vec<f64>>>,
}

impl CovariateSet {
    pub fn empty() -> Self {
        CovariateSet::default()
    }

    /// Registers a dyadic covariate with one flat upper-triangular array per
    /// modeled period.
    pub fn insert_dyadic(&mut self, name: impl Into<String>, per_period: Vec<Vec<f64>>) {
        self.dyadic.insert(name.into(), per_period);
    }

    pub fn insert_nodal(&mut self, name: impl Into<String>, per_period: Vec<Vec<f64>>) {
        self.nodal.insert(name.into(), per_period);
    }

    pub fn dyadic_names(&self) -> impl Iterator<Item = &str> {
        self.dyadic.keys().map(String::as_str)
    }

    pub fn has_dyadic(&self, name: &str) -> bool {
        self.dyadic.contains_key(name)
    }

    /// View of the dyadic covariates for modeled period `t` (1-based).
    pub fn for_period(&self, t: usize) -> DyadicCovariates<'_> {
        let mut view = DyadicCovariates::for_single_period(t);
        for (name, per_period) in &self.dyadic {
            if let Some(values) = per_period.get(t - 1) {
                view.insert(name, values);
            }
        }
        view
    }

    /// Checks dimensions against an `n`-actor series with `periods` modeled
    /// periods, and that every stored value is finite.
    pub fn validate(&self, n: usize, periods: usize) -> Result<()> {
        let dyads = n * (n - 1) / 2;
        for (name, per_period) in &self.dyadic {
            if per_period.len() != periods {
                return Err(Error::DimensionMismatch(format!(
                    "dyadic covariate '{name}' covers {} periods, series has {periods}",
                    per_period.len()
                )));
            }
            for (t, values) in per_period.iter().enumerate() {
                if values.len() != dyads {
                    return Err(Error::DimensionMismatch(format!(
                        "dyadic covariate '{name}' period {} has {} entries, expected {dyads}",
                        t + 1,
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "dyadic covariate '{name}' period {}",
                        t + 1
                    )));
                }
            }
        }
        for (name, per_period) in &self.nodal {
            if per_period.len() != periods {
                return Err(Error::DimensionMismatch(format!(
                    "nodal covariate '{name}' covers {} periods, series has {periods}",
                    per_period.len()
                )));
            }
            for (t, values) in per_period.iter().enumerate() {
                if values.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "nodal covariate '{name}' period {} has {} entries, expected {n}",
                        t + 1,
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "nodal covariate '{name}' period {}",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Absolute-difference transform of a nodal attribute to the dyadic level:
/// `x_ij = |x_i - x_j|` in upper-triangular order.
pub fn nodal_abs_diff(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((values[i] - values[j]).abs());
        }
    }
    out
}

/// Equality-indicator transform of a categorical nodal attribute:
/// `x_ij = 1` if `x_i = x_j`, else 0.
pub fn nodal_match(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(if values[i] == values[j] { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Ordered panel of signed networks `y_0..y_T` sharing one actor set, plus
/// per-period covariates. `y_0` conditions the first modeled period.
#[derive(Debug, Clone)]
pub struct NetworkSeries {
    networks: Vec<SignedNetwork>,
    covariates: CovariateSet,
    cross_sectional: bool,
}

impl NetworkSeries {
    /// Dynamic panel from at least two networks (`T >= 1` modeled periods).
    pub fn new(networks: Vec<SignedNetwork>, covariates: CovariateSet) -> Result<Self> {
        if networks.len() < 2 {
            return Err(Error::DimensionMismatch(
                "a series needs at least 2 networks (one conditioning, one modeled)".into(),
            ));
        }
        let n = networks[0].actor_count();
        if networks.iter().any(|y| y.actor_count() != n) {
            return Err(Error::DimensionMismatch(
                "all networks in a series must share the actor count".into(),
            ));
        }
        covariates.validate(n, networks.len() - 1)?;
        Ok(NetworkSeries { networks, covariates, cross_sectional: false })
    }

    /// Wraps a single observed network as a one-period series conditioned on
    /// an all-zero placeholder. Lag-dependent terms are rejected on such a
    /// series because the placeholder is not a real observation.
    pub fn cross_sectional(network: SignedNetwork, covariates: CovariateSet) -> Result<Self> {
        let zero = SignedNetwork::empty(network.actor_count())?;
        let mut series = NetworkSeries::new(vec![zero, network], covariates)?;
        series.cross_sectional = true;
        Ok(series)
    }

    pub fn actor_count(&self) -> usize {
        self.networks[0].actor_count()
    }

    /// Number of modeled periods `T`.
    pub fn period_count(&self) -> usize {
        self.networks.len() - 1
    }

    /// Network observed at time `t` (0-based; `t = 0` is the conditioning
    /// network).
    pub fn network(&self, t: usize) -> &SignedNetwork {
        &self.networks[t]
    }

    /// Lag of modeled period `t` (1-based), i.e. `y_{t-1}`.
    pub fn lag(&self, t: usize) -> &SignedNetwork {
        &self.networks[t - 1]
    }

    pub fn covariates(&self) -> &CovariateSet {
        &self.covariates
    }

    /// Dyadic covariates for modeled period `t` (1-based).
    pub fn covariates_for(&self, t: usize) -> DyadicCovariates<'_> {
        self.covariates.for_period(t)
    }

    pub fn is_cross_sectional(&self) -> bool {
        self.cross_sectional
    }
}
