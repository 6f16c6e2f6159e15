//! State spaces, trajectories and maximum-likelihood Markov-chain estimation.
//!
//! A [`TreatmentDataset`] groups independent sessions of one experimental
//! condition. [`estimate_markov`] pools occupancy over every session but only
//! counts transitions inside a session, so no pair ever straddles a session
//! boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// The finite set of states together with a Euclidean embedding of each state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceDescriptor", into = "StateSpaceDescriptor")]
pub struct StateSpace {
    labels: Vec<String>,
    coordinates: Vec<Vec<f64>>,
}

/// On-disk form of a [`StateSpace`]; the size is implied by the label count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    pub labels: Vec<String>,
    pub coordinates: Vec<Vec<f64>>,
}

impl TryFrom<StateSpaceDescriptor> for StateSpace {
    type Error = Error;

    fn try_from(d: StateSpaceDescriptor) -> Result<Self> {
        if let Some(size) = d.size {
            if size != d.labels.len() {
                return Err(Error::InvalidStateSpace(format!(
                    "size {size} does not match {} labels",
                    d.labels.len()
                )));
            }
        }
        StateSpace::new(d.labels, d.coordinates)
    }
}

impl From<StateSpace> for StateSpaceDescriptor {
    fn from(s: StateSpace) -> Self {
        StateSpaceDescriptor {
            size: Some(s.size()),
            labels: s.labels,
            coordinates: s.coordinates,
        }
    }
}

impl StateSpace {
    pub fn new(labels: Vec<String>, coordinates: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidStateSpace(format!(
                "need at least 2 states, got {}",
                labels.len()
            )));
        }
        if labels.len() != coordinates.len() {
            return Err(Error::InvalidStateSpace(format!(
                "{} labels but {} coordinate vectors",
                labels.len(),
                coordinates.len()
            )));
        }
        let dim = coordinates[0].len();
        if dim == 0 {
            return Err(Error::InvalidStateSpace("coordinate dimension must be >= 1".into()));
        }
        if let Some(bad) = coordinates.iter().position(|c| c.len() != dim) {
            return Err(Error::InvalidStateSpace(format!(
                "state {bad} has dimension {} but state 0 has {dim}",
                coordinates[bad].len()
            )));
        }
        if coordinates.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidStateSpace("coordinates must be finite".into()));
        }
        Ok(StateSpace { labels, coordinates })
    }

    /// Joint strategy space of a two-population 2×2 game.
    ///
    /// State `2·row + col` sits at `(row, col)`, giving the index order
    /// (0,0), (0,1), (1,0), (1,1).
    pub fn square_2x2() -> Self {
        let coordinates = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = coordinates.iter().map(|c| format!("({},{})", c[0], c[1])).collect();
        StateSpace { labels, coordinates }
    }

    /// `r` states evenly spaced on the unit circle.
    pub fn ring(r: usize) -> Result<Self> {
        let coordinates = (0..r)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / r as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect();
        StateSpace::new((0..r).map(|k| k.to_string()).collect(), coordinates)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.coordinates[0].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coordinates(&self) -> &[Vec<f64>] {
        &self.coordinates
    }

    pub fn is_square_2x2(&self) -> bool {
        self.coordinates == StateSpace::square_2x2().coordinates
    }

    /// Same states with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let coordinates = self
            .coordinates
            .iter()
            .map(|c| c.iter().map(|x| x * factor).collect())
            .collect();
        StateSpace::new(self.labels.clone(), coordinates)
    }
}

/// One session's ordered record of visited state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub session_id: String,
    pub states: Vec<usize>,
}

impl Trajectory {
    pub fn new(session_id: impl Into<String>, states: Vec<usize>) -> Self {
        Trajectory {
            session_id: session_id.into(),
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// All sessions recorded under one treatment, on a shared state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDataset {
    treatment_id: String,
    space: StateSpace,
    sessions: Vec<Trajectory>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl TreatmentDataset {
    pub fn new(treatment_id: impl Into<String>, space: StateSpace, sessions: Vec<Trajectory>) -> Result<Self> {
        let r = space.size();
        for s in &sessions {
            if let Some(&state) = s.states.iter().find(|&&x| x >= r) {
                return Err(Error::StateOutOfRange {
                    state,
                    size: r,
                    line: None,
                });
            }
        }
        Ok(TreatmentDataset {
            treatment_id: treatment_id.into(),
            space,
            sessions,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, String>) -> Self {
        self.meta = meta;
        self
    }

    pub fn treatment_id(&self) -> &str {
        &self.treatment_id
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn sessions(&self) -> &[Trajectory] {
        &self.sessions
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    pub fn n_records(&self) -> usize {
        self.sessions.iter().map(Trajectory::len).sum()
    }
}

/// Empirical density of states and transition matrix of a first-order chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovEstimate {
    space: StateSpace,
    dos: Vec<f64>,
    transition: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
    occupancy: Vec<u64>,
    n_observations: u64,
    /// `true` for rows with no outgoing transitions; those rows are all zero.
    unleft_rows: Vec<bool>,
}

impl MarkovEstimate {
    /// Wraps a known (dos, transition) pair, e.g. an analytic test chain.
    ///
    /// Rows must sum to 1 or be entirely zero. Count fields are left at zero.
    pub fn from_exact(space: StateSpace, dos: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let r = space.size();
        check_distribution(&dos, r, 1e-9, "dos")?;
        if transition.len() != r {
            return Err(Error::InvalidDistribution(format!(
                "transition has {} rows, expected {r}",
                transition.len()
            )));
        }
        let mut unleft_rows = vec![false; r];
        for (i, row) in transition.iter().enumerate() {
            if row.len() == r && row.iter().all(|&w| w == 0.0) {
                unleft_rows[i] = true;
                continue;
            }
            check_distribution(row, r, 1e-9, &format!("transition row {i}"))?;
        }
        Ok(MarkovEstimate {
            space,
            dos,
            transition,
            counts: vec![vec![0; r]; r],
            occupancy: vec![0; r],
            n_observations: 0,
            unleft_rows,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Density of states `P_i`.
    pub fn dos(&self) -> &[f64] {
        &self.dos
    }

    /// Row-stochastic transition probabilities `ω_ij`.
    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn occupancy(&self) -> &[u64] {
        &self.occupancy
    }

    pub fn n_observations(&self) -> u64 {
        self.n_observations
    }

    pub fn unleft_rows(&self) -> &[bool] {
        &self.unleft_rows
    }

    /// Probability flux `P_i ω_ij`.
    pub fn flux(&self, i: usize, j: usize) -> f64 {
        self.dos[i] * self.transition[i][j]
    }

    /// Same chain with states relabeled: new state `perm[i]` is old state `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let r = self.space.size();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a permutation of the state indices".into()));
        }
        let mut inverse = vec![0; r];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let pick = |v: &[f64]| inverse.iter().map(|&o| v[o]).collect::<Vec<_>>();
        let pick_u = |v: &[u64]| inverse.iter().map(|&o| v[o]).collect::<Vec<_>>();
        let space = StateSpace::new(
            inverse.iter().map(|&o| self.space.labels[o].clone()).collect(),
            inverse.iter().map(|&o| self.space.coordinates[o].clone()).collect(),
        )?;
        Ok(MarkovEstimate {
            space,
            dos: pick(&self.dos),
            transition: inverse.iter().map(|&o| pick(&self.transition[o])).collect(),
            counts: inverse.iter().map(|&o| pick_u(&self.counts[o])).collect(),
            occupancy: pick_u(&self.occupancy),
            n_observations: self.n_observations,
            unleft_rows: inverse.iter().map(|&o| self.unleft_rows[o]).collect(),
        })
    }

    /// Same chain embedded in a different space of equal size.
    pub fn with_space(&self, space: StateSpace) -> Result<Self> {
        if space.size() != self.space.size() {
            return Err(Error::InvalidStateSpace(format!(
                "cannot move a {}-state chain onto {} states",
                self.space.size(),
                space.size()
            )));
        }
        Ok(MarkovEstimate { space, ..self.clone() })
    }
}

fn check_distribution(p: &[f64], r: usize, tol: f64, what: &str) -> Result<()> {
    if p.len() != r {
        return Err(Error::InvalidDistribution(format!(
            "{what} has length {}, expected {r}",
            p.len()
        )));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("{what} sums to {sum}")));
    }
    Ok(())
}

pub(crate) fn validate_distribution(p: &[f64], r: usize, what: &str) -> Result<()> {
    check_distribution(p, r, 1e-9, what)
}

/// Estimates P_i and ω_ij from the sessions of `data`, dropping the first
/// `burn_in` rounds of every session.
pub fn estimate_markov(data: &TreatmentDataset, burn_in: usize) -> Result<MarkovEstimate> {
    estimate_from_sequences(&data.space, data.sessions.iter().map(|s| s.states.as_slice()), burn_in)
}

/// Same estimator over bare state sequences, each one a separate session.
pub fn estimate_from_sequences<'a>(
    space: &StateSpace,
    sessions: impl IntoIterator<Item = &'a [usize]>,
    burn_in: usize,
) -> Result<MarkovEstimate> {
    let r = space.size();
    let mut counts = vec![vec![0u64; r]; r];
    let mut occupancy = vec![0u64; r];
    let mut n_pairs = 0u64;
    for states in sessions {
        let retained = states.get(burn_in..).unwrap_or(&[]);
        for &s in retained {
            if s >= r {
                return Err(Error::StateOutOfRange {
                    state: s,
                    size: r,
                    line: None,
                });
            }
            occupancy[s] += 1;
        }
        for w in retained.windows(2) {
            counts[w[0]][w[1]] += 1;
            n_pairs += 1;
        }
    }
    let n_observations: u64 = occupancy.iter().sum();
    if n_observations == 0 {
        return Err(Error::EmptyData);
    }
    if n_pairs == 0 {
        return Err(Error::AllSessionsTooShort);
    }
    let dos = occupancy.iter().map(|&c| c as f64 / n_observations as f64).collect();
    let mut unleft_rows = vec![false; r];
    let transition = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                unleft_rows[i] = true;
                vec![0.0; r]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    let est = MarkovEstimate {
        space: space.clone(),
        dos,
        transition,
        counts,
        occupancy,
        n_observations,
        unleft_rows,
    };
    debug_assert!((est.dos.iter().sum::<f64>() - 1.0).abs() < SUM_TOLERANCE);
    Ok(est)
}

/// Occupancy of the first and second half of every session, pooled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityDiagnostic {
    pub first_half_dos: Vec<f64>,
    pub second_half_dos: Vec<f64>,
    /// L∞ distance between the two half-sample densities.
    pub max_abs_diff: f64,
}

/// Compares first-half and second-half occupancy. Advisory only.
pub fn stationarity_diagnostic(data: &TreatmentDataset, burn_in: usize) -> Result<StationarityDiagnostic> {
    estimate_markov(data, burn_in)?;
    let r = data.space.size();
    let mut first = vec![0u64; r];
    let mut second = vec![0u64; r];
    for s in &data.sessions {
        let retained = s.states.get(burn_in..).unwrap_or(&[]);
        let (a, b) = retained.split_at(retained.len() / 2);
        a.iter().for_each(|&x| first[x] += 1);
        b.iter().for_each(|&x| second[x] += 1);
    }
    let normalize = |c: &[u64]| {
        let n: u64 = c.iter().sum();
        c.iter()
            .map(|&x| if n == 0 { 0.0 } else { x as f64 / n as f64 })
            .collect::<Vec<_>>()
    };
    let first_half_dos = normalize(&first);
    let second_half_dos = normalize(&second);
    let max_abs_diff = first_half_dos
        .iter()
        .zip(&second_half_dos)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(StationarityDiagnostic {
        first_half_dos,
        second_half_dos,
        max_abs_diff,
    })
}
