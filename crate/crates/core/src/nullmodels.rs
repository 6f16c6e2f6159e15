//! Monte-Carlo generators: a general chain simulator, the independent
//! mixed-strategy (minimax) null, and the i.i.d. occupancy baseline.
//!
//! Replicates run on the rayon pool. Each replicate seeds its own generator
//! from [`Seed::derive`], and results are collected in replicate order, so
//! serial and parallel runs return identical sample vectors.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{estimate_from_sequences, validate_distribution, StateSpace, Trajectory, TreatmentDataset};
use crate::observables::{entropy, epr, ZeroFluxPolicy};
use crate::seed::Seed;

/// Inverse-CDF sampler over a small categorical distribution.
#[derive(Debug, Clone)]
pub(crate) struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    pub(crate) fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = p
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        let last_positive = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        Categorical {
            cumulative,
            last_positive,
        }
    }

    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.last_positive)
    }
}

/// Draws `s_0 ~ dos0`, then `s_{t+1} ~ transition[s_t]`, for `n` steps.
pub fn simulate_chain(dos0: &[f64], transition: &[Vec<f64>], n: usize, seed: Seed) -> Result<Trajectory> {
    let r = dos0.len();
    validate_distribution(dos0, r, "initial distribution")?;
    if transition.len() != r {
        return Err(Error::InvalidDistribution(format!(
            "transition has {} rows, expected {r}",
            transition.len()
        )));
    }
    for (i, row) in transition.iter().enumerate() {
        validate_distribution(row, r, &format!("transition row {i}"))?;
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {n}")));
    }
    let rows: Vec<Categorical> = transition.iter().map(|row| Categorical::new(row)).collect();
    let mut rng = seed.rng();
    let mut states = Vec::with_capacity(n);
    let mut s = Categorical::new(dos0).sample(&mut rng);
    states.push(s);
    for _ in 1..n {
        s = rows[s].sample(&mut rng);
        states.push(s);
    }
    Ok(Trajectory::new("sim", states))
}

/// Mixed-strategy probabilities and the session layout to reproduce.
///
/// `p` is the probability that the row player picks action 1, `q` the same
/// for the column player. The joint state is `2·row + col`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VnmParams {
    pub p: f64,
    pub q: f64,
    /// Rounds in each session.
    pub session_lengths: Vec<usize>,
}

impl VnmParams {
    pub fn new(p: f64, q: f64, sessions: usize, rounds_per_session: usize) -> Result<Self> {
        Self::with_session_lengths(p, q, vec![rounds_per_session; sessions])
    }

    pub fn with_session_lengths(p: f64, q: f64, session_lengths: Vec<usize>) -> Result<Self> {
        let params = VnmParams { p, q, session_lengths };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.session_lengths.is_empty() {
            return Err(Error::InvalidParameter("need at least one session".into()));
        }
        if let Some(&n) = self.session_lengths.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!(
                "every session needs at least 2 rounds, got {n}"
            )));
        }
        Ok(())
    }

    pub fn sessions(&self) -> usize {
        self.session_lengths.len()
    }
}

fn vnm_sessions(params: &VnmParams, seed: Seed) -> Vec<Vec<usize>> {
    let mut rng = seed.rng();
    params
        .session_lengths
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| {
                    let row = rng.random::<f64>() < params.p;
                    let col = rng.random::<f64>() < params.q;
                    2 * row as usize + col as usize
                })
                .collect()
        })
        .collect()
}

fn require_square(space: &StateSpace) -> Result<()> {
    if !space.is_square_2x2() {
        return Err(Error::InvalidStateSpace(
            "the minimax null needs the canonical 4-state 2x2 space".into(),
        ));
    }
    Ok(())
}

/// One synthetic treatment in which both players randomize independently
/// every round with fixed probabilities.
pub fn simulate_vnm(params: &VnmParams, space: &StateSpace, seed: Seed) -> Result<TreatmentDataset> {
    params.validate()?;
    require_square(space)?;
    let sessions = vnm_sessions(params, seed)
        .into_iter()
        .enumerate()
        .map(|(k, s)| Trajectory::new(format!("s{}", k + 1), s))
        .collect();
    TreatmentDataset::new("vnm", space.clone(), sessions)
}

/// What a baseline held fixed while resampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSummary {
    /// Independent row/column randomization with the given marginals.
    Vnm {
        p: f64,
        q: f64,
        session_lengths: Vec<usize>,
    },
    /// I.i.d. draws from a fixed density of states.
    Dos {
        dos: Vec<f64>,
        n_rounds: usize,
        session_lengths: Vec<usize>,
    },
}

/// Monte-Carlo samples of one observable under a null model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineDistribution {
    pub observable_name: String,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub policy: ZeroFluxPolicy,
    pub constraint_summary: ConstraintSummary,
}

/// Location and spread of a [`BaselineDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub observable_name: String,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
    pub seed: u64,
    pub policy: ZeroFluxPolicy,
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub q99: f64,
    pub max: f64,
    pub constraint_summary: ConstraintSummary,
}

impl BaselineDistribution {
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator).
    pub fn std(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, prob: f64) -> f64 {
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        quantile_sorted(&sorted, prob)
    }

    pub fn summary(&self) -> BaselineSummary {
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        BaselineSummary {
            observable_name: self.observable_name.clone(),
            mean: self.mean(),
            std: self.std(),
            reps: self.samples.len(),
            seed: self.seed,
            policy: self.policy,
            min: sorted[0],
            q05: quantile_sorted(&sorted, 0.05),
            median: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
            q99: quantile_sorted(&sorted, 0.99),
            max: sorted[sorted.len() - 1],
            constraint_summary: self.constraint_summary.clone(),
        }
    }
}

fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = prob.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 replicates, got {reps}"
        )));
    }
    Ok(())
}

/// Entropy and EPR distributions of repeated minimax-null treatments.
pub fn vnm_null_distribution(
    params: &VnmParams,
    reps: usize,
    policy: ZeroFluxPolicy,
    seed: Seed,
) -> Result<(BaselineDistribution, BaselineDistribution)> {
    params.validate()?;
    policy.validate()?;
    check_reps(reps)?;
    let space = StateSpace::square_2x2();
    let pairs = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let sessions = vnm_sessions(params, seed.derive(k));
            let chain = estimate_from_sequences(&space, sessions.iter().map(Vec::as_slice), 0)?;
            Ok((entropy(&chain), epr(&chain, policy)?.value))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (ent, eprs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let constraint = ConstraintSummary::Vnm {
        p: params.p,
        q: params.q,
        session_lengths: params.session_lengths.clone(),
    };
    let make = |name: &str, samples| BaselineDistribution {
        observable_name: name.to_owned(),
        samples,
        seed: seed.root,
        policy,
        constraint_summary: constraint.clone(),
    };
    Ok((make("entropy", ent), make("epr", eprs)))
}

/// Finite-sample EPR baseline: i.i.d. sequences of `n_rounds` draws from
/// `dos`, each estimated as a chain and scored.
pub fn dos_baseline(
    space: &StateSpace,
    dos: &[f64],
    n_rounds: usize,
    reps: usize,
    policy: ZeroFluxPolicy,
    seed: Seed,
) -> Result<BaselineDistribution> {
    dos_baseline_sessions(space, dos, &[n_rounds], reps, policy, seed)
}

/// As [`dos_baseline`], but each replicate reproduces a session layout:
/// one independent i.i.d. sequence per entry of `session_lengths`.
pub fn dos_baseline_sessions(
    space: &StateSpace,
    dos: &[f64],
    session_lengths: &[usize],
    reps: usize,
    policy: ZeroFluxPolicy,
    seed: Seed,
) -> Result<BaselineDistribution> {
    validate_distribution(dos, space.size(), "dos")?;
    policy.validate()?;
    check_reps(reps)?;
    if !session_lengths.iter().any(|&n| n >= 2) {
        return Err(Error::InvalidParameter("need a session of at least 2 rounds".into()));
    }
    let sampler = Categorical::new(dos);
    let samples = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.derive(k).rng();
            let seqs: Vec<Vec<usize>> = session_lengths
                .iter()
                .map(|&n| (0..n).map(|_| sampler.sample(&mut rng)).collect())
                .collect();
            let chain = estimate_from_sequences(space, seqs.iter().map(Vec::as_slice), 0)?;
            Ok(epr(&chain, policy)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BaselineDistribution {
        observable_name: "epr".into(),
        samples,
        seed: seed.root,
        policy,
        constraint_summary: ConstraintSummary::Dos {
            dos: dos.to_vec(),
            n_rounds: session_lengths.iter().sum(),
            session_lengths: session_lengths.to_vec(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::estimate_markov;

    fn cycle_transition(r: usize) -> Vec<Vec<f64>> {
        (0..r)
            .map(|i| {
                let mut row = vec![0.0; r];
                row[(i + 1) % r] = 1.0;
                row
            })
            .collect()
    }

    #[test]
    fn deterministic_cycle_is_exact() {
        let t = simulate_chain(&[0.0, 1.0, 0.0, 0.0], &cycle_transition(4), 8, Seed::new(9)).unwrap();
        assert_eq!(t.states, vec![1, 2, 3, 0, 1, 2, 3, 0]);
    }

    #[test]
    fn identity_transition_absorbs() {
        let id: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let t = simulate_chain(&[0.0, 0.0, 1.0, 0.0], &id, 5, Seed::new(1)).unwrap();
        assert_eq!(t.states, vec![2; 5]);
    }

    #[test]
    fn chain_input_validation() {
        let bad = vec![vec![0.5, 0.4], vec![0.5, 0.5]];
        assert!(matches!(
            simulate_chain(&[0.5, 0.5], &bad, 10, Seed::new(0)),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(simulate_chain(&[0.5, 0.5], &cycle_transition(2), 1, Seed::new(0)).is_err());
    }

    #[test]
    fn uniform_iid_occupancy() {
        let t = simulate_chain(&[0.25; 4], &vec![vec![0.25; 4]; 4], 1_000_000, Seed::new(5)).unwrap();
        let mut occ = [0usize; 4];
        t.states.iter().for_each(|&s| occ[s] += 1);
        for c in occ {
            assert!((c as f64 / 1e6 - 0.25).abs() < 0.002);
        }
    }

    #[test]
    fn degenerate_vnm() {
        let params = VnmParams::new(1.0, 1.0, 2, 50).unwrap();
        let d = simulate_vnm(&params, &StateSpace::square_2x2(), Seed::new(3)).unwrap();
        assert_eq!(d.sessions().len(), 2);
        assert!(d
            .sessions()
            .iter()
            .all(|s| s.states.len() == 50 && s.states.iter().all(|&x| x == 3)));
        let params = VnmParams::new(0.0, 1.0, 1, 10).unwrap();
        let d = simulate_vnm(&params, &StateSpace::square_2x2(), Seed::new(3)).unwrap();
        assert!(d.sessions()[0].states.iter().all(|&x| x == 1));
    }

    #[test]
    fn vnm_validation() {
        assert!(VnmParams::new(1.1, 0.5, 1, 10).is_err());
        assert!(VnmParams::new(0.5, 0.5, 0, 10).is_err());
        assert!(VnmParams::new(0.5, 0.5, 1, 1).is_err());
        let params = VnmParams::new(0.5, 0.5, 1, 10).unwrap();
        assert!(simulate_vnm(&params, &StateSpace::ring(4).unwrap(), Seed::new(0)).is_err());
    }

    #[test]
    fn fair_vnm_is_uniform_product_chain() {
        let params = VnmParams::new(0.5, 0.5, 1, 1_000_000).unwrap();
        let d = simulate_vnm(&params, &StateSpace::square_2x2(), Seed::new(17)).unwrap();
        let est = estimate_markov(&d, 0).unwrap();
        for row in est.transition() {
            for &w in row {
                assert!((w - 0.25).abs() < 0.005, "{w}");
            }
        }
    }

    #[test]
    fn vnm_marginals_match_parameters() {
        let (p, q) = (0.7, 0.35);
        let params = VnmParams::new(p, q, 4, 500).unwrap();
        let mut rows = 0usize;
        let mut cols = 0usize;
        let mut n = 0usize;
        for k in 0..50 {
            let d = simulate_vnm(&params, &StateSpace::square_2x2(), Seed::new(100).derive(k)).unwrap();
            for s in d.sessions().iter().flat_map(|s| &s.states) {
                rows += s / 2;
                cols += s % 2;
                n += 1;
            }
        }
        let sd_p = (p * (1.0 - p) / n as f64).sqrt();
        let sd_q = (q * (1.0 - q) / n as f64).sqrt();
        assert!((rows as f64 / n as f64 - p).abs() < 4.0 * sd_p);
        assert!((cols as f64 / n as f64 - q).abs() < 4.0 * sd_q);
    }

    #[test]
    fn vnm_null_is_deterministic_and_biased_upward() {
        let params = VnmParams::new(0.5, 0.5, 1, 300).unwrap();
        let (e1, p1) = vnm_null_distribution(&params, 200, ZeroFluxPolicy::Skip, Seed::new(4)).unwrap();
        let (e2, p2) = vnm_null_distribution(&params, 200, ZeroFluxPolicy::Skip, Seed::new(4)).unwrap();
        assert_eq!(e1.samples, e2.samples);
        assert_eq!(p1.samples, p2.samples);
        assert_eq!(p1.samples.len(), 200);
        assert!(p1.mean() > 0.0);
        assert!(vnm_null_distribution(&params, 1, ZeroFluxPolicy::Skip, Seed::new(4)).is_err());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    dos_baseline(
                        &StateSpace::square_2x2(),
                        &[0.4, 0.3, 0.2, 0.1],
                        100,
                        500,
                        ZeroFluxPolicy::Skip,
                        Seed::new(77),
                    )
                    .unwrap()
                    .samples
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn degenerate_dos_baseline_is_zero() {
        let b = dos_baseline(
            &StateSpace::square_2x2(),
            &[1.0, 0.0, 0.0, 0.0],
            50,
            20,
            ZeroFluxPolicy::Skip,
            Seed::new(2),
        )
        .unwrap();
        assert!(b.samples.iter().all(|&x| x == 0.0));
        assert_eq!(b.std(), 0.0);
    }

    #[test]
    fn summary_quantiles() {
        let b = BaselineDistribution {
            observable_name: "x".into(),
            samples: (0..=100).rev().map(f64::from).collect(),
            seed: 0,
            policy: ZeroFluxPolicy::Skip,
            constraint_summary: ConstraintSummary::Dos {
                dos: vec![1.0, 0.0],
                n_rounds: 2,
                session_lengths: vec![2],
            },
        };
        let s = b.summary();
        assert_eq!(s.min, 0.0);
        assert_eq!(s.max, 100.0);
        assert_eq!(s.median, 50.0);
        assert_eq!(s.q95, 95.0);
        assert_eq!(s.mean, 50.0);
    }
}
