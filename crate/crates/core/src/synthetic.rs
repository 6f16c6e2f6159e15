//! Known chains for fixtures and tests: rings, driven square cycles,
//! reversible chains built from symmetric fluxes, and i.i.d. chains.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MarkovEstimate, StateSpace, Trajectory, TreatmentDataset};
use crate::nullmodels::simulate_chain;
use crate::seed::Seed;

/// Successor of each state around the square cycle (0,0)→(1,0)→(1,1)→(0,1).
pub const SQUARE_CYCLE: [usize; 4] = [2, 0, 3, 1];

/// A chain given by its stationary density and transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactChain {
    pub space: StateSpace,
    pub dos: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl ExactChain {
    pub fn to_estimate(&self) -> Result<MarkovEstimate> {
        MarkovEstimate::from_exact(self.space.clone(), self.dos.clone(), self.transition.clone())
    }

    /// A single stationary trajectory of `n` steps.
    pub fn simulate(&self, n: usize, seed: Seed) -> Result<Trajectory> {
        simulate_chain(&self.dos, &self.transition, n, seed)
    }

    /// A treatment of `sessions` independent stationary sessions.
    pub fn dataset(&self, treatment_id: &str, sessions: usize, rounds: usize, seed: Seed) -> Result<TreatmentDataset> {
        let sessions = (0..sessions)
            .map(|k| {
                let mut t = self.simulate(rounds, seed.derive(k as u64))?;
                t.session_id = format!("s{}", k + 1);
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        TreatmentDataset::new(treatment_id, self.space.clone(), sessions)
    }
}

fn check_probabilities(values: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    Ok(())
}

/// Three states on a ring: step forward with `forward`, back with
/// `backward`, stay otherwise. Uniform stationary density.
pub fn ring3(forward: f64, backward: f64) -> Result<ExactChain> {
    let stay = 1.0 - forward - backward;
    check_probabilities(&[("forward", forward), ("backward", backward), ("stay", stay)])?;
    let transition = (0..3)
        .map(|i| {
            let mut row = vec![0.0; 3];
            row[i] = stay;
            row[(i + 1) % 3] += forward;
            row[(i + 2) % 3] += backward;
            row
        })
        .collect();
    Ok(ExactChain {
        space: StateSpace::ring(3)?,
        dos: vec![1.0 / 3.0; 3],
        transition,
    })
}

/// Square cycle on the 2×2 space; the diagonal opposite gets the remainder.
/// The matrix is doubly stochastic, so the stationary density is uniform.
pub fn square_cycle(forward: f64, backward: f64, stay: f64) -> Result<ExactChain> {
    let mut opposite = 1.0 - forward - backward - stay;
    check_probabilities(&[("forward", forward), ("backward", backward), ("stay", stay)])?;
    if opposite < -1e-12 {
        return Err(Error::InvalidParameter("forward + backward + stay exceeds 1".into()));
    }
    if opposite.abs() < 1e-12 {
        opposite = 0.0;
    }
    let mut predecessor = [0; 4];
    for (i, &j) in SQUARE_CYCLE.iter().enumerate() {
        predecessor[j] = i;
    }
    let transition = (0..4)
        .map(|i| {
            let mut row = vec![0.0; 4];
            row[i] = stay;
            row[SQUARE_CYCLE[i]] += forward;
            row[predecessor[i]] += backward;
            row[3 - i] += opposite;
            row
        })
        .collect();
    Ok(ExactChain {
        space: StateSpace::square_2x2(),
        dos: vec![0.25; 4],
        transition,
    })
}

/// One-parameter family: `drive = 0` is uniform i.i.d. play, `drive = 1`
/// never steps backward.
pub fn driven_square_cycle(drive: f64) -> Result<ExactChain> {
    check_probabilities(&[("drive", drive)])?;
    square_cycle((1.0 + drive) / 4.0, (1.0 - drive) / 4.0, 0.25)
}

/// Reversible chain from a symmetric nonnegative flux matrix `F`:
/// `P_i = Σ_j F_ij / Σ F`, `ω_ij = F_ij / Σ_k F_ik`.
pub fn reversible_from_flux(space: StateSpace, flux: &[Vec<f64>]) -> Result<ExactChain> {
    let r = space.size();
    if flux.len() != r || flux.iter().any(|row| row.len() != r) {
        return Err(Error::InvalidParameter(format!("flux matrix must be {r}x{r}")));
    }
    let asymmetric = flux
        .iter()
        .enumerate()
        .any(|(i, row)| row.iter().enumerate().any(|(j, &f)| f < 0.0 || f != flux[j][i]));
    if asymmetric {
        return Err(Error::InvalidParameter(
            "flux matrix must be symmetric and nonnegative".into(),
        ));
    }
    let row_sums: Vec<f64> = flux.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = row_sums.iter().sum();
    if row_sums.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidParameter("every state needs some flux".into()));
    }
    Ok(ExactChain {
        dos: row_sums.iter().map(|s| s / total).collect(),
        transition: flux
            .iter()
            .zip(&row_sums)
            .map(|(row, s)| row.iter().map(|f| f / s).collect())
            .collect(),
        space,
    })
}

/// Random reversible chain on `space` with strictly positive fluxes.
#[allow(clippy::needless_range_loop)]
pub fn random_reversible<R: Rng + ?Sized>(space: StateSpace, rng: &mut R) -> Result<ExactChain> {
    let r = space.size();
    let mut flux = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in i..r {
            let f = rng.random::<f64>() + 1e-3;
            flux[i][j] = f;
            flux[j][i] = f;
        }
    }
    reversible_from_flux(space, &flux)
}

/// Independent draws from `dos` every round.
pub fn iid(space: StateSpace, dos: Vec<f64>) -> Result<ExactChain> {
    let chain = ExactChain {
        transition: vec![dos.clone(); space.size()],
        dos,
        space,
    };
    chain.to_estimate()?;
    Ok(chain)
}
