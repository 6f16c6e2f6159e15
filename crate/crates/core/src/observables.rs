//! Entropy, entropy production rate, velocity field and motion of a chain.
//!
//! All logarithms are taken in base `r`, the number of states, so entropy is
//! normalized to `[0, 1]`. Rates are per observation step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::MarkovEstimate;

/// Largest smoothing constant accepted by [`ZeroFluxPolicy::smooth`].
pub const MAX_SMOOTHING: f64 = 1e-3;

/// How the EPR sum treats a state pair where exactly one directed flux is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZeroFluxPolicy {
    /// The pair contributes nothing and is counted in `skipped_pairs`.
    #[default]
    Skip,
    /// Every flux `f` becomes `f + eps` before the logarithm is taken.
    Smooth { eps: f64 },
    /// One-sided zero fluxes are an error.
    Strict,
}

impl ZeroFluxPolicy {
    pub fn smooth(eps: f64) -> Result<Self> {
        let p = ZeroFluxPolicy::Smooth { eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ZeroFluxPolicy::Smooth { eps } if !(eps > 0.0 && eps <= MAX_SMOOTHING) => Err(Error::InvalidParameter(
                format!("smoothing constant must lie in (0, {MAX_SMOOTHING}], got {eps}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ZeroFluxPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroFluxPolicy::Skip => f.write_str("skip"),
            ZeroFluxPolicy::Smooth { eps } => write!(f, "smooth={eps:e}"),
            ZeroFluxPolicy::Strict => f.write_str("strict"),
        }
    }
}

impl FromStr for ZeroFluxPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(ZeroFluxPolicy::Skip),
            "strict" => Ok(ZeroFluxPolicy::Strict),
            _ => {
                let eps = s
                    .strip_prefix("smooth=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "zero-flux policy must be skip, strict or smooth=EPS, got {s:?}"
                        ))
                    })?;
                ZeroFluxPolicy::smooth(eps)
            }
        }
    }
}

impl Serialize for ZeroFluxPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ZeroFluxPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Entropy production rate together with the number of dropped pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Epr {
    pub value: f64,
    pub skipped_pairs: usize,
}

/// All four observables of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableReport {
    pub entropy: f64,
    pub epr: f64,
    /// One `d`-vector per state.
    pub velocity: Vec<Vec<f64>>,
    pub motion: f64,
    pub skipped_pairs: usize,
    pub policy_used: ZeroFluxPolicy,
}

fn log_base(chain: &MarkovEstimate) -> f64 {
    (chain.space().size() as f64).ln()
}

/// Normalized Shannon entropy of the density of states, with `0·log 0 = 0`.
pub fn entropy(chain: &MarkovEstimate) -> f64 {
    let ln_r = log_base(chain);
    let s: f64 = chain.dos().iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    (s / ln_r).clamp(0.0, 1.0)
}

/// Mean entropy production rate.
///
/// Evaluated over unordered pairs `i < j`: the ordered terms `(i, j)` and
/// `(j, i)` are equal, which cancels the ½ prefactor.
pub fn epr(chain: &MarkovEstimate, policy: ZeroFluxPolicy) -> Result<Epr> {
    policy.validate()?;
    let r = chain.space().size();
    let ln_r = log_base(chain);
    let mut total = 0.0;
    let mut skipped_pairs = 0;
    for i in 0..r {
        for j in (i + 1)..r {
            let a = chain.flux(i, j);
            let b = chain.flux(j, i);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let term = match policy {
                ZeroFluxPolicy::Smooth { eps } => (a - b) * ((a + eps) / (b + eps)).ln(),
                _ if a == 0.0 || b == 0.0 => {
                    if policy == ZeroFluxPolicy::Strict {
                        return Err(Error::OneSidedZeroFlux {
                            i,
                            j,
                            flux_ij: a,
                            flux_ji: b,
                        });
                    }
                    skipped_pairs += 1;
                    continue;
                }
                _ => (a - b) * (a / b).ln(),
            };
            total += term;
        }
    }
    Ok(Epr {
        value: total / ln_r,
        skipped_pairs,
    })
}

/// Net probability flow through each state along each coordinate axis.
pub fn velocity(chain: &MarkovEstimate) -> Vec<Vec<f64>> {
    let space = chain.space();
    let coords = space.coordinates();
    let r = space.size();
    (0..r)
        .map(|i| {
            let mut v = vec![0.0; space.dim()];
            for j in 0..r {
                if j == i {
                    continue;
                }
                let net_in = chain.flux(j, i) - chain.flux(i, j);
                if net_in == 0.0 {
                    continue;
                }
                for (a, slot) in v.iter_mut().enumerate() {
                    *slot += net_in * (coords[i][a] - coords[j][a]);
                }
            }
            v
        })
        .collect()
}

fn motion_from(chain: &MarkovEstimate, velocity: &[Vec<f64>]) -> f64 {
    0.5 * chain
        .dos()
        .iter()
        .zip(velocity)
        .map(|(p, v)| p * v.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
}

/// Half the density-weighted squared speed.
pub fn motion(chain: &MarkovEstimate) -> f64 {
    motion_from(chain, &velocity(chain))
}

pub fn full_report(chain: &MarkovEstimate, policy: ZeroFluxPolicy) -> Result<ObservableReport> {
    let e = epr(chain, policy)?;
    let velocity = velocity(chain);
    let motion = motion_from(chain, &velocity);
    Ok(ObservableReport {
        entropy: entropy(chain),
        epr: e.value,
        velocity,
        motion,
        skipped_pairs: e.skipped_pairs,
        policy_used: policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chain(space: StateSpace, dos: Vec<f64>, t: Vec<Vec<f64>>) -> MarkovEstimate {
        MarkovEstimate::from_exact(space, dos, t).unwrap()
    }

    fn square(dos: Vec<f64>, t: Vec<Vec<f64>>) -> MarkovEstimate {
        chain(StateSpace::square_2x2(), dos, t)
    }

    fn ring3(a: f64, b: f64) -> MarkovEstimate {
        let stay = 1.0 - a - b;
        let t = (0..3)
            .map(|i| {
                let mut row = vec![0.0; 3];
                row[i] = stay;
                row[(i + 1) % 3] += a;
                row[(i + 2) % 3] += b;
                row
            })
            .collect();
        chain(StateSpace::ring(3).unwrap(), vec![1.0 / 3.0; 3], t)
    }

    /// 0 -> 2 -> 3 -> 1 -> 0, deterministic.
    fn square_cycle() -> MarkovEstimate {
        let mut t = vec![vec![0.0; 4]; 4];
        t[0][2] = 1.0;
        t[2][3] = 1.0;
        t[3][1] = 1.0;
        t[1][0] = 1.0;
        square(vec![0.25; 4], t)
    }

    /// Independent evaluation over all ordered pairs, with the ½ prefactor.
    fn brute_force_epr(c: &MarkovEstimate) -> f64 {
        let r = c.space().size();
        let mut s = 0.0;
        for i in 0..r {
            for j in 0..r {
                let a = c.dos()[i] * c.transition()[i][j];
                let b = c.dos()[j] * c.transition()[j][i];
                if a > 0.0 && b > 0.0 {
                    s += (a - b) * (a / b).log(r as f64);
                }
            }
        }
        0.5 * s
    }

    #[test]
    fn entropy_examples() {
        let t = vec![vec![0.25; 4]; 4];
        assert_abs_diff_eq!(entropy(&square(vec![0.25; 4], t.clone())), 1.0, epsilon = 1e-15);
        assert_eq!(entropy(&square(vec![1.0, 0.0, 0.0, 0.0], t.clone())), 0.0);
        assert_abs_diff_eq!(entropy(&square(vec![0.5, 0.5, 0.0, 0.0], t)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn entropy_ignores_transition() {
        let a = square(vec![0.1, 0.2, 0.3, 0.4], vec![vec![0.25; 4]; 4]);
        let b = square(vec![0.1, 0.2, 0.3, 0.4], square_cycle().transition().to_vec());
        assert_eq!(entropy(&a), entropy(&b));
    }

    #[test]
    fn symmetric_uniform_chain_has_zero_epr() {
        let t = vec![vec![0.2, 0.5, 0.3], vec![0.5, 0.1, 0.4], vec![0.3, 0.4, 0.3]];
        let c = chain(StateSpace::ring(3).unwrap(), vec![1.0 / 3.0; 3], t);
        let e = epr(&c, ZeroFluxPolicy::Strict).unwrap();
        assert_abs_diff_eq!(e.value, 0.0, epsilon = 1e-15);
        assert!(velocity(&c).iter().flatten().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ring_closed_form() {
        let c = ring3(0.5, 0.25);
        let expected = 0.25 * 2f64.log(3.0);
        assert_abs_diff_eq!(expected, 0.157732, epsilon = 1e-6);
        let e = epr(&c, ZeroFluxPolicy::Strict).unwrap();
        assert_abs_diff_eq!(e.value, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(brute_force_epr(&c), expected, epsilon = 1e-12);
        assert_eq!(e.skipped_pairs, 0);
    }

    #[test]
    fn deterministic_cycle_policies() {
        let c = square_cycle();
        let e = epr(&c, ZeroFluxPolicy::Skip).unwrap();
        assert_eq!(
            e,
            Epr {
                value: 0.0,
                skipped_pairs: 4
            }
        );
        let err = epr(&c, ZeroFluxPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::OneSidedZeroFlux { .. }));
        let smooth = epr(&c, ZeroFluxPolicy::smooth(1e-6).unwrap()).unwrap();
        assert!(smooth.value > 0.0);
        assert_eq!(smooth.skipped_pairs, 0);
    }

    #[test]
    fn square_cycle_velocity_and_motion() {
        let c = square_cycle();
        let v = velocity(&c);
        assert_eq!(v[0], vec![0.25, -0.25]);
        for vi in &v {
            assert_abs_diff_eq!(vi.iter().map(|x| x * x).sum::<f64>(), 0.125, epsilon = 1e-15);
        }
        assert_eq!(motion(&c), 0.0625);
    }

    #[test]
    fn absorbing_state_has_no_velocity() {
        let mut t = vec![vec![0.0; 4]; 4];
        t[1][1] = 1.0;
        let c = square(vec![0.0, 1.0, 0.0, 0.0], t);
        assert!(velocity(&c).iter().flatten().all(|&v| v == 0.0));
        assert_eq!(motion(&c), 0.0);
    }

    #[test]
    fn doubling_coordinates_quadruples_motion() {
        let c = square_cycle();
        let doubled = c.with_space(c.space().scaled(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(motion(&doubled), 4.0 * motion(&c), epsilon = 1e-15);
    }

    #[test]
    fn full_report_bundles() {
        let iid = square(vec![0.25; 4], vec![vec![0.25; 4]; 4]);
        let rep = full_report(&iid, ZeroFluxPolicy::Skip).unwrap();
        assert_abs_diff_eq!(rep.entropy, 1.0, epsilon = 1e-15);
        assert_eq!(rep.epr, 0.0);
        assert_eq!(rep.motion, 0.0);

        let rep = full_report(&ring3(0.5, 0.25), ZeroFluxPolicy::Skip).unwrap();
        assert_abs_diff_eq!(rep.epr, 0.157732, epsilon = 1e-6);

        let rep = full_report(&square_cycle(), ZeroFluxPolicy::Skip).unwrap();
        assert_eq!(rep.policy_used, ZeroFluxPolicy::Skip);
        assert_eq!(rep.skipped_pairs, 4);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("skip".parse::<ZeroFluxPolicy>().unwrap(), ZeroFluxPolicy::Skip);
        assert_eq!("strict".parse::<ZeroFluxPolicy>().unwrap(), ZeroFluxPolicy::Strict);
        assert_eq!(
            "smooth=1e-6".parse::<ZeroFluxPolicy>().unwrap(),
            ZeroFluxPolicy::Smooth { eps: 1e-6 }
        );
        assert!("smooth=0".parse::<ZeroFluxPolicy>().is_err());
        assert!("smooth=0.5".parse::<ZeroFluxPolicy>().is_err());
        assert!("lenient".parse::<ZeroFluxPolicy>().is_err());
        let p = ZeroFluxPolicy::Smooth { eps: 1e-5 };
        assert_eq!(p.to_string().parse::<ZeroFluxPolicy>().unwrap(), p);
    }

    #[test]
    fn smoothing_converges_monotonically() {
        let c = ring3(0.5, 0.25);
        let exact = epr(&c, ZeroFluxPolicy::Strict).unwrap().value;
        let mut last = f64::INFINITY;
        for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-8] {
            let v = epr(&c, ZeroFluxPolicy::Smooth { eps }).unwrap().value;
            let gap = (v - exact).abs();
            assert!(gap <= last);
            last = gap;
        }
        assert!(last < 1e-7);
    }

    fn random_chain(r: usize) -> impl Strategy<Value = MarkovEstimate> {
        (
            prop::collection::vec(0.0f64..1.0, r),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, r), r),
        )
            .prop_filter_map("degenerate weights", move |(d, t)| {
                let ds: f64 = d.iter().sum();
                if ds <= 0.0 || t.iter().any(|row| row.iter().sum::<f64>() <= 0.0) {
                    return None;
                }
                let dos = d.iter().map(|x| x / ds).collect();
                let t = t
                    .iter()
                    .map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(|x| x / s).collect()
                    })
                    .collect();
                let space = StateSpace::new(
                    (0..r).map(|k| k.to_string()).collect(),
                    (0..r).map(|k| vec![k as f64, (k * k) as f64]).collect(),
                )
                .ok()?;
                MarkovEstimate::from_exact(space, dos, t).ok()
            })
    }

    proptest! {
        #[test]
        fn epr_is_nonnegative_and_matches_brute_force(c in random_chain(4)) {
            let e = epr(&c, ZeroFluxPolicy::Skip).unwrap().value;
            prop_assert!(e >= 0.0);
            prop_assert!((e - brute_force_epr(&c)).abs() < 1e-12);
            let s = epr(&c, ZeroFluxPolicy::Smooth { eps: 1e-4 }).unwrap().value;
            prop_assert!(s >= 0.0);
            prop_assert!(motion(&c) >= 0.0);
            let h = entropy(&c);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn relabeling_preserves_observables(c in random_chain(4), seed in 0usize..24) {
            let mut perm: Vec<usize> = (0..4).collect();
            let mut k = seed;
            for i in (1..4).rev() {
                perm.swap(i, k % (i + 1));
                k /= i + 1;
            }
            let p = c.permuted(&perm).unwrap();
            prop_assert!((entropy(&p) - entropy(&c)).abs() < 1e-12);
            let (e1, e2) = (epr(&p, ZeroFluxPolicy::Skip).unwrap(), epr(&c, ZeroFluxPolicy::Skip).unwrap());
            prop_assert!((e1.value - e2.value).abs() < 1e-12);
            prop_assert!((motion(&p) - motion(&c)).abs() < 1e-12);
            let (vp, vc) = (velocity(&p), velocity(&c));
            for (old, &new) in perm.iter().enumerate() {
                for a in 0..2 {
                    prop_assert!((vp[new][a] - vc[old][a]).abs() < 1e-12);
                }
            }
        }
    }
}
