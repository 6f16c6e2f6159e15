//! End-to-end analyses behind the CLI subcommands.
//!
//! Each treatment `k` draws its Monte-Carlo replicates from
//! `Seed::new(config.seed).derive(k)`, so adding or reordering replicates
//! inside one treatment never perturbs another.

use crate::dataio::{
    AnalysisConfig, ChainSummary, CycleVerdict, Marginals, NamedFit, NamedTest, NullComparison, Report, TreatmentReport,
};
use crate::error::{Error, Result};
use crate::model::{estimate_markov, stationarity_diagnostic, MarkovEstimate, TreatmentDataset};
use crate::nullmodels::{dos_baseline_sessions, vnm_null_distribution, BaselineDistribution, VnmParams};
use crate::observables::{full_report, ObservableReport};
use crate::seed::Seed;
use crate::stats::{monte_carlo_p_upper, ols_fit, one_sample_t, paired_t, percentile_of, welch_t, Direction};

/// Receives one human-readable line per unit of work.
pub type Progress<'a> = &'a dyn Fn(&str);

/// Discards progress messages.
pub fn quiet(_: &str) {}

fn check_observables(id: &str, o: &ObservableReport) -> Result<()> {
    let ok = (0.0..=1.0).contains(&o.entropy)
        && o.epr >= 0.0
        && o.motion >= 0.0
        && o.velocity.iter().flatten().all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::Internal(format!(
            "treatment {id}: observables out of range (entropy {}, epr {}, motion {})",
            o.entropy, o.epr, o.motion
        )))
    }
}

fn base_report(d: &TreatmentDataset, cfg: &AnalysisConfig) -> Result<(TreatmentReport, MarkovEstimate)> {
    let chain = estimate_markov(d, cfg.burn_in)?;
    let observables = full_report(&chain, cfg.zero_flux_policy)?;
    check_observables(d.treatment_id(), &observables)?;
    let report = TreatmentReport {
        treatment_id: d.treatment_id().to_owned(),
        meta: d.meta().clone(),
        n_sessions: d.sessions().len(),
        chain: ChainSummary {
            dos: chain.dos().to_vec(),
            transition: chain.transition().to_vec(),
            counts: chain.counts().to_vec(),
            occupancy: chain.occupancy().to_vec(),
            n_observations: chain.n_observations(),
            unleft_rows: chain.unleft_rows().to_vec(),
        },
        observables,
        stationarity: stationarity_diagnostic(d, cfg.burn_in)?,
        marginals: None,
        null_models: Vec::new(),
        comparisons: Vec::new(),
        tests: Vec::new(),
        cycle: None,
    };
    Ok((report, chain))
}

/// Session lengths after burn-in, keeping sessions that still hold a pair.
fn retained_lengths(d: &TreatmentDataset, burn_in: usize) -> Vec<usize> {
    d.sessions()
        .iter()
        .map(|s| s.len().saturating_sub(burn_in))
        .filter(|&n| n >= 2)
        .collect()
}

fn compare(observable: &str, empirical: f64, null: &BaselineDistribution) -> Result<NullComparison> {
    Ok(NullComparison {
        observable: observable.into(),
        empirical,
        null_mean: null.mean(),
        percentile: percentile_of(&null.samples, empirical)?,
        monte_carlo_p: monte_carlo_p_upper(&null.samples, empirical)?,
    })
}

/// Entropy, EPR, velocity and motion of every treatment.
pub fn analyze(datasets: &[TreatmentDataset], cfg: &AnalysisConfig, progress: Progress) -> Result<Report> {
    cfg.validate()?;
    let mut report = Report::new("analyze", cfg);
    for d in datasets {
        progress(&format!("analyze: treatment {}", d.treatment_id()));
        report.treatments.push(base_report(d, cfg)?.0);
    }
    Ok(report)
}

/// Mean action frequencies on the 2×2 space: `p` for the row player's
/// action 1 (states 2, 3) and `q` for the column player's (states 1, 3).
pub fn marginals(chain: &MarkovEstimate) -> Result<Marginals> {
    if !chain.space().is_square_2x2() {
        return Err(Error::InvalidStateSpace(
            "action marginals need the canonical 2x2 space".into(),
        ));
    }
    let occ = chain.occupancy();
    let n = chain.n_observations();
    Ok(Marginals {
        p: (occ[2] + occ[3]) as f64 / n as f64,
        q: (occ[1] + occ[3]) as f64 / n as f64,
        n,
    })
}

/// Compares every treatment with independent randomization at its own
/// observed marginals, then tests across treatments whether empirical EPR
/// exceeds the null mean.
pub fn minimax_test(datasets: &[TreatmentDataset], cfg: &AnalysisConfig, progress: Progress) -> Result<Report> {
    cfg.validate()?;
    let root = Seed::new(cfg.seed);
    let mut report = Report::new("minimax-test", cfg);
    for (k, d) in datasets.iter().enumerate() {
        progress(&format!(
            "minimax-test: treatment {} ({} replicates)",
            d.treatment_id(),
            cfg.mc_reps
        ));
        let (mut tr, chain) = base_report(d, cfg)?;
        let m = marginals(&chain)?;
        let params = VnmParams::with_session_lengths(m.p, m.q, retained_lengths(d, cfg.burn_in))?;
        let (ent, epr) = vnm_null_distribution(&params, cfg.mc_reps, cfg.zero_flux_policy, root.derive(k as u64))?;
        tr.tests.push(NamedTest::from_result(
            "one_sample_t_vnm",
            "entropy",
            one_sample_t(&ent.samples, tr.observables.entropy, Direction::TwoSided),
        ));
        tr.tests.push(NamedTest::from_result(
            "one_sample_t_vnm",
            "epr",
            one_sample_t(&epr.samples, tr.observables.epr, Direction::Less),
        ));
        tr.comparisons.push(compare("entropy", tr.observables.entropy, &ent)?);
        tr.comparisons.push(compare("epr", tr.observables.epr, &epr)?);
        tr.null_models = vec![ent.summary(), epr.summary()];
        tr.marginals = Some(m);
        report.treatments.push(tr);
    }

    let series = |obs: &str| -> (Vec<f64>, Vec<f64>) {
        report
            .treatments
            .iter()
            .flat_map(|t| t.comparisons.iter().filter(|c| c.observable == obs))
            .map(|c| (c.empirical, c.null_mean))
            .unzip()
    };
    let (emp_epr, null_epr) = series("epr");
    let (emp_ent, null_ent) = series("entropy");
    report.tests.push(NamedTest::from_result(
        "paired_t_vnm",
        "epr",
        paired_t(&emp_epr, &null_epr, Direction::Greater),
    ));
    report.tests.push(NamedTest::from_result(
        "paired_t_vnm",
        "entropy",
        paired_t(&emp_ent, &null_ent, Direction::TwoSided),
    ));
    report.tests.push(NamedTest::from_result(
        "welch_t_vnm",
        "epr",
        welch_t(&emp_epr, &null_epr, Direction::Greater),
    ));
    Ok(report)
}

/// The cycle verdict for one treatment: both the t-test of the baseline
/// mean and the Monte-Carlo rank must fall below `alpha`.
fn cycle_verdict(alpha: f64, t: &NamedTest, cmp: &NullComparison) -> CycleVerdict {
    let t_p_value = t.result.map(|r| r.p_value);
    CycleVerdict {
        alpha,
        t_p_value,
        monte_carlo_p: cmp.monte_carlo_p,
        cycle_detected: cmp.monte_carlo_p < alpha && t_p_value.is_none_or(|p| p < alpha),
    }
}

/// Tests each treatment's EPR against the i.i.d. baseline B⁰ drawn from its
/// own density of states with the same session layout.
pub fn cycle_test(datasets: &[TreatmentDataset], cfg: &AnalysisConfig, progress: Progress) -> Result<Report> {
    cfg.validate()?;
    let root = Seed::new(cfg.seed);
    let mut report = Report::new("cycle-test", cfg);
    for (k, d) in datasets.iter().enumerate() {
        progress(&format!(
            "cycle-test: treatment {} ({} replicates)",
            d.treatment_id(),
            cfg.mc_reps
        ));
        let (mut tr, chain) = base_report(d, cfg)?;
        let baseline = dos_baseline_sessions(
            chain.space(),
            chain.dos(),
            &retained_lengths(d, cfg.burn_in),
            cfg.mc_reps,
            cfg.zero_flux_policy,
            root.derive(k as u64),
        )?;
        let test = NamedTest::from_result(
            "one_sample_t_b0",
            "epr",
            one_sample_t(&baseline.samples, tr.observables.epr, Direction::Less),
        );
        let cmp = compare("epr", tr.observables.epr, &baseline)?;
        tr.cycle = Some(cycle_verdict(cfg.alpha, &test, &cmp));
        tr.tests.push(test);
        tr.comparisons.push(cmp);
        tr.null_models.push(baseline.summary());
        report.treatments.push(tr);
    }
    Ok(report)
}

/// Regresses motion on EPR across treatments.
pub fn motion_fit(datasets: &[TreatmentDataset], cfg: &AnalysisConfig, progress: Progress) -> Result<Report> {
    cfg.validate()?;
    let mut report = Report::new("motion-fit", cfg);
    for d in datasets {
        progress(&format!("motion-fit: treatment {}", d.treatment_id()));
        report.treatments.push(base_report(d, cfg)?.0);
    }
    let x: Vec<f64> = report.treatments.iter().map(|t| t.observables.epr).collect();
    let y: Vec<f64> = report.treatments.iter().map(|t| t.observables.motion).collect();
    let fit = ols_fit(&x, &y)?;
    report.fits.push(NamedFit {
        name: "motion_on_epr".into(),
        x_name: "epr".into(),
        y_name: "motion".into(),
        labels: report.treatments.iter().map(|t| t.treatment_id.clone()).collect(),
        x,
        y,
        fit: Some(fit),
        error: None,
    });
    Ok(report)
}
