use rayon::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind, HamiltonianKind};
use super::{ExpError, ExperimentOutput};
use crate::cluster::{cp_verdict, ring_distance, CorrelationMatrix};
use crate::correlations::Correlations;
use crate::decoherence::{
    ensemble_purity, fragility_scan, gamma_formula, gamma_formula_resolved, gamma_measured, run_ensemble,
    EnsembleSpec, Hamiltonian,
};
use crate::fluctuation::{classify_scaling, spectrum_from_correlations};
use crate::localmeas::{bound_check_from, lm_stability_deviation, measurement_cascade, ObservableGrid};
use crate::models::{build_state, ising_afm_hamiltonian};
use crate::seed::derive_seed;
use crate::state::{additive_fluctuation, AdditiveOperator};
use crate::table::{fmt_float, Table};

/// Computes the tables of one experiment without touching the file system.
pub fn compute(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    match kind {
        ExperimentKind::Scaling => scaling(cfg),
        ExperimentKind::Cluster => cluster(cfg),
        ExperimentKind::Gamma => gamma(cfg),
        ExperimentKind::Lm => lm(cfg),
        ExperimentKind::Cascade => cascade(cfg),
    }
}

fn scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    let coupling = cfg.noise.coupling.operator()?;
    let mut rows = Vec::new();
    let mut spectra = Table::new(&[
        "V", "k", "max_fluct", "op_cx_re", "op_cx_im", "op_cy_re", "op_cy_im", "op_cz_re", "op_cz_im",
    ]);
    for &n in &cfg.volumes {
        let state = build_state(&cfg.model_spec(n))?;
        let spec = spectrum_from_correlations(&Correlations::compute(&state));
        let channel = (0..n)
            .map(|m| additive_fluctuation(&state, &AdditiveOperator::from_index(coupling.clone(), m, n)))
            .collect::<crate::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        for row in spec.to_table().rows {
            let mut r = vec![n.to_string()];
            r.extend(row);
            spectra.push(r);
        }
        rows.push((n, spec.max_fluct(), spec.peak().k, channel));
    }
    let series: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let verdict = classify_scaling(&series)?;
    let channel_series: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.3)).collect();
    let channel_verdict = classify_scaling(&channel_series)?;
    let mut t = Table::new(&[
        "V",
        "max_fluct",
        "k_peak",
        "channel_fluct",
        "exponent",
        "r_squared",
        "class",
        "channel_exponent",
        "channel_class",
    ]);
    for (n, f, k, c) in &rows {
        t.push(vec![
            n.to_string(),
            fmt_float(*f),
            fmt_float(*k),
            fmt_float(*c),
            fmt_float(verdict.exponent),
            fmt_float(verdict.r_squared),
            verdict.class.as_str().to_string(),
            fmt_float(channel_verdict.exponent),
            channel_verdict.class.as_str().to_string(),
        ]);
    }
    Ok(ExperimentOutput {
        tables: vec![("scaling.csv".into(), t), ("scaling_spectrum.csv".into(), spectra)],
        summary: json!({
            "exponent": verdict.exponent,
            "class": verdict.class.as_str(),
            "channel_exponent": channel_verdict.exponent,
            "channel_class": channel_verdict.class.as_str(),
        }),
        flags: Vec::new(),
    })
}

fn cluster(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    let mut per_x = Table::new(&["V", "epsilon", "x", "omega_x"]);
    let mut omegas: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cfg.cluster.epsilons.len()];
    for &n in &cfg.volumes {
        let state = build_state(&cfg.model_spec(n))?;
        let cm = CorrelationMatrix::compute(&state);
        for (i, &eps) in cfg.cluster.epsilons.iter().enumerate() {
            let report = cm.report(eps)?;
            for row in report.to_table().rows {
                let mut r = vec![n.to_string()];
                r.extend(row);
                per_x.push(r);
            }
            omegas[i].push((n, report.omega));
        }
    }
    let mut summary_t = Table::new(&["epsilon", "V", "omega", "verdict", "slope", "ambiguous"]);
    let mut summary = Vec::new();
    for (eps, series) in cfg.cluster.epsilons.iter().zip(&omegas) {
        let v = cp_verdict(series)?;
        for &(n, om) in series {
            summary_t.push(vec![
                fmt_float(*eps),
                n.to_string(),
                om.to_string(),
                v.class.as_str().to_string(),
                fmt_float(v.slope),
                v.ambiguous.to_string(),
            ]);
        }
        summary.push(json!({
            "epsilon": eps,
            "omega": series.iter().map(|s| json!({"V": s.0, "omega": s.1})).collect::<Vec<_>>(),
            "verdict": v.class.as_str(),
            "ambiguous": v.ambiguous,
        }));
    }
    Ok(ExperimentOutput {
        tables: vec![("cluster.csv".into(), per_x), ("cluster_summary.csv".into(), summary_t)],
        summary: json!(summary),
        flags: Vec::new(),
    })
}

fn hamiltonian(cfg: &ExperimentConfig, n: usize) -> Result<Hamiltonian, ExpError> {
    Ok(match cfg.hamiltonian.kind {
        HamiltonianKind::None => Hamiltonian::zero(n),
        HamiltonianKind::IsingAfm => Hamiltonian::Diagonal(ising_afm_hamiltonian(n, cfg.hamiltonian.j)?),
    })
}

fn gamma(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    let noise = cfg.noise.model()?;
    let spec0 = cfg.model_spec(cfg.volumes[0]);
    let scan = fragility_scan(cfg.model.family, spec0.seed, &noise, &cfg.volumes)?;
    let mut tables = vec![("gamma.csv".to_string(), scan.to_table())];
    let mut summary = json!({
        "exponent": scan.exponent,
        "delta": scan.delta(),
        "fragile": scan.fragile,
    });
    let mut flags = Vec::new();
    let t = &cfg.trajectories;
    if t.count > 0 {
        let n = cfg.model.n_sites;
        let state = build_state(&cfg.model_spec(n))?;
        let h = hamiltonian(cfg, n)?;
        let ens = run_ensemble(
            &state,
            &h,
            &noise,
            &EnsembleSpec {
                dt: t.dt,
                n_steps: t.n_steps,
                record_every: t.record_every,
                n_trajectories: t.count,
                master_seed: cfg.master_seed,
            },
        )?;
        let curve = ensemble_purity(&ens.times, &ens.trajectories)?;
        let window = t.window();
        let fit = gamma_measured(&curve, window)?;
        let formula = match &h {
            Hamiltonian::Diagonal(d) => gamma_formula_resolved(&state, &noise, d)?,
            Hamiltonian::Dense { .. } => gamma_formula(&state, &noise)?,
        };
        let agrees = (fit.gamma - formula).abs() <= (3.0 * fit.stderr).max(0.15 * formula);
        if fit.min_purity < 0.7 {
            flags.push(format!("purity falls to {} inside the fit window", fit.min_purity));
        }
        let mut g = Table::new(&[
            "n_sites",
            "trajectories",
            "t_lo",
            "t_hi",
            "gamma_measured",
            "stderr",
            "gamma_formula",
            "n_points",
            "min_purity",
            "agrees",
        ]);
        g.push(vec![
            n.to_string(),
            t.count.to_string(),
            fmt_float(window.0),
            fmt_float(window.1),
            fmt_float(fit.gamma),
            fmt_float(fit.stderr),
            fmt_float(formula),
            fit.n_points.to_string(),
            fmt_float(fit.min_purity),
            agrees.to_string(),
        ]);
        tables.push(("purity.csv".into(), curve.to_table()));
        tables.push(("gamma_measured.csv".into(), g));
        summary["gamma_measured"] = json!(fit.gamma);
        summary["gamma_measured_stderr"] = json!(fit.stderr);
        summary["gamma_formula"] = json!(formula);
        summary["agrees"] = json!(agrees);
    }
    Ok(ExperimentOutput {
        tables,
        summary,
        flags,
    })
}

fn lm(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    let n = cfg.model.n_sites;
    let state = build_state(&cfg.model_spec(n))?;
    let grid = ObservableGrid::with_directions(cfg.lm.grid_directions);
    let corr = Correlations::compute(&state);
    let eps = cfg.lm.epsilon;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y))).collect();
    let results = pairs
        .par_iter()
        .map(|&(x, y)| {
            let r = lm_stability_deviation(&state, x, y, eps, &grid)?;
            let b = bound_check_from(&corr, &state, x, y, eps, &grid)?;
            Ok((r, b))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "x",
        "y",
        "distance",
        "epsilon",
        "deviation",
        "correlation",
        "bound_rhs",
        "bound_status",
        "a_obs",
        "a",
        "b_obs",
        "b",
    ]);
    let mut violated = 0;
    let mut max_dev: f64 = 0.0;
    for (r, b) in &results {
        let (ia, a, ib, bv) = match r.argmax {
            Some((ia, a, ib, b)) => (ia.to_string(), fmt_float(a), ib.to_string(), fmt_float(b)),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        if b.status == crate::localmeas::BoundStatus::Violated {
            violated += 1;
        }
        max_dev = max_dev.max(r.deviation);
        t.push(vec![
            r.x.to_string(),
            r.y.to_string(),
            ring_distance(r.x, r.y, n).to_string(),
            fmt_float(eps),
            fmt_float(r.deviation),
            fmt_float(b.correlation),
            fmt_float(b.rhs),
            b.status.as_str().to_string(),
            ia,
            a,
            ib,
            bv,
        ]);
    }
    Ok(ExperimentOutput {
        tables: vec![("lm.csv".into(), t)],
        summary: json!({
            "max_deviation": max_dev,
            "bound_violations": violated,
            "grid_size": grid.observables.len(),
        }),
        flags: Vec::new(),
    })
}

fn median(sorted: &[usize]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2] as f64
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) as f64
    }
}

fn cascade(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExpError> {
    let n = cfg.model.n_sites;
    let state = build_state(&cfg.model_spec(n))?;
    let c = &cfg.cascade;
    let traces = (0..c.runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.master_seed, r as u64);
            measurement_cascade(&state, c.policy, seed, c.stop_threshold).map(|t| (seed, t))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut runs = Table::new(&[
        "run",
        "seed",
        "count",
        "converged",
        "first_outcome",
        "initial_max_fluct",
        "final_max_fluct",
    ]);
    let mut steps = Table::new(&["run", "step", "site", "axis_theta", "axis_phi", "outcome", "max_fluct"]);
    let mut flags = Vec::new();
    for (r, (seed, tr)) in traces.iter().enumerate() {
        let last = tr.steps.last().map_or(tr.initial_max_fluct, |s| s.max_fluct);
        runs.push(vec![
            r.to_string(),
            seed.to_string(),
            tr.count.to_string(),
            tr.converged.to_string(),
            tr.steps.first().map_or(String::new(), |s| fmt_float(s.outcome)),
            fmt_float(tr.initial_max_fluct),
            fmt_float(last),
        ]);
        for row in tr.to_table().rows {
            let mut v = vec![r.to_string()];
            v.extend(row);
            steps.push(v);
        }
        if !tr.converged {
            flags.push(format!("run {r} hit the N² measurement cap"));
        }
    }
    let mut counts: Vec<usize> = traces.iter().map(|t| t.1.count).collect();
    counts.sort_unstable();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Ok(ExperimentOutput {
        tables: vec![("cascade.csv".into(), runs), ("cascade_trace.csv".into(), steps)],
        summary: json!({
            "policy": c.policy.as_str(),
            "runs": c.runs,
            "median_count": median(&counts),
            "mean_count": mean,
            "min_count": counts[0],
            "max_count": counts[counts.len() - 1],
            "converged": traces.iter().filter(|t| t.1.converged).count(),
        }),
        flags,
    })
}
