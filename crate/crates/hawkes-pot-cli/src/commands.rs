//! Subcommand implementations: simulate | fit | predict | score | study |
//! report.

use std::fs;
use std::path::{Path, PathBuf};

use hawkes_pot::evt::empirical_quantile;
use hawkes_pot::mcmc::fit_model;
use hawkes_pot::predict::{forward_simulate, score_model, summarize_paths, PredictivePath};
use hawkes_pot::study::{generate_scenario, run_study, ScenarioSpec, StudyConfig, StudyResult};
use hawkes_pot::{rng, TriggeringKernel};

use crate::config::RunConfig;
use crate::errors::{CliError, Result};
use crate::ingest::{ingest, transform};
use crate::split::{split_and_extract, SplitData};
use crate::store;

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_resolved_config(config: &RunConfig, dir: &Path) -> Result<()> {
    fs::write(dir.join("resolved_config.toml"), store::resolved_config_text(config)?)?;
    Ok(())
}

/// Ingest, transform, split and extract exceedances per the configuration.
pub fn prepare_data(config: &RunConfig) -> Result<SplitData> {
    let data = config.data()?;
    let ingested = ingest(data)?;
    let series = transform(&ingested, data.transform)?;
    split_and_extract(&series, &config.threshold, config.split()?, ingested.origin)
}

/// `simulate`: draw one synthetic replicate of a study truth and write the
/// series plus ground truth.
pub fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let label = config.simulate.scenario.as_deref().unwrap_or("exp_iid");
    let spec = ScenarioSpec::default_grid()
        .into_iter()
        .find(|s| s.label == label)
        .ok_or_else(|| CliError::usage(format!("unknown simulate scenario {label:?}")))?;
    let mut r = rng::derive_named(config.seed, "cli/simulate");
    let (train, test) = generate_scenario(&spec, &mut r)?;

    let mut csv = String::from("time,value\n");
    for (t, y) in train.times.iter().zip(train.excesses.iter()) {
        csv.push_str(&format!("{t},{y}\n"));
    }
    for (t, y) in test.times.iter().zip(test.excesses.iter()) {
        csv.push_str(&format!("{t},{y}\n"));
    }
    fs::write(dir.join("series.csv"), csv)?;
    let truth = serde_json::json!({
        "scenario": spec,
        "train": train,
        "test": test,
    });
    fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
    store::log_line(&dir, &format!(
        "simulate scenario={label} train_events={} test_events={}",
        train.len(),
        test.len()
    ))?;
    println!(
        "simulated scenario {label}: {} training events, {} test events -> {}",
        train.len(),
        test.len(),
        dir.display()
    );
    Ok(())
}

/// `fit`: fit the configured model variant on the training window and write
/// a draw store.
pub fn cmd_fit(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let data = prepare_data(config)?;
    let variant = config.model.variant()?;
    let chain = config.chains.chain_config()?;
    let priors = config.priors.prior_config()?;
    store::log_line(&dir, &format!(
        "fit model={} events={} threshold={} split_at={}",
        variant.label(),
        data.train.len(),
        data.threshold,
        data.split_at
    ))?;
    let model = fit_model(&data.train, variant, &priors, &chain, config.seed)?;
    let store_path = store::store_dir(&config.output_dir, variant);
    let meta = store::write_store(&store_path, config, &data.train, &data.test, &model, data.split_at)?;
    store::log_line(&dir, &format!("fit complete draws={}", meta.n_draws))?;
    println!(
        "fitted {} ({} draws, {} mark fits) -> {}",
        variant.label(),
        meta.n_draws,
        meta.n_mark_fits,
        store_path.display()
    );
    Ok(())
}

/// `predict`: forward-simulate predictive paths from a completed store and
/// summarise counts, maxima and tail probabilities.
pub fn cmd_predict(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let variant = config.model.variant()?;
    let loaded = store::load_store(&store::store_dir(&config.output_dir, variant))?;
    let pred = &config.prediction;
    if pred.paths == 0 {
        return Err(CliError::usage("prediction needs paths >= 1"));
    }
    let fits = &loaded.model.mark_fit.fits;
    if fits.is_empty() {
        return Err(CliError::data("store has no mark fits"));
    }
    let mut r = rng::derive_named(config.seed, "cli/predict");
    let mut paths: Vec<PredictivePath> = Vec::with_capacity(pred.paths);
    for i in 0..pred.paths {
        let fit = &fits[i % fits.len()];
        let state = &fit.draws[(i / fits.len()) % fit.draws.len()];
        let draw = &loaded.model.draws[fit.draw_index];
        paths.push(forward_simulate(draw, state, &loaded.train, pred.horizon, &mut r)?);
    }
    let summary = summarize_paths(&paths, &pred.quantiles, &pred.levels)?;
    fs::write(dir.join("predictive_summary.json"), serde_json::to_string_pretty(&summary)?)?;

    let mut csv = String::from("statistic,argument,value\n");
    csv.push_str(&format!("mean_count,,{}\n", summary.mean_count));
    csv.push_str(&format!("nonempty_fraction,,{}\n", summary.n_nonempty as f64 / summary.n_paths as f64));
    for (q, v) in &summary.max_excess_quantiles {
        csv.push_str(&format!("max_excess_quantile,{q},{v}\n"));
    }
    for (z, p) in &summary.prob_max_exceeds {
        csv.push_str(&format!("prob_max_exceeds,{z},{p}\n"));
    }
    fs::write(dir.join("predictive_summary.csv"), csv)?;
    store::log_line(&dir, &format!(
        "predict model={} horizon={} paths={}",
        variant.label(),
        pred.horizon,
        pred.paths
    ))?;
    println!(
        "predicted {} paths over horizon {}: mean count {:.3} -> {}",
        summary.n_paths,
        pred.horizon,
        summary.mean_count,
        dir.display()
    );
    Ok(())
}

/// `score`: held-out predictive scores of a completed store's model on its
/// stored test window. Deterministic for a fixed config and seed.
pub fn cmd_score(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let variant = config.model.variant()?;
    let loaded = store::load_store(&store::store_dir(&config.output_dir, variant))?;
    let chain = config.chains.chain_config()?;
    let mut r = rng::derive_named(config.seed, "cli/score");
    let report = score_model(
        variant.label(),
        &loaded.train,
        &loaded.test,
        &loaded.model.draws,
        &loaded.model.mark_fit,
        &chain,
        &mut r,
    )?;
    fs::write(dir.join("score_report.json"), serde_json::to_string_pretty(&report)?)?;
    let mut csv = String::from(
        "model,n_test_events,time_logscore,time_se,mark_logscore,mark_se,combined_logscore\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        report.model,
        report.n_test_events,
        report.time_logscore,
        report.time_se,
        report.mark_logscore,
        report.mark_se,
        report.combined_logscore
    ));
    fs::write(dir.join("scores.csv"), csv)?;
    store::log_line(&dir, &format!(
        "score model={} combined={}",
        report.model, report.combined_logscore
    ))?;
    println!(
        "scored {}: time {:.3}, mark {:.3}, combined {:.3} -> {}",
        report.model,
        report.time_logscore,
        report.mark_logscore,
        report.combined_logscore,
        dir.display()
    );
    Ok(())
}

fn study_config(config: &RunConfig) -> Result<StudyConfig> {
    let mut cfg = match config.study.preset.as_deref() {
        None | Some("desk") => StudyConfig::desk(config.seed),
        Some("paper") => StudyConfig::paper(config.seed),
        Some(other) => return Err(CliError::usage(format!("unknown study preset {other:?}"))),
    };
    if let Some(r) = config.study.replicates {
        cfg.replicates = r;
    }
    cfg.chain = config.chains.chain_config()?;
    cfg.priors = config.priors.prior_config()?;
    Ok(cfg)
}

/// Write the per-replicate and Table-2-shaped summary CSVs of a study.
pub fn write_study_outputs(result: &StudyResult, dir: &Path) -> Result<()> {
    fs::write(dir.join("study.json"), serde_json::to_string_pretty(result)?)?;

    let mut rows = String::from(
        "scenario,replicate,model,time_logscore,mark_logscore,combined_logscore\n",
    );
    for sc in &result.scenarios {
        for (rep, reports) in sc.reports.iter().enumerate() {
            for r in reports {
                rows.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    sc.scenario, rep, r.model, r.time_logscore, r.mark_logscore, r.combined_logscore
                ));
            }
        }
    }
    fs::write(dir.join("study_replicates.csv"), rows)?;

    let mut summary = String::from(
        "scenario,model,delta_time_mean,delta_time_se,delta_mark_mean,delta_mark_se,delta_combined_mean,delta_combined_se\n",
    );
    for sc in &result.scenarios {
        for d in &sc.deltas {
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                sc.scenario,
                d.model,
                d.time.mean,
                d.time.se,
                d.mark.mean,
                d.mark.se,
                d.combined.mean,
                d.combined.se
            ));
        }
    }
    fs::write(dir.join("study_summary.csv"), summary)?;
    Ok(())
}

/// `study`: run the simulation study and write replicate and summary tables.
pub fn cmd_study(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let cfg = study_config(config)?;
    store::log_line(&dir, &format!(
        "study replicates={} iterations={}",
        cfg.replicates, cfg.chain.iterations
    ))?;
    let result = run_study(&cfg)?;
    write_study_outputs(&result, &dir)?;
    store::log_line(&dir, "study complete")?;
    println!(
        "study complete: {} scenarios x {} replicates -> {}",
        result.scenarios.len(),
        result.replicates,
        dir.display()
    );
    Ok(())
}

fn quantiles_of(values: &mut Vec<f64>) -> Result<(f64, f64, f64)> {
    let lo = empirical_quantile(values, 0.025)?;
    let med = empirical_quantile(values, 0.5)?;
    let hi = empirical_quantile(values, 0.975)?;
    Ok((lo, med, hi))
}

/// `report`: plot-ready CSVs from a completed store — posterior triggering
/// density on a lag grid, cluster partitions of representative draws,
/// parameter interval summaries and trace data.
pub fn cmd_report(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config)?;
    write_resolved_config(config, &dir)?;
    let variant = config.model.variant()?;
    let loaded = store::load_store(&store::store_dir(&config.output_dir, variant))?;
    let draws = &loaded.model.draws;
    if draws.is_empty() {
        return Err(CliError::data("store has no draws"));
    }

    // posterior triggering density h(t) on a lag grid
    let n_grid = 200;
    let t_max = 10.0;
    let thin: Vec<usize> = (0..draws.len().min(200))
        .map(|i| i * draws.len() / draws.len().min(200))
        .collect();
    let mut csv = String::from("lag,mean,q025,q50,q975\n");
    for g in 1..=n_grid {
        let t = t_max * g as f64 / n_grid as f64;
        let mut vals: Vec<f64> =
            thin.iter().map(|&i| draws[i].hawkes.kernel.density(t)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let (lo, med, hi) = quantiles_of(&mut vals)?;
        csv.push_str(&format!("{t},{mean},{lo},{med},{hi}\n"));
    }
    fs::write(dir.join("kernel_density.csv"), csv)?;

    // cluster partitions of the representative draws
    let mut csv = String::from("draw_index,event_index,time,cluster\n");
    for fit in &loaded.model.mark_fit.fits {
        for (i, &k) in fit.assignment.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", fit.draw_index, i, loaded.train.times[i], k));
        }
    }
    fs::write(dir.join("clusters.csv"), csv)?;

    // parameter interval summaries
    let mut csv = String::from("parameter,median,q025,q975\n");
    let mut push_param = |name: &str, mut vals: Vec<f64>| -> Result<()> {
        if vals.is_empty() {
            return Ok(());
        }
        let (lo, med, hi) = quantiles_of(&mut vals)?;
        csv.push_str(&format!("{name},{med},{lo},{hi}\n"));
        Ok(())
    };
    push_param("mu", draws.iter().map(|d| d.hawkes.mu).collect())?;
    push_param("kappa", draws.iter().map(|d| d.hawkes.kappa).collect())?;
    let betas: Vec<f64> = draws
        .iter()
        .filter_map(|d| match &d.hawkes.kernel {
            TriggeringKernel::Exponential { beta } => Some(*beta),
            _ => None,
        })
        .collect();
    push_param("beta", betas)?;
    push_param("alpha_dp", draws.iter().filter_map(|d| d.alpha_dp).collect())?;
    let mark_states: Vec<&hawkes_pot::GpdHierState> =
        loaded.model.mark_fit.fits.iter().flat_map(|f| f.draws.iter()).collect();
    push_param("sigma0", mark_states.iter().map(|s| s.sigma0()).collect())?;
    push_param("tau_sigma", mark_states.iter().map(|s| s.tau_sigma).collect())?;
    push_param("xi", mark_states.iter().map(|s| s.xi).collect())?;
    fs::write(dir.join("params_summary.csv"), csv)?;

    // trace data
    let mut csv = String::from("chain,iteration,mu,kappa,loglik\n");
    for d in draws {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            d.chain, d.iteration, d.hawkes.mu, d.hawkes.kappa, d.loglik
        ));
    }
    fs::write(dir.join("trace.csv"), csv)?;
    store::log_line(&dir, &format!("report model={}", variant.label()))?;
    println!("report written for {} -> {}", variant.label(), dir.display());
    Ok(())
}
