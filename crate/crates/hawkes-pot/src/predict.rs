//! Forward predictive simulation and held-out predictive scoring.
//!
//! Prediction conditions on the training history: each retained posterior
//! draw seeds a forward simulation on `(T, T + H]` whose new events inherit
//! cluster scales by the interval rule (a new background event opens a new
//! cluster; earlier events extend the last training cluster). Held-out
//! scoring evaluates the log predictive density of the test window, combined
//! across posterior draws with a log-mean-exp.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{gpd_logpdf, gpd_sample, GpdParams, MarkedEventSeries};
use crate::hawkes::{clusters_from_branching, intensity, simulate_window, ParentLink};
use crate::mcmc::{representative_indices, ChainConfig, GpdHierState, MarkFit, MarkModel, PosteriorDraw};

/// One forward-simulated path on the prediction window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictivePath {
    /// Absolute event times in (T, T + H].
    pub times: Vec<f64>,
    /// Excess magnitudes on the original (unscaled) excess scale.
    pub excesses: Vec<f64>,
}

/// Log of the mean of exp(values), max-shifted, with a delta-method Monte
/// Carlo standard error.
pub fn log_mean_exp_with_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NEG_INFINITY, 0.0);
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let w: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let lme = m + mean.ln();
    if w.len() < 2 {
        return (lme, 0.0);
    }
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (lme, (var / n).sqrt() / mean)
}

/// Simulate one predictive path for a posterior draw and a mark-model state.
///
/// The Hawkes simulation runs on `(T, T + H]` conditional on the training
/// events; marks follow the interval-cluster rule: events before the first
/// new background event keep the last training cluster's scale, and each new
/// background event opens a cluster with a fresh latent offset.
pub fn forward_simulate<R: rand::Rng + ?Sized>(
    draw: &PosteriorDraw,
    mark_state: &GpdHierState,
    train: &MarkedEventSeries,
    horizon: f64,
    rng: &mut R,
) -> Result<PredictivePath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::input(format!("prediction horizon must be positive, got {horizon}")));
    }
    let t0 = train.window_end;
    let sim = simulate_window(&draw.hawkes, t0, t0 + horizon, &train.times, rng)?;

    let hierarchical = !mark_state.z.is_empty() && mark_state.tau_sigma > 0.0;
    // scale of the last training cluster, extended into the test window
    let continuing_sigma = if hierarchical {
        let partition = clusters_from_branching(&draw.branching, &train.times, t0)?;
        mark_state.sigma(partition.n_clusters().saturating_sub(1))
    } else {
        mark_state.sigma0()
    };

    let background_times: Vec<f64> = sim
        .times
        .iter()
        .zip(sim.parents.iter())
        .filter(|(_, p)| matches!(p, ParentLink::Background))
        .map(|(&t, _)| t)
        .collect();
    let mut new_cluster_sigma: Vec<f64> = Vec::with_capacity(background_times.len());
    for _ in 0..background_times.len() {
        let sigma = if hierarchical {
            let z: f64 = StandardNormal.sample(rng);
            (mark_state.log_sigma0 + mark_state.tau_sigma * z).exp()
        } else {
            mark_state.sigma0()
        };
        new_cluster_sigma.push(sigma);
    }

    let mut excesses = Vec::with_capacity(sim.times.len());
    for &t in &sim.times {
        let k = background_times.partition_point(|&s| s <= t);
        let sigma = if k == 0 { continuing_sigma } else { new_cluster_sigma[k - 1] };
        let p = GpdParams::new(sigma, mark_state.xi)?;
        excesses.push(train.scale_factor * gpd_sample(&p, rng)?);
    }
    Ok(PredictivePath { times: sim.times, excesses })
}

/// Monte Carlo summaries of a set of predictive paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub n_paths: usize,
    /// Paths with at least one event.
    pub n_nonempty: usize,
    pub mean_count: f64,
    /// (probability, quantile) pairs of the path maximum excess, computed on
    /// nonempty paths only.
    pub max_excess_quantiles: Vec<(f64, f64)>,
    /// (level z, Pr(max excess > z)) pairs; empty paths count as
    /// non-exceeding.
    pub prob_max_exceeds: Vec<(f64, f64)>,
}

/// Summarise predictive paths: event-count mean, maximum-excess quantiles
/// (over nonempty paths) and exceedance probabilities of the maximum (over
/// all paths).
pub fn summarize_paths(
    paths: &[PredictivePath],
    quantile_probs: &[f64],
    exceed_levels: &[f64],
) -> Result<PredictiveSummary> {
    if paths.is_empty() {
        return Err(Error::input("cannot summarise an empty set of predictive paths"));
    }
    let n_paths = paths.len();
    let mean_count = paths.iter().map(|p| p.times.len() as f64).sum::<f64>() / n_paths as f64;
    let maxima: Vec<f64> = paths
        .iter()
        .filter(|p| !p.excesses.is_empty())
        .map(|p| p.excesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let n_nonempty = maxima.len();
    let mut max_excess_quantiles = Vec::with_capacity(quantile_probs.len());
    for &q in quantile_probs {
        if n_nonempty > 0 {
            max_excess_quantiles.push((q, crate::evt::empirical_quantile(&maxima, q)?));
        }
    }
    let prob_max_exceeds = exceed_levels
        .iter()
        .map(|&z| {
            let hits = maxima.iter().filter(|&&m| m > z).count();
            (z, hits as f64 / n_paths as f64)
        })
        .collect();
    Ok(PredictiveSummary { n_paths, n_nonempty, mean_count, max_excess_quantiles, prob_max_exceeds })
}

fn time_logscore_one_draw(
    draw: &PosteriorDraw,
    train_times: &[f64],
    t_train_end: f64,
    test_times: &[f64],
    t_end: f64,
) -> f64 {
    let p = &draw.hawkes;
    let mut combined: Vec<f64> = Vec::with_capacity(train_times.len() + test_times.len());
    combined.extend_from_slice(train_times);
    combined.extend_from_slice(test_times);
    let mut score = 0.0;
    for &t in test_times {
        score += intensity(t, &combined, p).ln();
    }
    // Lambda(t_end) - Lambda(t_train_end) over the combined history
    score -= p.mu * (t_end - t_train_end);
    for &tj in train_times {
        score -= p.kappa * (p.kernel.cdf(t_end - tj) - p.kernel.cdf(t_train_end - tj));
    }
    for &ti in test_times {
        score -= p.kappa * p.kernel.cdf(t_end - ti);
    }
    score
}

/// Held-out log score of the test event times: per draw, the log density of
/// the test point pattern on `(T, T_end]` given the training history, then a
/// log-mean-exp across draws. Returns the score and its Monte Carlo SE.
pub fn heldout_time_logscore(
    train: &MarkedEventSeries,
    test_times: &[f64],
    t_end: f64,
    draws: &[&PosteriorDraw],
) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::input("time score needs at least one posterior draw"));
    }
    if !(t_end >= train.window_end) {
        return Err(Error::input("test window must end at or after the training window"));
    }
    if test_times.iter().any(|&t| t <= train.window_end || t > t_end) {
        return Err(Error::input("test event times must lie in (T, T_end]"));
    }
    let per_draw: Vec<f64> = draws
        .iter()
        .map(|d| time_logscore_one_draw(d, &train.times, train.window_end, test_times, t_end))
        .collect();
    Ok(log_mean_exp_with_se(&per_draw))
}

/// Sample, per test event, whether it is allocated to the background process
/// under the given parameters (one forward allocation pass).
fn sample_test_backgrounds<R: rand::Rng + ?Sized>(
    p: &crate::hawkes::HawkesParams,
    train_times: &[f64],
    test_times: &[f64],
    rng: &mut R,
) -> Vec<bool> {
    let mut combined: Vec<f64> = train_times.to_vec();
    let mut out = Vec::with_capacity(test_times.len());
    for &t in test_times {
        let mut total = p.mu;
        for &tj in combined.iter() {
            total += p.kappa * p.kernel.density(t - tj);
        }
        let u = rand::Rng::gen_range(rng, 0.0..total);
        out.push(u < p.mu);
        combined.push(t);
    }
    out
}

/// Held-out log score of the test excesses.
///
/// For each representative mark fit the conditioning branching is extended
/// over the test window by one allocation pass; test events before the first
/// new background event extend the last training cluster (with its latent
/// offset), while clusters opened inside the test window marginalise their
/// offset with `new_cluster_z_draws` Monte Carlo draws. All (branching, mark
/// draw) pairs are combined with a log-mean-exp. A `-log c` Jacobian maps
/// each density back to the original excess scale.
pub fn heldout_mark_logscore<R: rand::Rng + ?Sized>(
    train: &MarkedEventSeries,
    test_times: &[f64],
    test_excesses: &[f64],
    draws: &[PosteriorDraw],
    mark_fit: &MarkFit,
    new_cluster_z_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if test_times.len() != test_excesses.len() {
        return Err(Error::input("test times and excesses differ in length"));
    }
    if test_times.is_empty() {
        return Ok((0.0, 0.0));
    }
    if mark_fit.fits.is_empty() {
        return Err(Error::input("mark score needs at least one representative fit"));
    }
    let c = train.scale_factor;
    let scaled: Vec<f64> = test_excesses.iter().map(|y| y / c).collect();
    let hierarchical = matches!(mark_fit.mark_model, MarkModel::Hierarchical);
    let jacobian = -(test_times.len() as f64) * c.ln();

    let mut per_pair = Vec::new();
    for fit in &mark_fit.fits {
        let draw = draws.get(fit.draw_index).ok_or_else(|| {
            Error::input(format!("mark fit references missing draw {}", fit.draw_index))
        })?;
        // which test events open new clusters, under this draw's parameters
        let is_background =
            sample_test_backgrounds(&draw.hawkes, &train.times, test_times, rng);
        // cluster index per test event: 0 = continuation of the last
        // training cluster, k >= 1 = k-th new cluster
        let mut cluster_of = Vec::with_capacity(test_times.len());
        let mut n_new = 0usize;
        for &bg in &is_background {
            if bg {
                n_new += 1;
            }
            cluster_of.push(n_new);
        }
        let mut new_members: Vec<Vec<usize>> = vec![Vec::new(); n_new];
        let mut continuing: Vec<usize> = Vec::new();
        for (i, &k) in cluster_of.iter().enumerate() {
            if k == 0 {
                continuing.push(i);
            } else {
                new_members[k - 1].push(i);
            }
        }
        let last_train_cluster = fit.n_clusters.saturating_sub(1);

        for state in &fit.draws {
            let mut ll = jacobian;
            let sigma_cont =
                if hierarchical { state.sigma(last_train_cluster) } else { state.sigma0() };
            let p_cont = GpdParams { sigma: sigma_cont, xi: state.xi };
            for &i in &continuing {
                ll += gpd_logpdf(scaled[i], &p_cont)?;
            }
            for members in &new_members {
                if hierarchical {
                    // marginalise the cluster offset by Monte Carlo
                    let mut terms = Vec::with_capacity(new_cluster_z_draws.max(1));
                    for _ in 0..new_cluster_z_draws.max(1) {
                        let z: f64 = StandardNormal.sample(rng);
                        let sigma = (state.log_sigma0 + state.tau_sigma * z).exp();
                        let p = GpdParams { sigma, xi: state.xi };
                        let mut term = 0.0;
                        for &i in members {
                            term += gpd_logpdf(scaled[i], &p)?;
                        }
                        terms.push(term);
                    }
                    ll += log_mean_exp_with_se(&terms).0;
                } else {
                    let p = GpdParams { sigma: state.sigma0(), xi: state.xi };
                    for &i in members {
                        ll += gpd_logpdf(scaled[i], &p)?;
                    }
                }
            }
            per_pair.push(ll);
        }
    }
    Ok(log_mean_exp_with_se(&per_pair))
}

/// Held-out predictive scores of one fitted model variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Variant label, e.g. "dp_hier".
    pub model: String,
    pub n_test_events: usize,
    pub time_logscore: f64,
    pub time_se: f64,
    pub mark_logscore: f64,
    pub mark_se: f64,
    /// time_logscore + mark_logscore.
    pub combined_logscore: f64,
    pub n_time_draws: usize,
    pub n_mark_pairs: usize,
}

/// Score one fitted model on a held-out test window.
///
/// `test` must share the training threshold; its `window_end` is the absolute
/// end of the test window and its times are absolute. Time scores thin the
/// retained draws to `cfg.score_draws` evenly spaced draws.
pub fn score_model<R: rand::Rng + ?Sized>(
    model: &str,
    train: &MarkedEventSeries,
    test: &MarkedEventSeries,
    draws: &[PosteriorDraw],
    mark_fit: &MarkFit,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<ScoreReport> {
    if draws.is_empty() {
        return Err(Error::input("cannot score a model with no posterior draws"));
    }
    let idx = representative_indices(draws.len(), cfg.score_draws);
    let time_draws: Vec<&PosteriorDraw> = idx.iter().map(|&i| &draws[i]).collect();
    let (time_logscore, time_se) =
        heldout_time_logscore(train, &test.times, test.window_end, &time_draws)?;
    let (mark_logscore, mark_se) = heldout_mark_logscore(
        train,
        &test.times,
        &test.excesses,
        draws,
        mark_fit,
        cfg.new_cluster_z_draws,
        rng,
    )?;
    let n_mark_pairs = mark_fit.fits.iter().map(|f| f.draws.len()).sum();
    Ok(ScoreReport {
        model: model.to_string(),
        n_test_events: test.times.len(),
        time_logscore,
        time_se,
        mark_logscore,
        mark_se,
        combined_logscore: time_logscore + mark_logscore,
        n_time_draws: time_draws.len(),
        n_mark_pairs,
    })
}
