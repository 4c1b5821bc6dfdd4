//! Acceptance suite: one test per acceptance criterion, each printing a
//! single `criterion NN ... PASS` line (visible with `--nocapture`; a failed
//! assertion fails the test before the line is printed).
//!
//! Run with `cargo test --test acceptance -- --nocapture`.

use std::process::Command;

use hawkes_pot::dp::{crp_sweep, posterior_dp_draw, sample_concentration, CrpState};
use hawkes_pot::evt::{gpd_cdf, gpd_logpdf, gpd_sample, GpdParams};
use hawkes_pot::hawkes::{compensator, intensity, simulate, BranchingStructure};
use hawkes_pot::mcmc::{
    fit_marks_hierarchical, sample_beta_exponential, sample_branching, sample_kappa, sample_mu,
    AdaptiveScale, ChainConfig, MarkModel, PosteriorDraw, PriorConfig,
};
use hawkes_pot::predict::{forward_simulate, heldout_mark_logscore, heldout_time_logscore};
use hawkes_pot::study::{bimodal_truth_kernel, run_study, ScenarioResult, StudyConfig, VariantDelta};
use hawkes_pot::{rng, HawkesParams, MarkedEventSeries, TriggeringKernel};
use hawkes_pot::mcmc::{GpdHierState, MarkBranchFit, MarkFit};
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

fn pass(n: u32, what: &str) {
    println!("criterion {n:02} ({what}): PASS");
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_two_sample(a: &mut Vec<f64>, b: &mut Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample KS distance of a sample against a CDF.
fn ks_one_sample(sample: &mut Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

// ---------------------------------------------------------------------------
// 1. exact-tables caveat
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_exact_tables_caveat() {
    // The original real-data score tables need raw market/hydrology data and
    // chain lengths far beyond desk scale, so they are explicitly out of
    // scope; this suite substitutes protocol and property checks plus a
    // qualitative reproduction of the simulation study (criterion 2).
    println!(
        "criterion 01 note: real-data score tables are not reproduced; \
         protocol/property checks and the desk-scale study stand in for them"
    );
    pass(1, "exact-tables caveat");
}

// ---------------------------------------------------------------------------
// 2. simulation-study sign pattern (desk preset)
// ---------------------------------------------------------------------------

fn delta<'a>(sc: &'a ScenarioResult, model: &str) -> &'a VariantDelta {
    sc.deltas.iter().find(|d| d.model == model).expect("model present")
}

fn scenario<'a>(res: &'a [ScenarioResult], label: &str) -> &'a ScenarioResult {
    res.iter().find(|s| s.scenario == label).expect("scenario present")
}

#[test]
fn criterion_02_simulation_study_sign_pattern() {
    let result = run_study(&StudyConfig::desk(20260825)).unwrap();
    let sc = &result.scenarios;
    for s in sc {
        for d in &s.deltas {
            println!(
                "  study {}: {} combined delta {:+.2} (se {:.2})",
                s.scenario, d.model, d.combined.mean, d.combined.se
            );
        }
    }

    // (a) exp_iid truth: no variant should beat the baseline
    for d in &scenario(sc, "exp_iid").deltas {
        assert!(
            d.combined.mean.abs() <= 2.0 * d.combined.se,
            "exp_iid truth: {} delta {} not within 2 se ({})",
            d.model,
            d.combined.mean,
            d.combined.se
        );
    }
    // (b) exp_hier truth: hierarchical marks win
    for model in ["exp_hier", "dp_hier"] {
        let d = delta(scenario(sc, "exp_hier"), model);
        assert!(
            d.combined.mean > 2.0 * d.combined.se,
            "exp_hier truth: {} delta {} se {} not positive by 2 se",
            model,
            d.combined.mean,
            d.combined.se
        );
    }
    // (c) mix_iid truth: the DP kernel wins, hierarchical marks alone do not
    let s = scenario(sc, "mix_iid");
    for model in ["dp_iid", "dp_hier"] {
        let d = delta(s, model);
        assert!(
            d.combined.mean > 2.0 * d.combined.se,
            "mix_iid truth: {} delta {} se {} not positive by 2 se",
            model,
            d.combined.mean,
            d.combined.se
        );
    }
    let d = delta(s, "exp_hier");
    assert!(
        d.combined.mean <= 2.0 * d.combined.se,
        "mix_iid truth: exp_hier delta {} se {} should not be positive by 2 se",
        d.combined.mean,
        d.combined.se
    );
    // (d) mix_hier truth: the full model has the largest mean delta
    let s = scenario(sc, "mix_hier");
    let dp_hier = delta(s, "dp_hier").combined.mean;
    for model in ["exp_hier", "dp_iid"] {
        assert!(
            dp_hier > delta(s, model).combined.mean,
            "mix_hier truth: dp_hier {} not larger than {} {}",
            dp_hier,
            model,
            delta(s, model).combined.mean
        );
    }
    pass(2, "simulation-study sign pattern");
}

// ---------------------------------------------------------------------------
// 3. branching-count law
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_branching_count_law() {
    let p = HawkesParams::new(0.10, 0.55, TriggeringKernel::exponential(1.0).unwrap()).unwrap();
    let mut r = rng::derive(3, 0);
    let counts: Vec<f64> =
        (0..200).map(|_| simulate(&p, 1000.0, &mut r).unwrap().0.len() as f64).collect();
    let expect = 0.10 * 1000.0 / (1.0 - 0.55);
    let se = sd(&counts) / (counts.len() as f64).sqrt();
    let m = mean(&counts);
    assert!(
        (m - expect).abs() <= 3.0 * se,
        "mean count {m} vs {expect} (se {se})"
    );
    pass(3, "branching-count law");
}

// ---------------------------------------------------------------------------
// 4. conjugacy oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_conjugacy_oracles() {
    // mu | B is Gamma(alpha_mu + |S0|, beta_mu + T)
    let priors = PriorConfig::default();
    let b = BranchingStructure::new(vec![0, 0, 0, 0, 0, 2, 3, 1]).unwrap(); // |S0| = 5
    let t_end = 40.0;
    let mut r = rng::derive(4, 0);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_mu(&b, t_end, &priors, &mut r)).collect();
    let shape = priors.mu_shape + 5.0;
    let rate = priors.mu_rate + t_end;
    let (m, v) = (mean(&draws), sd(&draws).powi(2));
    assert!((m - shape / rate).abs() / (shape / rate) < 0.01, "mu mean {m}");
    assert!((v - shape / rate.powi(2)).abs() / (shape / rate.powi(2)) < 0.01, "mu var {v}");

    // kappa | B against a rejection-sampling oracle, three settings
    let kernel = TriggeringKernel::exponential(1.0).unwrap();
    let settings: [(usize, f64, f64, f64); 3] =
        [(10, 20.0, 1.0, 0.0), (4, 12.0, 2.0, 2.0), (25, 60.0, 0.5, 1.0)];
    for (si, &(pairs, t_end, ks, kr)) in settings.iter().enumerate() {
        let priors = PriorConfig { kappa_shape: ks, kappa_rate: kr, ..PriorConfig::default() };
        // alternating background/offspring pairs: `pairs` triggered events
        let mut events = Vec::new();
        let mut parents = Vec::new();
        for k in 0..pairs {
            events.push(k as f64 + 0.2);
            parents.push(0);
            events.push(k as f64 + 0.5);
            parents.push(2 * k + 1);
        }
        let b = BranchingStructure::new(parents).unwrap();
        let hazard: f64 = events.iter().map(|&tj| kernel.cdf(t_end - tj)).sum();
        let (shape, rate) = (ks + pairs as f64, kr + hazard);
        let mut r = rng::derive(4, 10 + si as u64);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_kappa(&b, &events, &kernel, t_end, &priors, &mut r).unwrap())
            .collect();
        let gamma = Gamma::new(shape, 1.0 / rate).unwrap();
        let mut oracle = Vec::with_capacity(100_000);
        while oracle.len() < 100_000 {
            let x: f64 = gamma.sample(&mut r);
            if x < 1.0 {
                oracle.push(x);
            }
        }
        let d = ks_two_sample(&mut draws, &mut oracle);
        assert!(d < 0.01, "setting {si}: kappa KS {d}");
    }
    pass(4, "conjugacy oracles");
}

// ---------------------------------------------------------------------------
// 5. likelihood identity by branching enumeration
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_branching_enumeration_identity() {
    let mut r = rng::derive(5, 0);
    for _case in 0..20 {
        let mu = r.gen_range(0.2..1.0);
        let kappa = r.gen_range(0.1..0.8);
        let beta = r.gen_range(0.5..2.0);
        let kernel = TriggeringKernel::exponential(beta).unwrap();
        let p = HawkesParams::new(mu, kappa, kernel.clone()).unwrap();
        let mut events: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..5.0)).collect();
        events.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let t_end = 6.0;

        // direct: sum of log intensities minus the compensator
        let mut direct = -compensator(t_end, &events, &p);
        for (i, &t) in events.iter().enumerate() {
            direct += intensity(t, &events[..i], &p).ln();
        }

        // enumeration over all 1 * 2 * 3 branchings of the complete-data
        // likelihood mu^{|S0|} prod kappa h(lag) exp(-mu T - kappa sum H)
        let censor: f64 =
            -mu * t_end - kappa * events.iter().map(|&tj| kernel.cdf(t_end - tj)).sum::<f64>();
        let mut terms = Vec::new();
        for p1 in 0..=1usize {
            for p2 in 0..=2usize {
                let mut ll = censor + mu.ln(); // first event is background
                for (i, &parent) in [p1, p2].iter().enumerate() {
                    let child = i + 1;
                    if parent == 0 {
                        ll += mu.ln();
                    } else {
                        ll += kappa.ln() + kernel.density(events[child] - events[parent - 1]).ln();
                    }
                }
                terms.push(ll);
            }
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let enumerated = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        assert!(
            (enumerated - direct).abs() < 1e-8,
            "enumerated {enumerated} direct {direct}"
        );
    }
    pass(5, "likelihood identity");
}

// ---------------------------------------------------------------------------
// 6. Geweke-style joint-distribution test
// ---------------------------------------------------------------------------

/// Forward draw from the priors used by the Geweke test.
fn geweke_prior_draw<R: rand::Rng + ?Sized>(priors: &PriorConfig, r: &mut R) -> (f64, f64, f64) {
    let mu = Gamma::new(priors.mu_shape, 1.0 / priors.mu_rate).unwrap().sample(r);
    let gk = Gamma::new(priors.kappa_shape, 1.0 / priors.kappa_rate).unwrap();
    let kappa = loop {
        let x: f64 = gk.sample(r);
        if x < 1.0 {
            break x;
        }
    };
    let beta = r.gen_range(0.0..priors.beta_max);
    (mu, kappa, beta)
}

fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    sd(&means) / (batches as f64).sqrt()
}

#[test]
fn criterion_06_geweke_joint_distribution() {
    let t_end = 50.0;
    let rounds = 2000;
    // light-tailed priors keep prior-predictive event counts manageable
    let priors = PriorConfig {
        mu_shape: 2.0,
        mu_rate: 4.0,
        kappa_shape: 2.0,
        kappa_rate: 6.0,
        beta_max: 5.0,
        ..PriorConfig::default()
    };
    let mut r = rng::derive(6, 0);

    // forward: prior draws (data marginalised out)
    let mut fwd_mu = Vec::with_capacity(rounds);
    let mut fwd_kappa = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let (mu, kappa, _) = geweke_prior_draw(&priors, &mut r);
        fwd_mu.push(mu);
        fwd_kappa.push(kappa);
    }

    // successive-conditional: alternate data | params and one Gibbs scan
    let (mut mu, mut kappa, mut beta) = geweke_prior_draw(&priors, &mut r);
    let mut scale = AdaptiveScale::new(0.5, 0.44);
    scale.frozen = true; // fixed kernel keeps the chain reversible
    let mut chain_mu = Vec::with_capacity(rounds);
    let mut chain_kappa = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let kernel = TriggeringKernel::exponential(beta).unwrap();
        let p = HawkesParams::new(mu, kappa, kernel.clone()).unwrap();
        let (events, _) = simulate(&p, t_end, &mut r).unwrap();
        let b = sample_branching(&events, &p, &mut r);
        mu = sample_mu(&b, t_end, &priors, &mut r);
        kappa = sample_kappa(&b, &events, &kernel, t_end, &priors, &mut r).unwrap();
        beta =
            sample_beta_exponential(&b, &events, kappa, t_end, beta, &priors, &mut scale, &mut r)
                .unwrap();
        chain_mu.push(mu);
        chain_kappa.push(kappa);
    }

    for (name, fwd, chain) in
        [("mu", &fwd_mu, &chain_mu), ("kappa", &fwd_kappa, &chain_kappa)]
    {
        let moments: [(u32, fn(f64) -> f64); 2] = [(1, |x| x), (2, |x| x * x)];
        for (moment, f) in moments {
            let a: Vec<f64> = fwd.iter().map(|&x| f(x)).collect();
            let b: Vec<f64> = chain.iter().map(|&x| f(x)).collect();
            let se_a = sd(&a) / (a.len() as f64).sqrt();
            let se_b = batch_means_se(&b, 40);
            let gap = (mean(&a) - mean(&b)).abs();
            let tol = 3.0 * (se_a * se_a + se_b * se_b).sqrt();
            assert!(
                gap <= tol,
                "{name} moment {moment}: forward {} chain {} gap {gap} tol {tol}",
                mean(&a),
                mean(&b)
            );
        }
    }
    pass(6, "Geweke joint-distribution");
}

// ---------------------------------------------------------------------------
// 7. GPD numerics
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_gpd_numerics() {
    // finite-difference consistency of pdf and cdf
    for &(sigma, xi) in &[(1.0, 0.2), (0.5, -0.1), (2.0, 0.0), (1.5, 0.7)] {
        let p = GpdParams::new(sigma, xi).unwrap();
        for &z in &[0.1, 0.5, 1.0, 2.0] {
            if xi < 0.0 && z >= -sigma / xi {
                continue;
            }
            let h = 1e-6;
            let fd = (gpd_cdf(z + h, &p).unwrap() - gpd_cdf(z - h, &p).unwrap()) / (2.0 * h);
            let pdf = gpd_logpdf(z, &p).unwrap().exp();
            assert!((fd - pdf).abs() / pdf < 1e-5, "fd {fd} pdf {pdf} at z={z} xi={xi}");
        }
    }
    // xi -> 0 continuity
    let exact = GpdParams::new(1.3, 0.0).unwrap();
    let near = GpdParams::new(1.3, 1e-9).unwrap();
    for &z in &[0.1, 1.0, 3.0, 8.0] {
        let a = gpd_logpdf(z, &near).unwrap();
        let b = gpd_logpdf(z, &exact).unwrap();
        assert!((a - b).abs() < 1e-6, "logpdf continuity at {z}: {a} vs {b}");
        let a = gpd_cdf(z, &near).unwrap();
        let b = gpd_cdf(z, &exact).unwrap();
        assert!((a - b).abs() < 1e-6, "cdf continuity at {z}: {a} vs {b}");
    }
    // sampler distribution
    let p = GpdParams::new(1.2, 0.25).unwrap();
    let mut r = rng::derive(7, 0);
    let mut sample: Vec<f64> = (0..100_000).map(|_| gpd_sample(&p, &mut r).unwrap()).collect();
    let d = ks_one_sample(&mut sample, |z| gpd_cdf(z, &p).unwrap());
    assert!(d < 0.01, "sampler KS {d}");
    pass(7, "GPD numerics");
}

// ---------------------------------------------------------------------------
// 8. DP kernel recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_dp_kernel_recovery() {
    let truth = match bimodal_truth_kernel() {
        TriggeringKernel::LognormalMixture { mixture } => mixture,
        _ => unreachable!(),
    };
    let mut r = rng::derive(8, 0);
    let lags: Vec<f64> = (0..400)
        .map(|_| truth.quantile(r.gen_range(0.0..1.0)).unwrap())
        .collect();

    let priors = PriorConfig::default();
    let mut crp = CrpState::empty();
    let mut alpha = 1.0;
    for _ in 0..200 {
        crp_sweep(&lags, &mut crp, &priors.dp, alpha, &mut r).unwrap();
        alpha = sample_concentration(alpha, crp.n_lags(), crp.n_components(), &priors.dp, &mut r);
    }
    let grid: Vec<f64> = (1..6000).map(|i| i as f64 * 0.005).collect();
    let mut post_mean = vec![0.0f64; grid.len()];
    let n_draws = 100;
    for _ in 0..n_draws {
        crp_sweep(&lags, &mut crp, &priors.dp, alpha, &mut r).unwrap();
        alpha = sample_concentration(alpha, crp.n_lags(), crp.n_components(), &priors.dp, &mut r);
        let mix = posterior_dp_draw(&crp, alpha, &priors.dp, &mut r).unwrap();
        for (acc, &x) in post_mean.iter_mut().zip(grid.iter()) {
            *acc += mix.density(x).unwrap() / n_draws as f64;
        }
    }

    let rate = lags.len() as f64 / lags.iter().sum::<f64>(); // exponential MLE
    let mut ise_dp = 0.0;
    let mut ise_exp = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        let f = truth.density(x).unwrap();
        ise_dp += (post_mean[i] - f).powi(2) * 0.005;
        ise_exp += (rate * (-rate * x).exp() - f).powi(2) * 0.005;
    }
    assert!(
        ise_dp <= 0.5 * ise_exp,
        "DP ISE {ise_dp} not at most half of exponential ISE {ise_exp}"
    );
    pass(8, "DP kernel recovery");
}

// ---------------------------------------------------------------------------
// 9. mark-model oracle against a grid posterior
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_mark_model_grid_oracle() {
    let truth = GpdParams::new(1.0, 0.15).unwrap();
    let mut r = rng::derive(9, 0);
    let n = 500;
    let excesses: Vec<f64> = (0..n).map(|_| gpd_sample(&truth, &mut r).unwrap()).collect();
    let times: Vec<f64> = (0..n).map(|i| i as f64 + 0.5).collect();
    let series = MarkedEventSeries::new(n as f64, 0.0, times, excesses.clone()).unwrap();

    let priors = PriorConfig::default();
    let cfg = ChainConfig {
        mark_iterations: 12_000,
        mark_warmup: 2_000,
        mark_draws_kept: 10_000,
        ..ChainConfig::desk()
    };
    // the iid mark model ignores the branching; any valid draw will do
    let dummy = PosteriorDraw {
        hawkes: HawkesParams::new(0.5, 0.0, TriggeringKernel::exponential(1.0).unwrap()).unwrap(),
        branching: BranchingStructure::new(vec![0; n]).unwrap(),
        alpha_dp: None,
        iteration: 0,
        chain: 0,
        loglik: 0.0,
    };
    let fit = fit_marks_hierarchical(
        &series,
        &[(0, &dummy)],
        MarkModel::Iid,
        &priors,
        &cfg,
        &mut r,
    )
    .unwrap();
    let draws = &fit.fits[0].draws;
    let mc_sigma = mean(&draws.iter().map(|s| s.sigma0()).collect::<Vec<_>>());
    let mc_xi = mean(&draws.iter().map(|s| s.xi).collect::<Vec<_>>());

    // 200 x 200 grid posterior over (log sigma, xi) under the same priors
    let g = 200;
    let log_sigma_grid: Vec<f64> = (0..g).map(|i| -0.5 + i as f64 * (1.0 / (g - 1) as f64)).collect();
    let xi_grid: Vec<f64> = (0..g).map(|i| -0.2 + i as f64 * (1.0 / (g - 1) as f64)).collect();
    let mut log_post = Vec::with_capacity(g * g);
    for &ls in &log_sigma_grid {
        for &xi in &xi_grid {
            let p = GpdParams::new(ls.exp(), xi).unwrap();
            let mut lp = -0.5 * (ls / priors.log_sigma0_sd).powi(2)
                - 0.5 * (xi / priors.xi_sd).powi(2);
            for &y in series.scaled_excesses().iter() {
                lp += match gpd_logpdf(y, &p) {
                    Ok(v) => v,
                    Err(_) => f64::NEG_INFINITY,
                };
            }
            log_post.push(lp);
        }
    }
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut e_sigma, mut e_xi) = (0.0, 0.0, 0.0);
    for (idx, &lp) in log_post.iter().enumerate() {
        let w = (lp - max).exp();
        z += w;
        e_sigma += w * log_sigma_grid[idx / g].exp();
        e_xi += w * xi_grid[idx % g];
    }
    e_sigma /= z;
    e_xi /= z;

    assert!(
        (mc_sigma - e_sigma).abs() < 0.02,
        "sigma posterior mean {mc_sigma} vs grid {e_sigma}"
    );
    assert!((mc_xi - e_xi).abs() < 0.02, "xi posterior mean {mc_xi} vs grid {e_xi}");
    pass(9, "mark-model grid oracle");
}

// ---------------------------------------------------------------------------
// 10. scoring analytics
// ---------------------------------------------------------------------------

fn homogeneous_draw(mu: f64, n_train: usize) -> PosteriorDraw {
    PosteriorDraw {
        hawkes: HawkesParams::new(mu, 0.0, TriggeringKernel::exponential(1.0).unwrap()).unwrap(),
        branching: BranchingStructure::new(vec![0; n_train]).unwrap(),
        alpha_dp: None,
        iteration: 0,
        chain: 0,
        loglik: 0.0,
    }
}

#[test]
fn criterion_10_scoring_analytics() {
    let train = MarkedEventSeries::new(100.0, 0.0, vec![10.0, 40.0], vec![0.5, 0.7]).unwrap();
    let mu = 0.3;
    let draw = homogeneous_draw(mu, 2);

    // void probability on (100, 120]
    let (score, se) = heldout_time_logscore(&train, &[], 120.0, &[&draw]).unwrap();
    assert!((score - (-mu * 20.0)).abs() < 1e-10, "void score {score}");
    assert!(se.abs() < 1e-12);
    // single-event path
    let (score, _) = heldout_time_logscore(&train, &[113.0], 120.0, &[&draw]).unwrap();
    assert!((score - (mu.ln() - mu * 20.0)).abs() < 1e-10, "one-event score {score}");

    // mark Jacobian: scoring on scale c with sigma equals the GPD at c*sigma
    let mut train_scaled =
        MarkedEventSeries::new(100.0, 0.0, vec![10.0, 40.0], vec![0.5, 0.7]).unwrap();
    train_scaled.scale_factor = 2.0;
    let state = GpdHierState { log_sigma0: 0.0, tau_sigma: 0.0, xi: 0.2, z: Vec::new() };
    let mark_fit = MarkFit {
        mark_model: MarkModel::Iid,
        fits: vec![MarkBranchFit {
            draw_index: 0,
            n_clusters: 1,
            assignment: vec![0, 0],
            draws: vec![state],
        }],
    };
    let test_times = [105.0, 112.0];
    let test_excesses = [0.8, 2.5];
    let mut r = rng::derive(10, 0);
    let (mark_score, _) = heldout_mark_logscore(
        &train_scaled,
        &test_times,
        &test_excesses,
        &[draw.clone()],
        &mark_fit,
        8,
        &mut r,
    )
    .unwrap();
    let wide = GpdParams::new(2.0, 0.2).unwrap(); // c * sigma
    let direct: f64 = test_excesses.iter().map(|&y| gpd_logpdf(y, &wide).unwrap()).sum();
    assert!((mark_score - direct).abs() < 1e-12, "jacobian {mark_score} vs {direct}");

    // compound-Poisson maximum: P(max > z) = 1 - exp(-mu H e^{-z}) for
    // unit-exponential marks (xi = 0, sigma = 1)
    let state = GpdHierState { log_sigma0: 0.0, tau_sigma: 0.0, xi: 0.0, z: Vec::new() };
    let (h, z) = (15.0, 1.0);
    let n_paths = 10_000;
    let mut hits = 0usize;
    for _ in 0..n_paths {
        let path = forward_simulate(&draw, &state, &train, h, &mut r).unwrap();
        if path.excesses.iter().any(|&y| y > z) {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / n_paths as f64;
    let p = 1.0 - (-mu * h * (-z as f64).exp()).exp();
    let se = (p * (1.0 - p) / n_paths as f64).sqrt();
    assert!(
        (p_hat - p).abs() <= 3.0 * se,
        "max tail prob {p_hat} vs {p} (se {se})"
    );
    pass(10, "scoring analytics");
}

// ---------------------------------------------------------------------------
// 11. end-to-end determinism through the CLI
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    // synthetic exceedance data: strictly increasing times, positive values
    let p = HawkesParams::new(0.15, 0.5, TriggeringKernel::exponential(1.0).unwrap()).unwrap();
    let mut r = rng::derive(11, 0);
    let (times, _) = simulate(&p, 600.0, &mut r).unwrap();
    let gpd = GpdParams::new(1.0, 0.1).unwrap();
    let mut csv = String::from("time,value\n");
    for &t in &times {
        csv.push_str(&format!("{t},{}\n", 0.05 + gpd_sample(&gpd, &mut r).unwrap()));
    }
    let data_path = dir.path().join("series.csv");
    std::fs::write(&data_path, csv).unwrap();

    let config = format!(
        r#"
seed = 77
output_dir = "unused"

[data]
input = "{}"

[threshold]
kind = "absolute"
value = 0.0

[split]
kind = "fraction"
fraction = 0.8

[model]
kernel = "dp_mixture"
marks = "hierarchical"

[chains]
preset = "desk"
iterations = 400
burn_in = 100
chains = 1
representative_draws = 6
mark_iterations = 200
mark_warmup = 100
mark_draws_kept = 8
score_draws = 100
"#,
        data_path.display()
    );
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, config).unwrap();

    let bin = env!("CARGO_BIN_EXE_hawkes-pot");
    let mut reports = Vec::new();
    let mut score_csvs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}"));
        for sub in ["fit", "score"] {
            let status = Command::new(bin)
                .args([
                    sub,
                    "--config",
                    config_path.to_str().unwrap(),
                    "--output-dir",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{sub} run {run} failed");
        }
        reports.push(std::fs::read(out.join("score_report.json")).unwrap());
        score_csvs.push(std::fs::read(out.join("scores.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "score reports differ between identical runs");
    assert_eq!(score_csvs[0], score_csvs[1], "score CSVs differ between identical runs");
    assert!(!reports[0].is_empty());
    pass(11, "end-to-end determinism");
}
