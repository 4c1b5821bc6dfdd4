//! Gibbs and Metropolis-Hastings updates for the Hawkes block.

use rand_distr::{Distribution, Gamma as GammaDist};
use statrs::distribution::{ContinuousCDF, Gamma as GammaCdf};

use crate::dp::{crp_sweep, posterior_dp_draw, sample_concentration, CrpState};
use crate::error::{Error, Result};
use crate::evt::MarkedEventSeries;
use crate::hawkes::{intensity, loglik_conditional, BranchingStructure, HawkesParams, TriggeringKernel};
use crate::rng;

use super::{ChainConfig, KernelModel, PosteriorDraw, PriorConfig};

/// Posterior-allocation draw of the branching structure (Gibbs step).
///
/// For each event i > 1 the parent is categorical with
/// `Pr(B_i = 0) = mu / lambda(t_i)` and
/// `Pr(B_i = j) = kappa h(t_i - t_j) / lambda(t_i)`.
pub fn sample_branching<R: rand::Rng + ?Sized>(
    events: &[f64],
    p: &HawkesParams,
    rng: &mut R,
) -> BranchingStructure {
    let n = events.len();
    let mut parents = vec![0usize; n];
    let mut weights: Vec<f64> = Vec::with_capacity(n);
    for i in 1..n {
        weights.clear();
        weights.push(p.mu);
        let mut total = p.mu;
        for j in 0..i {
            let w = p.kappa * p.kernel.density(events[i] - events[j]);
            weights.push(w);
            total += w;
        }
        let mut u = rng.gen_range(0.0..total);
        let mut pick = weights.len() - 1;
        for (c, w) in weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                pick = c;
                break;
            }
        }
        parents[i] = pick; // 0 = background, j = parent event j (1-based)
    }
    BranchingStructure { parents }
}

/// Exact conjugate update mu | B ~ Gamma(alpha_mu + |S_0|, beta_mu + T).
pub fn sample_mu<R: rand::Rng + ?Sized>(
    b: &BranchingStructure,
    t_end: f64,
    priors: &PriorConfig,
    rng: &mut R,
) -> f64 {
    let shape = priors.mu_shape + b.background_count() as f64;
    let rate = priors.mu_rate + t_end;
    GammaDist::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

/// Conjugate update of kappa, truncated to (0, 1) by inverse-CDF sampling.
pub fn sample_kappa<R: rand::Rng + ?Sized>(
    b: &BranchingStructure,
    events: &[f64],
    kernel: &TriggeringKernel,
    t_end: f64,
    priors: &PriorConfig,
    rng: &mut R,
) -> Result<f64> {
    let n_triggered = (b.len() - b.background_count()) as f64;
    let shape = priors.kappa_shape + n_triggered;
    let hazard: f64 = events.iter().map(|&tj| kernel.cdf(t_end - tj)).sum();
    let rate = priors.kappa_rate + hazard;
    let draw = if rate < 1e-12 {
        // density proportional to kappa^(shape-1) on (0,1)
        rng.gen_range(0.0f64..1.0).powf(1.0 / shape)
    } else {
        let g = GammaCdf::new(shape, rate).map_err(|e| Error::numerical(e.to_string()))?;
        let mass = g.cdf(1.0);
        if mass < 1e-300 {
            return Err(Error::numerical(format!(
                "kappa truncation mass degenerate: Gamma({shape}, {rate}) has mass {mass} below 1"
            )));
        }
        let u = rng.gen_range(0.0..1.0) * mass;
        g.inverse_cdf(u)
    };
    Ok(draw.clamp(1e-12, 1.0 - 1e-12))
}

/// Adaptive random-walk scale, Robbins-Monro toward a target acceptance
/// rate, frozen outside burn-in.
#[derive(Debug, Clone)]
pub struct AdaptiveScale {
    pub log_step: f64,
    target: f64,
    count: u64,
    pub frozen: bool,
}

impl AdaptiveScale {
    pub fn new(step: f64, target: f64) -> Self {
        AdaptiveScale { log_step: step.ln(), target, count: 0, frozen: false }
    }

    pub fn step(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn adapt(&mut self, accepted: bool) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let gamma = (self.count as f64).powf(-0.6).min(0.25);
        let a = if accepted { 1.0 } else { 0.0 };
        self.log_step += gamma * (a - self.target);
        self.log_step = self.log_step.clamp(-12.0, 6.0);
    }
}

fn beta_log_target(beta: f64, lags: &[f64], events: &[f64], kappa: f64, t_end: f64) -> f64 {
    let mut ll = lags.len() as f64 * beta.ln() - beta * lags.iter().sum::<f64>();
    for &tj in events {
        ll -= kappa * (1.0 - (-beta * (t_end - tj)).exp());
    }
    ll
}

/// One adaptive random-walk MH step on log beta for the Exponential kernel,
/// under the Uniform(0, beta_max) prior.
#[allow(clippy::too_many_arguments)]
pub fn sample_beta_exponential<R: rand::Rng + ?Sized>(
    b: &BranchingStructure,
    events: &[f64],
    kappa: f64,
    t_end: f64,
    current: f64,
    priors: &PriorConfig,
    scale: &mut AdaptiveScale,
    rng: &mut R,
) -> Result<f64> {
    let lags = b.lags(events)?;
    let step = scale.step();
    let proposal = (current.ln() + step * draw_std_normal(rng)).exp();
    if !(proposal > 0.0 && proposal < priors.beta_max) {
        scale.adapt(false);
        return Ok(current);
    }
    // log-scale random walk: include the log-Jacobian of each state
    let log_acc = beta_log_target(proposal, &lags, events, kappa, t_end)
        - beta_log_target(current, &lags, events, kappa, t_end)
        + proposal.ln()
        - current.ln();
    let accept = log_acc >= 0.0 || rng.gen_range(0.0f64..1.0).ln() < log_acc;
    scale.adapt(accept);
    Ok(if accept { proposal } else { current })
}

fn draw_std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Log MH acceptance exponent for a proposed kernel: the integrated-hazard
/// correction `-kappa sum_j [H*(T - t_j) - H(T - t_j)]`.
pub fn hazard_log_acceptance(
    kappa: f64,
    events: &[f64],
    t_end: f64,
    proposed: &TriggeringKernel,
    current: &TriggeringKernel,
) -> f64 {
    let delta: f64 = events
        .iter()
        .map(|&tj| proposed.cdf(t_end - tj) - current.cdf(t_end - tj))
        .sum();
    -kappa * delta
}

/// DP-kernel update: CRP sweeps on the current triggering lags, a conjugate
/// posterior DP proposal, and the integrated-hazard MH correction.
///
/// On rejection the previous kernel is retained but the CRP state update is
/// kept (it conditions only on the lags).
#[allow(clippy::too_many_arguments)]
pub fn sample_kernel_dp<R: rand::Rng + ?Sized>(
    b: &BranchingStructure,
    events: &[f64],
    kappa: f64,
    t_end: f64,
    crp: &mut CrpState,
    priors: &PriorConfig,
    alpha_dp: f64,
    current: &TriggeringKernel,
    sweeps: usize,
    rng: &mut R,
) -> Result<TriggeringKernel> {
    let lags = b.lags(events)?;
    for _ in 0..sweeps.max(1) {
        crp_sweep(&lags, crp, &priors.dp, alpha_dp, rng)?;
    }
    let mixture = posterior_dp_draw(crp, alpha_dp, &priors.dp, rng)?;
    let proposed = TriggeringKernel::LognormalMixture { mixture };
    let log_acc = hazard_log_acceptance(kappa, events, t_end, &proposed, current);
    let accept = log_acc >= 0.0 || rng.gen_range(0.0f64..1.0).ln() < log_acc;
    Ok(if accept { proposed } else { current.clone() })
}

/// Run one systematic-scan Gibbs chain on the exceedance times.
///
/// Scan order: B, mu, kappa, kernel, alpha_dp (DP only). Retains post-burn-in
/// draws. Never reads the excess magnitudes.
pub fn run_hawkes_chain(
    series: &MarkedEventSeries,
    kernel_model: KernelModel,
    priors: &PriorConfig,
    cfg: &ChainConfig,
    chain_index: usize,
    rng: &mut rng::Rng,
) -> Result<Vec<PosteriorDraw>> {
    priors.validate()?;
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::input("cannot fit a Hawkes chain to an empty series"));
    }
    let events = &series.times;
    let t_end = series.window_end;
    let n = events.len();

    // initialisation: cheap values inside every support
    let mut mu = (n as f64 / (2.0 * t_end)).max(1e-6);
    let mut kappa = 0.5;
    let mut alpha_dp = GammaDist::new(priors.dp.alpha_shape, 1.0 / priors.dp.alpha_rate)
        .expect("valid gamma")
        .sample(rng);
    let mut crp = CrpState::empty();
    let kernel = match kernel_model {
        KernelModel::Exponential => TriggeringKernel::exponential(1.0)?,
        KernelModel::DpMixture => {
            // prior DP draw
            TriggeringKernel::LognormalMixture {
                mixture: posterior_dp_draw(&crp, alpha_dp, &priors.dp, rng)?,
            }
        }
    };
    let mut params = HawkesParams { mu, kappa, kernel };
    let mut beta_scale = AdaptiveScale::new(0.3, 0.44);

    let mut draws = Vec::with_capacity(cfg.iterations - cfg.burn_in);
    for iter in 0..cfg.iterations {
        let branching = sample_branching(events, &params, rng);
        mu = sample_mu(&branching, t_end, priors, rng);
        params.mu = mu;
        kappa = sample_kappa(&branching, events, &params.kernel, t_end, priors, rng)
            .map_err(|e| Error::numerical(format!("iteration {iter}: {e}")))?;
        params.kappa = kappa;
        match kernel_model {
            KernelModel::Exponential => {
                if iter >= cfg.burn_in {
                    beta_scale.frozen = true;
                }
                let beta = match params.kernel {
                    TriggeringKernel::Exponential { beta } => beta,
                    _ => unreachable!(),
                };
                let new_beta = sample_beta_exponential(
                    &branching, events, kappa, t_end, beta, priors, &mut beta_scale, rng,
                )
                .map_err(|e| Error::numerical(format!("iteration {iter}: {e}")))?;
                params.kernel = TriggeringKernel::Exponential { beta: new_beta };
            }
            KernelModel::DpMixture => {
                params.kernel = sample_kernel_dp(
                    &branching,
                    events,
                    kappa,
                    t_end,
                    &mut crp,
                    priors,
                    alpha_dp,
                    &params.kernel,
                    cfg.crp_sweeps,
                    rng,
                )
                .map_err(|e| Error::numerical(format!("iteration {iter}: {e}")))?;
                alpha_dp = sample_concentration(
                    alpha_dp,
                    crp.n_lags(),
                    crp.n_components(),
                    &priors.dp,
                    rng,
                );
            }
        }
        if iter >= cfg.burn_in {
            let loglik = loglik_conditional(&branching, events, t_end, &params)?;
            draws.push(PosteriorDraw {
                hawkes: params.clone(),
                branching: branching.clone(),
                alpha_dp: matches!(kernel_model, KernelModel::DpMixture).then_some(alpha_dp),
                iteration: iter,
                chain: chain_index,
                loglik,
            });
        }
    }
    Ok(draws)
}

/// Run `cfg.chains` independent chains with derived RNG streams and pool the
/// retained draws in chain order.
pub fn fit_hawkes(
    series: &MarkedEventSeries,
    kernel_model: KernelModel,
    priors: &PriorConfig,
    cfg: &ChainConfig,
    root_seed: u64,
) -> Result<Vec<PosteriorDraw>> {
    let mut all = Vec::new();
    for chain in 0..cfg.chains {
        let mut chain_rng = rng::derive(root_seed, 0x10_0000 + chain as u64);
        let draws = run_hawkes_chain(series, kernel_model, priors, cfg, chain, &mut chain_rng)?;
        all.extend(draws);
    }
    Ok(all)
}

/// Numerical check that the allocation probabilities of one event sum to 1.
pub fn allocation_probabilities(events: &[f64], i: usize, p: &HawkesParams) -> Vec<f64> {
    let lambda = intensity(events[i], &events[..i], p);
    let mut probs = vec![p.mu / lambda];
    for j in 0..i {
        probs.push(p.kappa * p.kernel.density(events[i] - events[j]) / lambda);
    }
    probs
}
