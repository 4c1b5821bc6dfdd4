//! Dirichlet-process lognormal-mixture representation of the triggering
//! kernel.
//!
//! The mixture lives on z = log(lag) with Normal components and a
//! Normal-Inverse-Gamma base measure, which makes the conjugate updates
//! exact; the lag-scale density and CDF apply the 1/x Jacobian. Component
//! assignments are Gibbs-sampled with a Chinese Restaurant Process sweep, and
//! full kernel draws come from the conjugate posterior DP via truncated
//! stick breaking.

use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Hyperparameters of the DP mixture prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Shape of the Gamma prior on the concentration alpha_dp.
    pub alpha_shape: f64,
    /// Rate of the Gamma prior on the concentration alpha_dp.
    pub alpha_rate: f64,
    /// Normal-Inverse-Gamma base measure (mu0, k0, a0, b0) on the
    /// (mean, variance) of the log-lag components.
    pub mu0: f64,
    pub k0: f64,
    pub a0: f64,
    pub b0: f64,
    /// Stick-breaking truncation level.
    pub truncation: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            alpha_shape: 2.0,
            alpha_rate: 4.0,
            mu0: 0.0,
            k0: 1.0,
            a0: 1.0,
            b0: 1.0,
            truncation: 1000,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation < 1 {
            return Err(Error::parameter("DP truncation must be >= 1"));
        }
        for (name, v) in [
            ("alpha_shape", self.alpha_shape),
            ("alpha_rate", self.alpha_rate),
            ("k0", self.k0),
            ("a0", self.a0),
            ("b0", self.b0),
        ] {
            if !(v > 0.0) {
                return Err(Error::parameter(format!("DP hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A finite lognormal mixture: the truncated DP draw used as triggering
/// kernel h on the lag scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalMixture {
    /// Nonnegative weights summing to 1 (residual stick mass folded into the
    /// final weight).
    pub weights: Vec<f64>,
    /// Component means on the log-lag scale.
    pub means: Vec<f64>,
    /// Component standard deviations on the log-lag scale, all positive.
    pub sds: Vec<f64>,
}

impl LognormalMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != sds.len() || weights.is_empty() {
            return Err(Error::parameter("mixture component vectors must be nonempty and equal-length"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::parameter("mixture weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::parameter(format!("mixture weights must sum to 1, got {total}")));
        }
        if sds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::parameter("mixture component sds must be positive"));
        }
        Ok(LognormalMixture { weights, means, sds })
    }

    /// Lag-scale density h(x) = sum_l w_l N(log x | m_l, s_l^2) / x.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::parameter(format!("mixture density requires x > 0, got {x}")));
        }
        let z = x.ln();
        let mut acc = 0.0;
        for ((w, m), s) in self.weights.iter().zip(&self.means).zip(&self.sds) {
            let t = (z - m) / s;
            acc += w * (-0.5 * t * t - s.ln() - 0.5 * LN_2PI).exp();
        }
        Ok(acc / x)
    }

    /// Lag-scale CDF H(x) = sum_l w_l Phi((log x - m_l) / s_l).
    ///
    /// Nonpositive x maps to 0 (all mass on the positive reals).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x.ln();
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| w * normal_cdf((z - m) / s))
            .sum()
    }

    /// Inverse CDF by bisection on the log-lag scale.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0 < u && u < 1.0) {
            return Err(Error::parameter(format!("mixture quantile requires u in (0,1), got {u}")));
        }
        // bracket in log space: 12 sds past the extreme components
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (m, s) in self.means.iter().zip(&self.sds) {
            lo = lo.min(m - 12.0 * s);
            hi = hi.max(m + 12.0 * s);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid.exp()) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (1.0 + hi.abs()) {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }
}

/// Sufficient statistics of one occupied CRP component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ComponentStats {
    count: usize,
    sum: f64,
    sumsq: f64,
}

impl ComponentStats {
    fn empty() -> Self {
        ComponentStats { count: 0, sum: 0.0, sumsq: 0.0 }
    }

    fn add(&mut self, z: f64) {
        self.count += 1;
        self.sum += z;
        self.sumsq += z * z;
    }

    fn remove(&mut self, z: f64) {
        self.count -= 1;
        self.sum -= z;
        self.sumsq -= z * z;
    }
}

/// NIG posterior given sufficient stats: returns (mu_n, k_n, a_n, b_n).
fn nig_posterior(cfg: &DpConfig, stats: &ComponentStats) -> (f64, f64, f64, f64) {
    let n = stats.count as f64;
    if stats.count == 0 {
        return (cfg.mu0, cfg.k0, cfg.a0, cfg.b0);
    }
    let mean = stats.sum / n;
    let ss = (stats.sumsq - n * mean * mean).max(0.0);
    let k_n = cfg.k0 + n;
    let mu_n = (cfg.k0 * cfg.mu0 + stats.sum) / k_n;
    let a_n = cfg.a0 + 0.5 * n;
    let b_n = cfg.b0 + 0.5 * ss + cfg.k0 * n * (mean - cfg.mu0).powi(2) / (2.0 * k_n);
    (mu_n, k_n, a_n, b_n)
}

/// Log predictive density of z under the NIG posterior for `stats`: a
/// Student-t with 2 a_n dof, location mu_n, squared scale b_n (k_n+1)/(a_n k_n).
fn log_predictive(cfg: &DpConfig, stats: &ComponentStats, z: f64) -> f64 {
    let (mu_n, k_n, a_n, b_n) = nig_posterior(cfg, stats);
    let nu = 2.0 * a_n;
    let scale2 = b_n * (k_n + 1.0) / (a_n * k_n);
    let t2 = (z - mu_n).powi(2) / scale2;
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
        - 0.5 * (nu + 1.0) * (t2 / nu).ln_1p()
}

/// CRP mixture state over the current set of log-lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpState {
    /// Log-lags currently conditioned on.
    log_lags: Vec<f64>,
    /// Component label per lag.
    labels: Vec<usize>,
    /// Sufficient stats per occupied component.
    stats: Vec<ComponentStats>,
    /// Explicit (mean, variance) per occupied component, redrawn after each
    /// sweep; consumed by the posterior DP draw.
    params: Vec<(f64, f64)>,
}

impl CrpState {
    pub fn empty() -> Self {
        CrpState { log_lags: Vec::new(), labels: Vec::new(), stats: Vec::new(), params: Vec::new() }
    }

    pub fn n_lags(&self) -> usize {
        self.log_lags.len()
    }

    pub fn n_components(&self) -> usize {
        self.stats.len()
    }

    pub fn occupancy(&self) -> Vec<usize> {
        self.stats.iter().map(|s| s.count).collect()
    }

    pub fn component_params(&self) -> &[(f64, f64)] {
        &self.params
    }

    /// Per-lag component parameters phi_i.
    pub fn lag_params(&self) -> Vec<(f64, f64)> {
        self.labels.iter().map(|&c| self.params[c]).collect()
    }

    fn drop_if_empty(&mut self, c: usize) {
        if self.stats[c].count == 0 {
            self.stats.swap_remove(c);
            if c < self.params.len() {
                self.params.swap_remove(c);
            }
            let moved = self.stats.len();
            for l in self.labels.iter_mut() {
                if *l == moved {
                    *l = c;
                }
            }
        }
    }

    /// Seat one lag given the current components (CRP prior x predictive).
    fn seat<R: rand::Rng + ?Sized>(
        &mut self,
        idx: usize,
        z: f64,
        cfg: &DpConfig,
        alpha_dp: f64,
        rng: &mut R,
    ) {
        let mut logw: Vec<f64> = self
            .stats
            .iter()
            .map(|s| (s.count as f64).ln() + log_predictive(cfg, s, z))
            .collect();
        logw.push(alpha_dp.ln() + log_predictive(cfg, &ComponentStats::empty(), z));
        let c = sample_categorical_log(&logw, rng);
        if c == self.stats.len() {
            self.stats.push(ComponentStats::empty());
            // placeholder params until the post-sweep redraw
            self.params.push((cfg.mu0, cfg.b0 / cfg.a0));
        }
        self.stats[c].add(z);
        self.labels[idx] = c;
    }

    /// Replace the conditioning lag set, reseating every lag against the
    /// retained components. Used when the branching structure (and hence the
    /// lag set) changes between MCMC iterations.
    pub fn reassign<R: rand::Rng + ?Sized>(
        &mut self,
        lags: &[f64],
        cfg: &DpConfig,
        alpha_dp: f64,
        rng: &mut R,
    ) -> Result<()> {
        if lags.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::input("triggering lags must be positive"));
        }
        self.log_lags = lags.iter().map(|x| x.ln()).collect();
        self.labels = vec![usize::MAX; lags.len()];
        for s in self.stats.iter_mut() {
            *s = ComponentStats::empty();
        }
        for i in 0..self.log_lags.len() {
            let z = self.log_lags[i];
            self.seat(i, z, cfg, alpha_dp, rng);
        }
        // drop components that attracted nobody
        let mut c = 0;
        while c < self.stats.len() {
            if self.stats[c].count == 0 {
                self.drop_if_empty(c);
            } else {
                c += 1;
            }
        }
        Ok(())
    }
}

fn sample_categorical_log<R: rand::Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ws: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = ws.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (i, w) in ws.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    ws.len() - 1
}

/// One full CRP sweep over the lags in `state`, then a conjugate redraw of
/// every occupied component's (mean, variance).
///
/// If `state` does not already condition on `lags` it is reassigned first.
pub fn crp_sweep<R: rand::Rng + ?Sized>(
    lags: &[f64],
    state: &mut CrpState,
    cfg: &DpConfig,
    alpha_dp: f64,
    rng: &mut R,
) -> Result<()> {
    cfg.validate()?;
    if !(alpha_dp > 0.0) {
        return Err(Error::parameter(format!("alpha_dp must be positive, got {alpha_dp}")));
    }
    let current: Vec<f64> = lags.iter().map(|x| x.ln()).collect();
    if state.log_lags != current {
        state.reassign(lags, cfg, alpha_dp, rng)?;
    }
    for i in 0..state.log_lags.len() {
        let z = state.log_lags[i];
        let old = state.labels[i];
        state.stats[old].remove(z);
        state.labels[i] = usize::MAX;
        state.drop_if_empty(old);
        state.seat(i, z, cfg, alpha_dp, rng);
    }
    redraw_component_params(state, cfg, rng);
    Ok(())
}

/// Conjugate redraw of each occupied component's (mean, variance) from its
/// NIG posterior.
fn redraw_component_params<R: rand::Rng + ?Sized>(state: &mut CrpState, cfg: &DpConfig, rng: &mut R) {
    state.params.clear();
    for s in &state.stats {
        let (mu_n, k_n, a_n, b_n) = nig_posterior(cfg, s);
        let var = draw_inv_gamma(a_n, b_n, rng);
        let mean = mu_n + (var / k_n).sqrt() * draw_std_normal(rng);
        state.params.push((mean, var));
    }
}

fn draw_inv_gamma<R: rand::Rng + ?Sized>(shape: f64, rate_b: f64, rng: &mut R) -> f64 {
    // X ~ InvGamma(a, b)  <=>  1/X ~ Gamma(a, rate b)
    let g = Gamma::new(shape, 1.0 / rate_b).expect("valid gamma");
    (1.0 / g.sample(rng)).max(1e-300)
}

fn draw_std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from the NIG base measure G0.
fn draw_base_measure<R: rand::Rng + ?Sized>(cfg: &DpConfig, rng: &mut R) -> (f64, f64) {
    let var = draw_inv_gamma(cfg.a0, cfg.b0, rng);
    let mean = cfg.mu0 + (var / cfg.k0).sqrt() * draw_std_normal(rng);
    (mean, var)
}

/// Auxiliary-variable update of the DP concentration under its Gamma prior.
pub fn sample_concentration<R: rand::Rng + ?Sized>(
    alpha_dp: f64,
    n_lags: usize,
    n_components: usize,
    cfg: &DpConfig,
    rng: &mut R,
) -> f64 {
    let (a, b) = (cfg.alpha_shape, cfg.alpha_rate);
    if n_lags == 0 {
        return Gamma::new(a, 1.0 / b).expect("valid gamma").sample(rng);
    }
    let n = n_lags as f64;
    let k = n_components as f64;
    // eta ~ Beta(alpha + 1, n), then a two-Gamma mixture
    let eta = Beta::new(alpha_dp + 1.0, n).expect("valid beta").sample(rng);
    let rate = b - eta.ln();
    let odds = (a + k - 1.0) / (n * rate);
    let shape = if rng.gen_range(0.0..1.0) < odds / (1.0 + odds) { a + k } else { a + k - 1.0 };
    Gamma::new(shape.max(1e-8), 1.0 / rate).expect("valid gamma").sample(rng)
}

/// Draw a truncated stick-breaking realisation of the conjugate posterior DP
/// and return the induced lognormal mixture on the lag scale.
///
/// Atoms come from G0' = [alpha/(alpha+n)] G0 + [n/(alpha+n)] empirical(phi_i)
/// with stick fractions Beta(1, alpha + n); the residual mass after L sticks
/// is folded into the final weight. Duplicate atoms (from the empirical part)
/// are merged so downstream density evaluation stays cheap.
pub fn posterior_dp_draw<R: rand::Rng + ?Sized>(
    state: &CrpState,
    alpha_dp: f64,
    cfg: &DpConfig,
    rng: &mut R,
) -> Result<LognormalMixture> {
    cfg.validate()?;
    if !(alpha_dp > 0.0) {
        return Err(Error::parameter(format!("alpha_dp must be positive, got {alpha_dp}")));
    }
    let n = state.n_lags();
    let alpha_post = alpha_dp + n as f64;
    let lag_params = state.lag_params();
    let beta = Beta::new(1.0, alpha_post).expect("valid beta");
    let l_max = cfg.truncation;

    let mut weights = Vec::with_capacity(l_max);
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(l_max);
    let mut remaining = 1.0_f64;
    for l in 0..l_max {
        let v = beta.sample(rng);
        let w = if l + 1 == l_max { remaining } else { remaining * v };
        remaining -= w;
        let atom = if n > 0 && rng.gen_range(0.0..1.0) < n as f64 / (alpha_dp + n as f64) {
            lag_params[rng.gen_range(0..n)]
        } else {
            draw_base_measure(cfg, rng)
        };
        weights.push(w);
        atoms.push(atom);
    }

    // merge exact-duplicate atoms
    let mut merged: Vec<((f64, f64), f64)> = Vec::new();
    for (w, atom) in weights.into_iter().zip(atoms) {
        if let Some(entry) = merged.iter_mut().find(|(a, _)| *a == atom) {
            entry.1 += w;
        } else {
            merged.push((atom, w));
        }
    }
    let total: f64 = merged.iter().map(|(_, w)| w).sum();
    let mut ws = Vec::with_capacity(merged.len());
    let mut means = Vec::with_capacity(merged.len());
    let mut sds = Vec::with_capacity(merged.len());
    for ((mean, var), w) in merged {
        ws.push(w / total);
        means.push(mean);
        sds.push(var.sqrt());
    }
    LognormalMixture::new(ws, means, sds)
}
