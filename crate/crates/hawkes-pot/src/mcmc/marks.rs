//! Hierarchical GPD mark sampler, run conditional on representative
//! branchings.
//!
//! Target (conditional on the cluster partition of one branching draw):
//!
//! ```text
//! p(log sigma_0, tau_sigma, xi) prod_k { p(z_k) prod_{i in C_k} g(y_i | sigma_k, xi) }
//! sigma_k = exp(log sigma_0 + tau_sigma z_k)
//! ```
//!
//! Updates are adaptive random-walk Metropolis within Gibbs on
//! (log sigma_0, log tau_sigma, each z_k, xi), with per-block scale
//! adaptation frozen after warm-up. The iid-GPD variant is the special case
//! tau_sigma = 0 with a single cluster.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{gpd_logpdf, GpdParams, MarkedEventSeries};
use crate::hawkes::clusters_from_branching;

use super::hawkes_chain::AdaptiveScale;
use super::{representative_indices, ChainConfig, MarkModel, PosteriorDraw, PriorConfig};

/// State of the hierarchical GPD mark model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdHierState {
    pub log_sigma0: f64,
    /// Nonnegative; identically 0 for the iid variant.
    pub tau_sigma: f64,
    /// Shared shape, > -0.25 under the truncated prior.
    pub xi: f64,
    /// Per-cluster latent offsets, one per cluster of the conditioning
    /// partition (empty for the iid variant).
    pub z: Vec<f64>,
}

impl GpdHierState {
    /// Scale of cluster k: exp(log sigma_0 + tau_sigma z_k).
    pub fn sigma(&self, k: usize) -> f64 {
        if self.z.is_empty() {
            self.log_sigma0.exp()
        } else {
            (self.log_sigma0 + self.tau_sigma * self.z[k]).exp()
        }
    }

    pub fn sigma0(&self) -> f64 {
        self.log_sigma0.exp()
    }
}

/// Mark-model posterior draws for one representative branching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkBranchFit {
    /// Index into the retained Hawkes draws this fit conditions on.
    pub draw_index: usize,
    /// Cluster count of the conditioning partition.
    pub n_clusters: usize,
    /// Cluster assignment per training event.
    pub assignment: Vec<usize>,
    pub draws: Vec<GpdHierState>,
}

/// Per-representative-branching mark fits; cluster scales are local to each
/// partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkFit {
    pub mark_model: MarkModel,
    pub fits: Vec<MarkBranchFit>,
}

fn log_prior(state: &GpdHierState, priors: &PriorConfig, hierarchical: bool) -> f64 {
    if state.xi <= priors.xi_lower {
        return f64::NEG_INFINITY;
    }
    let mut lp = -0.5 * (state.log_sigma0 / priors.log_sigma0_sd).powi(2)
        - 0.5 * (state.xi / priors.xi_sd).powi(2);
    if hierarchical {
        lp -= 0.5 * (state.tau_sigma / priors.tau_sigma_sd).powi(2);
        for &z in &state.z {
            lp -= 0.5 * z * z;
        }
    }
    lp
}

fn cluster_loglik(excesses: &[f64], sigma: f64, xi: f64) -> f64 {
    let p = GpdParams { sigma, xi };
    let mut ll = 0.0;
    for &y in excesses {
        match gpd_logpdf(y, &p) {
            Ok(v) => ll += v,
            Err(_) => return f64::NEG_INFINITY,
        }
        if ll == f64::NEG_INFINITY {
            return ll;
        }
    }
    ll
}

fn total_loglik(state: &GpdHierState, clusters: &[Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for (k, ys) in clusters.iter().enumerate() {
        ll += cluster_loglik(ys, state.sigma(k), state.xi);
        if ll == f64::NEG_INFINITY {
            return ll;
        }
    }
    ll
}

fn log_post(state: &GpdHierState, clusters: &[Vec<f64>], priors: &PriorConfig, hier: bool) -> f64 {
    let lp = log_prior(state, priors, hier);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + total_loglik(state, clusters)
}

fn draw_std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn mh_accept<R: rand::Rng + ?Sized>(log_acc: f64, rng: &mut R) -> bool {
    log_acc >= 0.0 || rand::Rng::gen_range(rng, 0.0f64..1.0).ln() < log_acc
}

struct MarkSampler {
    state: GpdHierState,
    clusters: Vec<Vec<f64>>,
    hier: bool,
    s_ls0: AdaptiveScale,
    s_ltau: AdaptiveScale,
    s_z: AdaptiveScale,
    s_xi: AdaptiveScale,
}

impl MarkSampler {
    fn new(clusters: Vec<Vec<f64>>, hier: bool, init: GpdHierState) -> Self {
        MarkSampler {
            state: init,
            clusters,
            hier,
            s_ls0: AdaptiveScale::new(0.2, 0.44),
            s_ltau: AdaptiveScale::new(0.3, 0.44),
            s_z: AdaptiveScale::new(0.4, 0.44),
            s_xi: AdaptiveScale::new(0.1, 0.44),
        }
    }

    fn freeze(&mut self) {
        self.s_ls0.frozen = true;
        self.s_ltau.frozen = true;
        self.s_z.frozen = true;
        self.s_xi.frozen = true;
    }

    fn sweep<R: rand::Rng + ?Sized>(&mut self, priors: &PriorConfig, rng: &mut R) {
        // log sigma_0
        let mut prop = self.state.clone();
        prop.log_sigma0 += self.s_ls0.step() * draw_std_normal(rng);
        let log_acc = log_post(&prop, &self.clusters, priors, self.hier)
            - log_post(&self.state, &self.clusters, priors, self.hier);
        let acc = mh_accept(log_acc, rng);
        self.s_ls0.adapt(acc);
        if acc {
            self.state = prop;
        }

        // log tau_sigma (half-normal prior on tau; the log transform adds a
        // +log tau Jacobian)
        if self.hier {
            let mut prop = self.state.clone();
            let lt = self.state.tau_sigma.ln() + self.s_ltau.step() * draw_std_normal(rng);
            prop.tau_sigma = lt.exp();
            let log_acc = log_post(&prop, &self.clusters, priors, self.hier)
                - log_post(&self.state, &self.clusters, priors, self.hier)
                + prop.tau_sigma.ln()
                - self.state.tau_sigma.ln();
            let acc = mh_accept(log_acc, rng);
            self.s_ltau.adapt(acc);
            if acc {
                self.state = prop;
            }

            // per-cluster offsets; only the cluster's own likelihood moves
            for k in 0..self.state.z.len() {
                let z_old = self.state.z[k];
                let z_new = z_old + self.s_z.step() * draw_std_normal(rng);
                let sigma_old = self.state.sigma(k);
                let sigma_new =
                    (self.state.log_sigma0 + self.state.tau_sigma * z_new).exp();
                let log_acc = cluster_loglik(&self.clusters[k], sigma_new, self.state.xi)
                    - cluster_loglik(&self.clusters[k], sigma_old, self.state.xi)
                    - 0.5 * z_new * z_new
                    + 0.5 * z_old * z_old;
                let acc = mh_accept(log_acc, rng);
                self.s_z.adapt(acc);
                if acc {
                    self.state.z[k] = z_new;
                }
            }
        }

        // xi (proposals at or below the truncation bound have zero prior and
        // are rejected outright)
        let mut prop = self.state.clone();
        prop.xi += self.s_xi.step() * draw_std_normal(rng);
        let log_acc = log_post(&prop, &self.clusters, priors, self.hier)
            - log_post(&self.state, &self.clusters, priors, self.hier);
        let acc = mh_accept(log_acc, rng);
        self.s_xi.adapt(acc);
        if acc {
            self.state = prop;
        }
    }
}

/// Fit the GPD mark model conditional on each representative branching.
///
/// `representative_draws` are (index, draw) pairs of evenly spaced retained
/// Hawkes draws; excesses are pre-scaled by the series scale factor. The
/// branchings are never modified.
pub fn fit_marks_hierarchical<R: rand::Rng + ?Sized>(
    series: &MarkedEventSeries,
    representative_draws: &[(usize, &PosteriorDraw)],
    mark_model: MarkModel,
    priors: &PriorConfig,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<MarkFit> {
    priors.validate()?;
    if series.is_empty() {
        return Err(Error::input("cannot fit a mark model to an empty series"));
    }
    let scaled = series.scaled_excesses();
    let hier = matches!(mark_model, MarkModel::Hierarchical);
    let mean_scaled = scaled.iter().sum::<f64>() / scaled.len() as f64;

    let mut fits = Vec::with_capacity(representative_draws.len());
    for &(draw_index, draw) in representative_draws {
        let (clusters, assignment, n_clusters) = if hier {
            let partition = clusters_from_branching(&draw.branching, &series.times, series.window_end)?;
            let mut clusters = vec![Vec::new(); partition.n_clusters()];
            for (i, &k) in partition.assignment.iter().enumerate() {
                clusters[k].push(scaled[i]);
            }
            let n = partition.n_clusters();
            (clusters, partition.assignment, n)
        } else {
            (vec![scaled.clone()], vec![0; scaled.len()], 1)
        };

        let init = GpdHierState {
            log_sigma0: mean_scaled.ln(),
            tau_sigma: if hier { 0.25 } else { 0.0 },
            xi: 0.1,
            z: if hier { vec![0.0; n_clusters] } else { Vec::new() },
        };
        let mut sampler = MarkSampler::new(clusters, hier, init);
        let mut kept = Vec::new();
        for iter in 0..cfg.mark_iterations {
            if iter == cfg.mark_warmup {
                sampler.freeze();
            }
            sampler.sweep(priors, rng);
            if iter >= cfg.mark_warmup {
                kept.push(sampler.state.clone());
            }
        }
        let idx = representative_indices(kept.len(), cfg.mark_draws_kept);
        let draws: Vec<GpdHierState> = idx.into_iter().map(|i| kept[i].clone()).collect();
        fits.push(MarkBranchFit { draw_index, n_clusters, assignment, draws });
    }
    Ok(MarkFit { mark_model, fits })
}

/// Convenience: pick evenly spaced representative draws out of a retained
/// draw list.
pub fn select_representatives<'a>(
    draws: &'a [PosteriorDraw],
    count: usize,
) -> Vec<(usize, &'a PosteriorDraw)> {
    representative_indices(draws.len(), count)
        .into_iter()
        .map(|i| (i, &draws[i]))
        .collect()
}
