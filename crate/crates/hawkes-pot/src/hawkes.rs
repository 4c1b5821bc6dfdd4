//! Hawkes conditional intensity, compensator, branching-conditional
//! likelihood, exact cluster-based simulation and cluster extraction.
//!
//! ```text
//! lambda(t | H_t) = mu + sum_{t_i < t} kappa h(t - t_i)
//! ```
//!
//! The latent branching structure `B` assigns each event to the background
//! process (B_i = 0) or to the earlier event that triggered it. Background
//! events split the window into interval clusters used by the mark model.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dp::LognormalMixture;
use crate::error::{Error, Result};

/// Triggering kernel: parametric Exponential or a truncated lognormal DP
/// mixture draw. Supplies the density h and CDF H on the lag scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TriggeringKernel {
    Exponential { beta: f64 },
    LognormalMixture { mixture: LognormalMixture },
}

impl TriggeringKernel {
    pub fn exponential(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::parameter(format!("exponential kernel rate must be positive, got {beta}")));
        }
        Ok(TriggeringKernel::Exponential { beta })
    }

    /// Lag density h(x); zero for x <= 0.
    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            TriggeringKernel::Exponential { beta } => beta * (-beta * x).exp(),
            TriggeringKernel::LognormalMixture { mixture } => mixture.density(x).unwrap_or(0.0),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            TriggeringKernel::Exponential { beta } => beta.ln() - beta * x,
            TriggeringKernel::LognormalMixture { mixture } => {
                mixture.density(x).map(|d| d.ln()).unwrap_or(f64::NEG_INFINITY)
            }
        }
    }

    /// Lag CDF H(x); zero for x <= 0.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            TriggeringKernel::Exponential { beta } => -(-beta * x).exp_m1(),
            TriggeringKernel::LognormalMixture { mixture } => mixture.cdf(x),
        }
    }

    /// Inverse of the lag CDF.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0 < u && u < 1.0) {
            return Err(Error::parameter(format!("kernel quantile requires u in (0,1), got {u}")));
        }
        match self {
            TriggeringKernel::Exponential { beta } => Ok(-(1.0 - u).ln() / beta),
            TriggeringKernel::LognormalMixture { mixture } => mixture.quantile(u),
        }
    }
}

/// Hawkes process parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    /// Background rate, events per time unit.
    pub mu: f64,
    /// Branching ratio in (0, 1) (subcritical).
    pub kappa: f64,
    pub kernel: TriggeringKernel,
}

impl HawkesParams {
    pub fn new(mu: f64, kappa: f64, kernel: TriggeringKernel) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::parameter(format!("mu must be positive, got {mu}")));
        }
        if !(kappa >= 0.0 && kappa < 1.0) {
            return Err(Error::parameter(format!("kappa must lie in [0, 1), got {kappa}")));
        }
        Ok(HawkesParams { mu, kappa, kernel })
    }
}

/// Latent parent assignments: B_i = 0 for background, otherwise the 1-based
/// index of the triggering event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingStructure {
    pub parents: Vec<usize>,
}

impl BranchingStructure {
    pub fn new(parents: Vec<usize>) -> Result<Self> {
        if let Some(&first) = parents.first() {
            if first != 0 {
                return Err(Error::input("the first event must be assigned to the background process"));
            }
        }
        for (i, &b) in parents.iter().enumerate() {
            // B_i in {0, ..., i} with 1-based parent indices means parent < i+1
            if b > i {
                return Err(Error::input(format!("parent of event {} must be an earlier event, got {b}", i + 1)));
            }
        }
        Ok(BranchingStructure { parents })
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Number of background events |S_0|.
    pub fn background_count(&self) -> usize {
        self.parents.iter().filter(|&&b| b == 0).count()
    }

    /// Offspring counts |S_j| for j = 1..n (index 0 holds |S_1|).
    pub fn offspring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.parents.len()];
        for &b in &self.parents {
            if b > 0 {
                counts[b - 1] += 1;
            }
        }
        counts
    }

    /// Triggering lags t_i - t_{B_i} for the non-background events.
    pub fn lags(&self, times: &[f64]) -> Result<Vec<f64>> {
        let mut lags = Vec::new();
        for (i, &b) in self.parents.iter().enumerate() {
            if b > 0 {
                let lag = times[i] - times[b - 1];
                if !(lag > 0.0) {
                    return Err(Error::input(format!(
                        "triggering lag must be positive: event {} has parent {} with lag {lag}",
                        i + 1,
                        b
                    )));
                }
                lags.push(lag);
            }
        }
        Ok(lags)
    }
}

/// The interval clusters induced by the background events of a branching
/// structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// 0-based indices of the background events, increasing.
    pub boundaries: Vec<usize>,
    /// Cluster index per event.
    pub assignment: Vec<usize>,
}

impl ClusterPartition {
    pub fn n_clusters(&self) -> usize {
        self.boundaries.len()
    }

    /// Events of each cluster, in order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &k) in self.assignment.iter().enumerate() {
            out[k].push(i);
        }
        out
    }
}

/// Conditional intensity lambda(t | history).
pub fn intensity(t: f64, history: &[f64], p: &HawkesParams) -> f64 {
    let mut acc = p.mu;
    for &ti in history {
        if ti < t {
            acc += p.kappa * p.kernel.density(t - ti);
        }
    }
    acc
}

/// Integrated intensity Lambda(T) = mu T + kappa sum_j H(T - t_j).
pub fn compensator(t_end: f64, events: &[f64], p: &HawkesParams) -> f64 {
    let mut acc = p.mu * t_end;
    for &tj in events {
        if tj <= t_end {
            acc += p.kappa * p.kernel.cdf(t_end - tj);
        }
    }
    acc
}

/// Log-likelihood of the event times conditional on a branching structure:
///
/// ```text
/// |S_0| log mu - mu T + sum_j [ |S_j| log kappa - kappa H(T - t_j) ]
///   + sum_{i : B_i > 0} log h(t_i - t_{B_i})
/// ```
pub fn loglik_conditional(
    b: &BranchingStructure,
    events: &[f64],
    t_end: f64,
    p: &HawkesParams,
) -> Result<f64> {
    if b.len() != events.len() {
        return Err(Error::input("branching structure and event list differ in length"));
    }
    let s0 = b.background_count() as f64;
    let mut ll = s0 * p.mu.ln() - p.mu * t_end;
    let n_triggered = (events.len() - b.background_count()) as f64;
    if n_triggered > 0.0 {
        ll += n_triggered * p.kappa.ln();
    }
    for &tj in events {
        ll -= p.kappa * p.kernel.cdf(t_end - tj);
    }
    for lag in b.lags(events)? {
        ll += p.kernel.log_density(lag);
    }
    Ok(ll)
}

/// Parent link of an event produced by [`simulate_window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParentLink {
    /// Generated by the background process.
    Background,
    /// Triggered by another simulated event (0-based index into the output).
    Simulated(usize),
    /// Triggered by the history event with this 0-based index.
    History(usize),
}

/// One simulated realisation: time-sorted events with true parent links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedWindow {
    pub times: Vec<f64>,
    pub parents: Vec<ParentLink>,
}

impl SimulatedWindow {
    /// Collapse to a plain branching structure; only valid when no event has
    /// a history parent.
    pub fn branching(&self) -> Result<BranchingStructure> {
        let parents = self
            .parents
            .iter()
            .map(|p| match p {
                ParentLink::Background => Ok(0),
                ParentLink::Simulated(j) => Ok(j + 1),
                ParentLink::History(_) => {
                    Err(Error::input("history-parented event has no in-window branching index"))
                }
            })
            .collect::<Result<Vec<usize>>>()?;
        BranchingStructure::new(parents)
    }
}

/// Exact branching-construction simulation of a Hawkes process on the window
/// `(start, end)`, optionally conditioning on prior `history` events (all at
/// times <= start) whose offspring are restricted to the window.
///
/// Offspring counts are Poisson with mean
/// `kappa * [H(end - t_parent) - H(max(0, start - t_parent))]` and lags are
/// drawn from the kernel conditioned to land inside the window, which is the
/// exact conditional law. Events exactly at `end` are excluded (half-open
/// window on the right).
pub fn simulate_window<R: rand::Rng + ?Sized>(
    p: &HawkesParams,
    start: f64,
    end: f64,
    history: &[f64],
    rng: &mut R,
) -> Result<SimulatedWindow> {
    if !p.mu.is_finite() || !p.kappa.is_finite() {
        return Err(Error::parameter("non-finite Hawkes parameters"));
    }
    if !(end >= start) {
        return Err(Error::input(format!("window end {end} before start {start}")));
    }
    if end == start {
        return Ok(SimulatedWindow { times: Vec::new(), parents: Vec::new() });
    }
    if history.iter().any(|&t| t > start) {
        return Err(Error::input("history events must not lie past the window start"));
    }

    // unsorted generation buffer; parent indices refer to this buffer
    let mut times: Vec<f64> = Vec::new();
    let mut parents: Vec<ParentLink> = Vec::new();

    // immigrants: homogeneous Poisson(mu) on (start, end)
    let n_bg = sample_poisson(p.mu * (end - start), rng)?;
    for _ in 0..n_bg {
        times.push(rng.gen_range(start..end));
        parents.push(ParentLink::Background);
    }

    // offspring of history events, restricted to the window
    for (j, &tp) in history.iter().enumerate() {
        spawn_offspring(p, tp, ParentLink::History(j), start, end, &mut times, &mut parents, rng)?;
    }

    // recursively generate offspring of every in-window event
    let mut i = 0;
    while i < times.len() {
        let tp = times[i];
        spawn_offspring(p, tp, ParentLink::Simulated(i), start, end, &mut times, &mut parents, rng)?;
        i += 1;
    }

    // sort by time and remap simulated-parent indices
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
    let mut rank = vec![0usize; times.len()];
    for (r, &idx) in order.iter().enumerate() {
        rank[idx] = r;
    }
    let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let sorted_parents: Vec<ParentLink> = order
        .iter()
        .map(|&i| match parents[i] {
            ParentLink::Simulated(j) => ParentLink::Simulated(rank[j]),
            other => other,
        })
        .collect();
    Ok(SimulatedWindow { times: sorted_times, parents: sorted_parents })
}

#[allow(clippy::too_many_arguments)]
fn spawn_offspring<R: rand::Rng + ?Sized>(
    p: &HawkesParams,
    t_parent: f64,
    link: ParentLink,
    start: f64,
    end: f64,
    times: &mut Vec<f64>,
    parents: &mut Vec<ParentLink>,
    rng: &mut R,
) -> Result<()> {
    if p.kappa == 0.0 {
        return Ok(());
    }
    let lo = (start - t_parent).max(0.0);
    let hi = end - t_parent;
    let h_lo = p.kernel.cdf(lo);
    let h_hi = p.kernel.cdf(hi);
    let mass = p.kappa * (h_hi - h_lo);
    if mass <= 0.0 {
        return Ok(());
    }
    let count = sample_poisson(mass, rng)?;
    for _ in 0..count {
        let u = rng.gen_range(h_lo..h_hi);
        let lag = p.kernel.quantile(u.clamp(1e-300, 1.0 - 1e-16))?;
        let t = t_parent + lag;
        if t > start && t < end {
            times.push(t);
            parents.push(link);
        }
    }
    Ok(())
}

fn sample_poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean < 0.0 || !mean.is_finite() {
        return Err(Error::numerical(format!("Poisson mean {mean} is invalid")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    Ok(Poisson::new(mean).map_err(|e| Error::numerical(e.to_string()))?.sample(rng) as u64)
}

/// Simulate on (0, T) with no prior history, returning events and the true
/// branching structure.
pub fn simulate<R: rand::Rng + ?Sized>(
    p: &HawkesParams,
    t_end: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, BranchingStructure)> {
    let w = simulate_window(p, 0.0, t_end, &[], rng)?;
    let b = w.branching()?;
    Ok((w.times, b))
}

/// Interval clusters: cluster k covers [s_k, s_{k+1}) where s_k is the k-th
/// background event time and s_{K+1} = T.
pub fn clusters_from_branching(
    b: &BranchingStructure,
    events: &[f64],
    _t_end: f64,
) -> Result<ClusterPartition> {
    if b.len() != events.len() {
        return Err(Error::input("branching structure and event list differ in length"));
    }
    let boundaries: Vec<usize> = b
        .parents
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == 0)
        .map(|(i, _)| i)
        .collect();
    let mut assignment = vec![0usize; events.len()];
    let mut k = 0usize;
    for i in 0..events.len() {
        // advance while the next background event starts at or before t_i
        while k + 1 < boundaries.len() && events[boundaries[k + 1]] <= events[i] {
            k += 1;
        }
        assignment[i] = k;
    }
    Ok(ClusterPartition { boundaries, assignment })
}
