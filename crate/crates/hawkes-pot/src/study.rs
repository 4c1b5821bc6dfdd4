//! Simulation-study harness: a 2x2 grid of data-generating truths, four
//! fitted model variants per replicate, and held-out score deltas against
//! the Exponential-kernel iid-marks baseline.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dp::LognormalMixture;
use crate::error::{Error, Result};
use crate::evt::{gpd_sample, GpdParams, MarkedEventSeries};
use crate::hawkes::{clusters_from_branching, simulate, HawkesParams, TriggeringKernel};
use crate::mcmc::{
    fit_hawkes, fit_marks_hierarchical, select_representatives, ChainConfig, KernelModel,
    MarkModel, ModelVariant, PriorConfig,
};
use crate::predict::{score_model, ScoreReport};
use crate::rng;

/// One data-generating truth of the simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub mu: f64,
    pub kappa: f64,
    pub kernel: TriggeringKernel,
    /// Baseline GPD scale sigma_0.
    pub sigma0: f64,
    /// Shared GPD shape.
    pub xi: f64,
    /// Cluster-scale spread; 0 generates iid marks.
    pub tau_sigma: f64,
    /// Full observation window (0, t_end].
    pub t_end: f64,
    /// Train/test split point.
    pub train_end: f64,
}

/// The bimodal lognormal triggering kernel used by the mixture truths.
pub fn bimodal_truth_kernel() -> TriggeringKernel {
    TriggeringKernel::LognormalMixture {
        mixture: LognormalMixture::new(vec![0.7, 0.3], vec![-0.3, 1.2], vec![0.35, 0.45])
            .expect("valid mixture"),
    }
}

impl ScenarioSpec {
    fn base(label: &str, kernel: TriggeringKernel, tau_sigma: f64) -> Self {
        ScenarioSpec {
            label: label.to_string(),
            mu: 0.10,
            kappa: 0.55,
            kernel,
            sigma0: 1.0,
            xi: 0.15,
            tau_sigma,
            t_end: 1000.0,
            train_end: 800.0,
        }
    }

    /// The 2x2 truth grid: {Exponential, bimodal mixture} kernels times
    /// {iid, hierarchical} marks.
    pub fn default_grid() -> Vec<ScenarioSpec> {
        let exp = TriggeringKernel::exponential(1.0).expect("valid kernel");
        vec![
            Self::base("exp_iid", exp.clone(), 0.0),
            Self::base("exp_hier", exp, 1.0),
            Self::base("mix_iid", bimodal_truth_kernel(), 0.0),
            Self::base("mix_hier", bimodal_truth_kernel(), 1.0),
        ]
    }
}

/// Generate one replicate: simulate events on (0, t_end), attach GPD marks
/// by the true interval clusters (threshold u = 0, scale factor c = 1) and
/// split at `train_end`. Degenerate replicates (too few training or test
/// events) are regenerated from the same RNG stream.
pub fn generate_scenario<R: rand::Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<(MarkedEventSeries, MarkedEventSeries)> {
    let params = HawkesParams::new(spec.mu, spec.kappa, spec.kernel.clone())?;
    for _attempt in 0..50 {
        let (times, branching) = simulate(&params, spec.t_end, rng)?;
        let n_train = times.iter().filter(|&&t| t <= spec.train_end).count();
        let n_test = times.len() - n_train;
        if n_train < 30 || n_test < 5 {
            continue;
        }
        let partition = clusters_from_branching(&branching, &times, spec.t_end)?;
        let mut sigma_of_cluster = Vec::with_capacity(partition.n_clusters());
        for _ in 0..partition.n_clusters() {
            let sigma = if spec.tau_sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                spec.sigma0 * (spec.tau_sigma * z).exp()
            } else {
                spec.sigma0
            };
            sigma_of_cluster.push(sigma);
        }
        let mut excesses = Vec::with_capacity(times.len());
        for &k in &partition.assignment {
            let p = GpdParams::new(sigma_of_cluster[k], spec.xi)?;
            excesses.push(gpd_sample(&p, rng)?);
        }
        let train = MarkedEventSeries::new(
            spec.train_end,
            0.0,
            times[..n_train].to_vec(),
            excesses[..n_train].to_vec(),
        )?;
        let test = MarkedEventSeries::new(
            spec.t_end,
            0.0,
            times[n_train..].to_vec(),
            excesses[n_train..].to_vec(),
        )?;
        return Ok((train, test));
    }
    Err(Error::numerical(format!(
        "scenario {} kept producing degenerate replicates",
        spec.label
    )))
}

/// Study-wide settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub replicates: usize,
    pub chain: ChainConfig,
    pub priors: PriorConfig,
    pub seed: u64,
}

impl StudyConfig {
    pub fn desk(seed: u64) -> Self {
        StudyConfig { replicates: 5, chain: ChainConfig::desk(), priors: PriorConfig::default(), seed }
    }

    pub fn paper(seed: u64) -> Self {
        StudyConfig {
            replicates: 50,
            chain: ChainConfig::paper(),
            priors: PriorConfig::default(),
            seed,
        }
    }
}

/// Mean and Monte Carlo standard error of a per-replicate delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStat {
    pub mean: f64,
    pub se: f64,
}

fn delta_stat(values: &[f64]) -> DeltaStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return DeltaStat { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    DeltaStat { mean, se: (var / n).sqrt() }
}

/// Held-out score deltas of one model variant against the exp_iid baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantDelta {
    pub model: String,
    pub time: DeltaStat,
    pub mark: DeltaStat,
    pub combined: DeltaStat,
}

/// Results for one data-generating truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub replicates: usize,
    /// Per replicate, the four variant score reports (exp_iid, exp_hier,
    /// dp_iid, dp_hier).
    pub reports: Vec<Vec<ScoreReport>>,
    /// Deltas against exp_iid for the three non-baseline variants.
    pub deltas: Vec<VariantDelta>,
}

/// Full simulation-study output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub seed: u64,
    pub replicates: usize,
    pub scenarios: Vec<ScenarioResult>,
}

/// Deltas of every non-baseline variant against the first (baseline) report
/// of each replicate.
pub(crate) fn compute_deltas(reports: &[Vec<ScoreReport>]) -> Vec<VariantDelta> {
    if reports.is_empty() {
        return Vec::new();
    }
    let n_models = reports[0].len();
    let mut out = Vec::new();
    for m in 1..n_models {
        let time: Vec<f64> =
            reports.iter().map(|r| r[m].time_logscore - r[0].time_logscore).collect();
        let mark: Vec<f64> =
            reports.iter().map(|r| r[m].mark_logscore - r[0].mark_logscore).collect();
        let combined: Vec<f64> = reports
            .iter()
            .map(|r| r[m].combined_logscore - r[0].combined_logscore)
            .collect();
        out.push(VariantDelta {
            model: reports[0][m].model.clone(),
            time: delta_stat(&time),
            mark: delta_stat(&mark),
            combined: delta_stat(&combined),
        });
    }
    out
}

fn sub_seed(root: u64, label: &str) -> u64 {
    rand::Rng::gen(&mut rng::derive_named(root, label))
}

/// Run the full study: for every truth scenario and replicate, fit both
/// kernels once, fit both mark models on each kernel's representative
/// branchings, score all four variants on the held-out window, and aggregate
/// deltas against the exp_iid baseline.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.chain.validate()?;
    cfg.priors.validate()?;
    if cfg.replicates == 0 {
        return Err(Error::parameter("study needs at least one replicate"));
    }
    let mut scenarios = Vec::new();
    for spec in ScenarioSpec::default_grid() {
        let mut reports: Vec<Vec<ScoreReport>> = Vec::with_capacity(cfg.replicates);
        for rep in 0..cfg.replicates {
            let mut gen_rng =
                rng::derive_named(cfg.seed, &format!("gen/{}/{rep}", spec.label));
            let (train, test) = generate_scenario(&spec, &mut gen_rng)?;
            let mut row: Vec<ScoreReport> = Vec::with_capacity(4);
            for kernel in [KernelModel::Exponential, KernelModel::DpMixture] {
                let fit_seed =
                    sub_seed(cfg.seed, &format!("fit/{}/{rep}/{kernel:?}", spec.label));
                let draws = fit_hawkes(&train, kernel, &cfg.priors, &cfg.chain, fit_seed)?;
                let reps_draws =
                    select_representatives(&draws, cfg.chain.representative_draws);
                for marks in [MarkModel::Iid, MarkModel::Hierarchical] {
                    let variant = ModelVariant { kernel, marks };
                    let mut mark_rng = rng::derive_named(
                        cfg.seed,
                        &format!("marks/{}/{rep}/{}", spec.label, variant.label()),
                    );
                    let mark_fit = fit_marks_hierarchical(
                        &train, &reps_draws, marks, &cfg.priors, &cfg.chain, &mut mark_rng,
                    )?;
                    let mut score_rng = rng::derive_named(
                        cfg.seed,
                        &format!("score/{}/{rep}/{}", spec.label, variant.label()),
                    );
                    row.push(score_model(
                        variant.label(),
                        &train,
                        &test,
                        &draws,
                        &mark_fit,
                        &cfg.chain,
                        &mut score_rng,
                    )?);
                }
            }
            // row order: exp_iid (baseline), exp_hier, dp_iid, dp_hier
            reports.push(row);
        }
        let deltas = compute_deltas(&reports);
        scenarios.push(ScenarioResult {
            scenario: spec.label.clone(),
            replicates: cfg.replicates,
            reports,
            deltas,
        });
    }
    Ok(StudyResult { seed: cfg.seed, replicates: cfg.replicates, scenarios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_four_truths() {
        let grid = ScenarioSpec::default_grid();
        let labels: Vec<&str> = grid.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, vec!["exp_iid", "exp_hier", "mix_iid", "mix_hier"]);
        assert!(grid.iter().all(|s| s.mu == 0.10 && s.kappa == 0.55 && s.t_end == 1000.0));
    }

    #[test]
    fn generate_scenario_split_and_reproducibility() {
        for spec in ScenarioSpec::default_grid() {
            let (train, test) = generate_scenario(&spec, &mut rng::derive(61, 0)).unwrap();
            let (train2, test2) = generate_scenario(&spec, &mut rng::derive(61, 0)).unwrap();
            assert_eq!(train, train2);
            assert_eq!(test, test2);
            assert!(train.len() >= 30);
            assert!(test.len() >= 5);
            assert_eq!(train.window_end, 800.0);
            assert_eq!(test.window_end, 1000.0);
            assert!(train.times.iter().all(|&t| t <= 800.0));
            assert!(test.times.iter().all(|&t| t > 800.0 && t <= 1000.0));
            assert!(train.excesses.iter().all(|&y| y > 0.0));
            assert_eq!(train.scale_factor, 1.0);
        }
    }

    #[test]
    fn delta_computation_against_baseline() {
        fn report(model: &str, time: f64, mark: f64) -> ScoreReport {
            ScoreReport {
                model: model.to_string(),
                n_test_events: 10,
                time_logscore: time,
                time_se: 0.0,
                mark_logscore: mark,
                mark_se: 0.0,
                combined_logscore: time + mark,
                n_time_draws: 1,
                n_mark_pairs: 1,
            }
        }
        let reports = vec![
            vec![report("exp_iid", -10.0, -5.0), report("dp_hier", -8.0, -4.0)],
            vec![report("exp_iid", -12.0, -6.0), report("dp_hier", -9.0, -4.0)],
        ];
        let deltas = compute_deltas(&reports);
        assert_eq!(deltas.len(), 1);
        assert_eq!(deltas[0].model, "dp_hier");
        assert!((deltas[0].time.mean - 2.5).abs() < 1e-12);
        assert!((deltas[0].mark.mean - 1.5).abs() < 1e-12);
        assert!((deltas[0].combined.mean - 4.0).abs() < 1e-12);
        assert!(deltas[0].combined.se > 0.0);
    }

    #[test]
    fn mini_study_smoke() {
        // structurally complete end-to-end run at throwaway chain lengths
        let cfg = StudyConfig {
            replicates: 1,
            chain: ChainConfig {
                iterations: 60,
                burn_in: 20,
                chains: 1,
                representative_draws: 4,
                mark_iterations: 40,
                mark_warmup: 20,
                mark_draws_kept: 4,
                score_draws: 20,
                crp_sweeps: 2,
                new_cluster_z_draws: 8,
            },
            priors: PriorConfig::default(),
            seed: 77,
        };
        let result = run_study(&cfg).unwrap();
        assert_eq!(result.scenarios.len(), 4);
        for sc in &result.scenarios {
            assert_eq!(sc.reports.len(), 1);
            let labels: Vec<&str> = sc.reports[0].iter().map(|r| r.model.as_str()).collect();
            assert_eq!(labels, vec!["exp_iid", "exp_hier", "dp_iid", "dp_hier"]);
            assert_eq!(sc.deltas.len(), 3);
            for row in &sc.reports {
                for r in row {
                    assert!(r.combined_logscore.is_finite(), "{}: {:?}", sc.scenario, r);
                }
            }
        }
        // deterministic for a fixed seed
        let again = run_study(&cfg).unwrap();
        assert_eq!(result, again);
    }
}
