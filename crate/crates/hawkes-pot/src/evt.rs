//! Generalised Pareto Distribution primitives and threshold-exceedance
//! extraction.
//!
//! The peaks-over-threshold representation keeps only the observations above a
//! high threshold `u` and models the excesses `y_i = r_i - u` with a GPD:
//!
//! ```text
//! G(z | sigma, xi) = 1 - (1 + xi z / sigma)^(-1/xi)   (xi != 0)
//!                  = 1 - exp(-z / sigma)              (xi == 0)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |xi| the exponential (xi = 0) branch is used to avoid
/// catastrophic cancellation in `log1p(xi*y/sigma)/xi`.
pub const XI_ZERO_TOL: f64 = 1e-8;

/// GPD scale and shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    /// Scale, in units of excess magnitude. Must be positive.
    pub sigma: f64,
    /// Shape, dimensionless. Unrestricted for density evaluation; inference
    /// truncates it below at -0.25.
    pub xi: f64,
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !xi.is_finite() {
            return Err(Error::parameter(format!(
                "GPD requires finite sigma > 0 and finite xi, got sigma={sigma}, xi={xi}"
            )));
        }
        Ok(GpdParams { sigma, xi })
    }

    /// Mean sigma/(1-xi), finite only for xi < 1.
    pub fn mean(&self) -> Option<f64> {
        (self.xi < 1.0).then(|| self.sigma / (1.0 - self.xi))
    }
}

/// Log density of the GPD at excess `y > 0`.
///
/// Returns `-inf` when `1 + xi*y/sigma <= 0` (out of support for xi < 0).
pub fn gpd_logpdf(y: f64, p: &GpdParams) -> Result<f64> {
    let GpdParams { sigma, xi } = *p;
    if !(sigma > 0.0) {
        return Err(Error::parameter(format!("gpd_logpdf: sigma must be > 0, got {sigma}")));
    }
    if y < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if xi.abs() < XI_ZERO_TOL {
        return Ok(-y / sigma - sigma.ln());
    }
    let t = xi * y / sigma;
    if 1.0 + t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(-sigma.ln() - (1.0 / xi + 1.0) * t.ln_1p())
}

/// GPD distribution function G(z | sigma, xi) for `z >= 0`.
///
/// Equals 1 at and above the finite endpoint -sigma/xi when xi < 0.
pub fn gpd_cdf(z: f64, p: &GpdParams) -> Result<f64> {
    let GpdParams { sigma, xi } = *p;
    if !(sigma > 0.0) {
        return Err(Error::parameter(format!("gpd_cdf: sigma must be > 0, got {sigma}")));
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    if xi.abs() < XI_ZERO_TOL {
        return Ok(-(-z / sigma).exp_m1());
    }
    let t = xi * z / sigma;
    if 1.0 + t <= 0.0 {
        // past the upper endpoint when xi < 0
        return Ok(1.0);
    }
    Ok(-(-t.ln_1p() / xi).exp_m1())
}

/// Inverse-CDF draw from the GPD.
pub fn gpd_sample<R: rand::Rng + ?Sized>(p: &GpdParams, rng: &mut R) -> Result<f64> {
    let u: f64 = rng.gen_range(0.0..1.0);
    gpd_quantile(u, p)
}

/// Quantile function: the y with G(y) = u.
pub fn gpd_quantile(u: f64, p: &GpdParams) -> Result<f64> {
    let GpdParams { sigma, xi } = *p;
    if !(sigma > 0.0) {
        return Err(Error::parameter(format!("gpd_quantile: sigma must be > 0, got {sigma}")));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::parameter(format!("gpd_quantile: u must be in [0,1), got {u}")));
    }
    if xi.abs() < XI_ZERO_TOL {
        Ok(-sigma * (1.0 - u).ln())
    } else {
        Ok(sigma / xi * ((1.0 - u).powf(-xi) - 1.0))
    }
}

/// A raw time series before thresholding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    /// Strictly increasing observation times (e.g. days).
    pub timestamps: Vec<f64>,
    /// Mark values r_t, one per timestamp.
    pub values: Vec<f64>,
}

impl RawSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::input(format!(
                "timestamps ({}) and values ({}) differ in length",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input("timestamps must be strictly increasing"));
        }
        if timestamps.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("timestamps and values must be finite"));
        }
        Ok(RawSeries { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Threshold choice for exceedance extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ThresholdSpec {
    /// Threshold at the given upper empirical percentile of the values
    /// (e.g. 95.0).
    UpperPercentile(f64),
    /// Values are negated first, then the upper (100 - q) percentile is
    /// applied; equivalent to keeping the lower tail (e.g. q = 5.0).
    LowerPercentile(f64),
    /// Fixed absolute threshold level.
    Absolute(f64),
}

/// Exceedance times and excess magnitudes on an observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedEventSeries {
    /// Right end T of the observation window (0, T].
    pub window_end: f64,
    /// The threshold u the excesses are measured from.
    pub threshold: f64,
    /// Exceedance times, strictly increasing, in [0, T]. Observed data is
    /// anchored at t = 0, so a first-observation exceedance sits at 0.
    pub times: Vec<f64>,
    /// Excesses y_i = r_i - u, all positive.
    pub excesses: Vec<f64>,
    /// Training-set normalisation c; GPD fitting operates on y/c.
    pub scale_factor: f64,
}

impl MarkedEventSeries {
    pub fn new(window_end: f64, threshold: f64, times: Vec<f64>, excesses: Vec<f64>) -> Result<Self> {
        if !(window_end > 0.0) {
            return Err(Error::input(format!("window_end must be positive, got {window_end}")));
        }
        if times.len() != excesses.len() {
            return Err(Error::input("times and excesses differ in length"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input("event times must be strictly increasing"));
        }
        if times.iter().any(|&t| !(t >= 0.0 && t <= window_end)) {
            return Err(Error::input("event times must lie in [0, window_end]"));
        }
        if excesses.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
            return Err(Error::input("excesses must be positive and finite"));
        }
        Ok(MarkedEventSeries {
            window_end,
            threshold,
            times,
            excesses,
            scale_factor: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Excesses divided by the scale factor.
    pub fn scaled_excesses(&self) -> Vec<f64> {
        self.excesses.iter().map(|y| y / self.scale_factor).collect()
    }
}

/// Linear-interpolation empirical quantile (R type 7) of `values` at
/// probability `q` in [0, 1].
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::parameter(format!("quantile probability must be in [0,1], got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Extract the threshold exceedances of a raw series.
///
/// Ties at the threshold are broken by strict `r_i > u`. The scale factor is
/// left at 1 until [`set_scale_factor`] is applied on training data.
pub fn extract_exceedances(series: &RawSeries, spec: ThresholdSpec) -> Result<MarkedEventSeries> {
    if series.timestamps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("timestamps must be strictly increasing"));
    }
    let (values, threshold): (Vec<f64>, f64) = match spec {
        ThresholdSpec::UpperPercentile(q) => {
            let u = empirical_quantile(&series.values, q / 100.0)?;
            (series.values.clone(), u)
        }
        ThresholdSpec::LowerPercentile(q) => {
            // keep the lower tail by negating: values above the (100-q)th
            // percentile of the negated series
            let negated: Vec<f64> = series.values.iter().map(|v| -v).collect();
            let u = empirical_quantile(&negated, 1.0 - q / 100.0)?;
            (negated, u)
        }
        ThresholdSpec::Absolute(u) => (series.values.clone(), u),
    };
    let mut times = Vec::new();
    let mut excesses = Vec::new();
    for (t, r) in series.timestamps.iter().zip(values.iter()) {
        if *r > threshold {
            times.push(*t);
            excesses.push(r - threshold);
        }
    }
    let window_end = series
        .timestamps
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(times.last().copied().unwrap_or(0.0))
        .max(f64::MIN_POSITIVE);
    // an empty exceedance set is a valid (empty) series
    if times.is_empty() {
        return Ok(MarkedEventSeries {
            window_end,
            threshold,
            times,
            excesses,
            scale_factor: 1.0,
        });
    }
    MarkedEventSeries::new(window_end, threshold, times, excesses)
}

/// How the training-set scale factor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ScalePolicy {
    /// Median positive training excess, falling back to the mean if the
    /// median is degenerate.
    MedianExcess,
    /// Mean positive training excess.
    MeanExcess,
    /// Explicit scale.
    Explicit(f64),
}

/// Record the training-set scale factor c on a series.
///
/// Downstream GPD fitting operates on y/c; densities reported on the original
/// scale include a -log c Jacobian per event.
pub fn set_scale_factor(series: &MarkedEventSeries, policy: ScalePolicy) -> Result<MarkedEventSeries> {
    let c = match policy {
        ScalePolicy::MedianExcess => {
            if series.excesses.is_empty() {
                return Err(Error::input("cannot compute a scale factor from no excesses"));
            }
            let median = empirical_quantile(&series.excesses, 0.5)?;
            if median > 0.0 && median.is_finite() {
                median
            } else {
                let mean = series.excesses.iter().sum::<f64>() / series.excesses.len() as f64;
                if !(mean > 0.0 && mean.is_finite()) {
                    return Err(Error::numerical("no valid positive training excess scale"));
                }
                mean
            }
        }
        ScalePolicy::MeanExcess => {
            if series.excesses.is_empty() {
                return Err(Error::input("cannot compute a scale factor from no excesses"));
            }
            let mean = series.excesses.iter().sum::<f64>() / series.excesses.len() as f64;
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(Error::numerical("mean training excess is not a valid scale"));
            }
            mean
        }
        ScalePolicy::Explicit(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::parameter(format!("explicit scale factor must be positive, got {c}")));
            }
            c
        }
    };
    let mut out = series.clone();
    out.scale_factor = c;
    Ok(out)
}
