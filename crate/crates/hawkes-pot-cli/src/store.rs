//! DrawStore: append-only on-disk persistence of a fitted model.
//!
//! Layout of a store directory:
//! - `config.toml` — the resolved run configuration
//! - `meta.json` — run metadata (config hash, seed, model, timestamps)
//! - `train.json` / `test.json` — the prepared event series
//! - `draws.ndjson` — one PosteriorDraw per line
//! - `marks.ndjson` — one MarkBranchFit per line
//! - `run.log` — append-only run log
//!
//! Records are never rewritten; a reader only opens completed stores (those
//! with `meta.json` present, written last).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hawkes_pot::mcmc::{FittedModel, MarkFit, ModelVariant, PosteriorDraw};
use hawkes_pot::MarkedEventSeries;

use crate::config::RunConfig;
use crate::errors::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    /// SHA-256 of the resolved config text.
    pub config_hash: String,
    pub seed: u64,
    pub variant: ModelVariant,
    pub created: String,
    pub n_draws: usize,
    pub n_mark_fits: usize,
    /// Train-only threshold on the (possibly negated) value scale.
    pub threshold: f64,
    pub split_at: f64,
    pub scale_factor: f64,
}

/// Everything needed to predict or score from a completed store.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStore {
    pub meta: StoreMeta,
    pub config_text: String,
    pub train: MarkedEventSeries,
    pub test: MarkedEventSeries,
    pub model: FittedModel,
}

pub fn config_hash(config_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Serialise the resolved configuration deterministically.
pub fn resolved_config_text(config: &RunConfig) -> Result<String> {
    toml::to_string_pretty(config)
        .map_err(|e| CliError::usage(format!("cannot serialise config: {e}")))
}

/// Write a completed store. `meta.json` is written last so its presence
/// marks the store as complete.
pub fn write_store(
    dir: &Path,
    config: &RunConfig,
    train: &MarkedEventSeries,
    test: &MarkedEventSeries,
    model: &FittedModel,
    split_at: f64,
) -> Result<StoreMeta> {
    fs::create_dir_all(dir)?;
    let config_text = resolved_config_text(config)?;
    fs::write(dir.join("config.toml"), &config_text)?;
    fs::write(dir.join("train.json"), serde_json::to_string(train)?)?;
    fs::write(dir.join("test.json"), serde_json::to_string(test)?)?;

    let mut draws_file = fs::File::create(dir.join("draws.ndjson"))?;
    for draw in &model.draws {
        serde_json::to_writer(&mut draws_file, draw)?;
        draws_file.write_all(b"\n")?;
    }
    let mut marks_file = fs::File::create(dir.join("marks.ndjson"))?;
    for fit in &model.mark_fit.fits {
        serde_json::to_writer(&mut marks_file, fit)?;
        marks_file.write_all(b"\n")?;
    }

    let meta = StoreMeta {
        config_hash: config_hash(&config_text),
        seed: config.seed,
        variant: model.variant,
        created: chrono::Utc::now().to_rfc3339(),
        n_draws: model.draws.len(),
        n_mark_fits: model.mark_fit.fits.len(),
        threshold: train.threshold,
        split_at,
        scale_factor: train.scale_factor,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::data(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

/// Load a completed store, verifying the config hash.
pub fn load_store(dir: &Path) -> Result<LoadedStore> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(CliError::data(format!(
            "{} is not a completed draw store (missing meta.json)",
            dir.display()
        )));
    }
    let meta: StoreMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    let config_text = fs::read_to_string(dir.join("config.toml"))?;
    if config_hash(&config_text) != meta.config_hash {
        return Err(CliError::data(format!(
            "{}: stored config does not match its recorded hash",
            dir.display()
        )));
    }
    let train: MarkedEventSeries = serde_json::from_str(&fs::read_to_string(dir.join("train.json"))?)?;
    let test: MarkedEventSeries = serde_json::from_str(&fs::read_to_string(dir.join("test.json"))?)?;
    let draws: Vec<PosteriorDraw> = read_ndjson(&dir.join("draws.ndjson"))?;
    let fits = read_ndjson(&dir.join("marks.ndjson"))?;
    if draws.len() != meta.n_draws || fits.len() != meta.n_mark_fits {
        return Err(CliError::data(format!("{}: truncated draw store", dir.display())));
    }
    let model = FittedModel {
        variant: meta.variant,
        draws,
        mark_fit: MarkFit { mark_model: meta.variant.marks, fits },
    };
    Ok(LoadedStore { meta, config_text, train, test, model })
}

/// Append a timestamped line to the store's run log.
pub fn log_line(dir: &Path, message: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("run.log"))?;
    writeln!(f, "{} {message}", chrono::Utc::now().to_rfc3339())?;
    Ok(())
}

/// The store directory for a model variant under the run's output directory.
pub fn store_dir(output_dir: &str, variant: ModelVariant) -> PathBuf {
    Path::new(output_dir).join(format!("store_{}", variant.label()))
}
