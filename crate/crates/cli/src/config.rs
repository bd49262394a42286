//! Sweep configuration files.
//!
//! ```toml
//! structure = "binary.toml"        # relative to this file
//! # or: binary_symmetric = 0.7
//! procedure = "pmba_binary"
//! correlation = "iid"              # or "block:25"
//! population_sizes = [100, 1000, 10000]
//! trials = 1000
//! seed = 7
//! # true_state = "w1"              # default: drawn from the prior per trial
//! # misspec_half_width = 0.02
//! # output = "sweep.csv"
//! # format = "csv"
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use crowdmean::aggregate::Procedure;
use crowdmean::structure_file::load_structure;
use crowdmean::{CorrelationSpec, Error, InfoStructure, Result};
use serde::Deserialize;
use toml::Spanned;

use crate::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum StructureSource {
    File(PathBuf),
    BinarySymmetric(f64),
}

impl StructureSource {
    pub fn load(&self) -> Result<InfoStructure> {
        match self {
            StructureSource::File(path) => load_structure(path),
            StructureSource::BinarySymmetric(a) => InfoStructure::binary_symmetric(*a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub structure: StructureSource,
    pub procedure: Procedure,
    pub correlation: CorrelationSpec,
    pub population_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Fixed true state label; `None` draws it from the prior each trial.
    pub true_state: Option<String>,
    pub misspec_half_width: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    structure: Option<Spanned<String>>,
    binary_symmetric: Option<Spanned<f64>>,
    procedure: Spanned<String>,
    correlation: Option<Spanned<String>>,
    population_sizes: Spanned<Vec<Spanned<i64>>>,
    trials: Spanned<i64>,
    #[serde(default)]
    seed: u64,
    true_state: Option<Spanned<String>>,
    misspec_half_width: Option<Spanned<f64>>,
    output: Option<String>,
    format: Option<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn at<T>(text: &str, span: Range<usize>, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line: Some(line_of(text, span.start)),
        message: message.into(),
    })
}

pub fn parse_correlation(s: &str) -> Option<CorrelationSpec> {
    match s.trim() {
        "iid" => Some(CorrelationSpec::Iid),
        other => {
            let size = other.strip_prefix("block:")?.trim().parse().ok()?;
            (size > 0).then_some(CorrelationSpec::Block { block_size: size })
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document. Relative structure paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;

        let structure = match (raw.structure, raw.binary_symmetric) {
            (Some(p), None) => StructureSource::File(base_dir.join(p.get_ref())),
            (None, Some(a)) => {
                let acc = *a.get_ref();
                if !(acc > 0.5 && acc < 1.0) {
                    return at(text, a.span(), format!("binary_symmetric accuracy {acc} outside (0.5, 1)"));
                }
                StructureSource::BinarySymmetric(acc)
            }
            (Some(p), Some(_)) => return at(text, p.span(), "give either `structure` or `binary_symmetric`, not both"),
            (None, None) => {
                return Err(Error::Parse {
                    line: None,
                    message: "missing `structure` or `binary_symmetric`".into(),
                })
            }
        };

        let procedure = Procedure::from_name(raw.procedure.get_ref())
            .map_or_else(|| at(text, raw.procedure.span(), format!("unknown procedure `{}`", raw.procedure.get_ref())), Ok)?;

        let correlation = match &raw.correlation {
            None => CorrelationSpec::Iid,
            Some(c) => parse_correlation(c.get_ref()).map_or_else(
                || at(text, c.span(), format!("correlation `{}` is not `iid` or `block:<size>`", c.get_ref())),
                Ok,
            )?,
        };

        if raw.population_sizes.get_ref().is_empty() {
            return at(text, raw.population_sizes.span(), "population_sizes is empty");
        }
        let mut population_sizes = Vec::new();
        for n in raw.population_sizes.get_ref() {
            if *n.get_ref() < 1 {
                return at(text, n.span(), format!("population size {} must be positive", n.get_ref()));
            }
            population_sizes.push(*n.get_ref() as usize);
        }

        let trials = *raw.trials.get_ref();
        if trials < 1 {
            return at(text, raw.trials.span(), format!("trials = {trials}: need at least one trial"));
        }

        let misspec_half_width = match &raw.misspec_half_width {
            None => 0.0,
            Some(h) if *h.get_ref() >= 0.0 && h.get_ref().is_finite() => *h.get_ref(),
            Some(h) => return at(text, h.span(), format!("misspec_half_width {} must be nonnegative", h.get_ref())),
        };

        let format = match &raw.format {
            None => Format::Csv,
            Some(f) => Format::from_name(f.get_ref())
                .map_or_else(|| at(text, f.span(), format!("unknown format `{}`", f.get_ref())), Ok)?,
        };

        Ok(Self {
            structure,
            procedure,
            correlation,
            population_sizes,
            trials: trials as usize,
            seed: raw.seed,
            true_state: raw.true_state.map(Spanned::into_inner),
            misspec_half_width,
            output: raw.output.map(|o| base_dir.join(o)),
            format,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Replaces the trial count, as from a command-line override.
    pub fn with_trials(mut self, trials: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidInput("--trials must be at least 1".into()));
        }
        self.trials = trials;
        Ok(self)
    }
}
