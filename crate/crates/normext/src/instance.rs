//! Versioned on-disk instance format.
//!
//! One JSON document describes an instance: a list of blocks (interval plus
//! the `A` and `W` matrices), an optional growth model for the untruncated
//! family, and optional tolerance overrides. Complex entries are always
//! `[re, im]` pairs, matrices are row-major nested arrays, so the format is
//! trivially parseable from any language.
//!
//! ```json
//! {
//!   "version": "1",
//!   "blocks": [
//!     { "interval": [0.0, 1.0], "A": [[[1.0, 0.0]]], "W": [[[1.0, 0.0]]] }
//!   ],
//!   "growth_model": {
//!     "lambda1": { "kind": "constant", "value": 1.0 },
//!     "dims": { "kind": "constant", "value": 1.0 },
//!     "scalar_blocks": true,
//!     "min_length": 1.0
//!   },
//!   "tolerances": { "validation": 1e-10 }
//! }
//! ```
//!
//! Parsing is not fail-fast: every structural problem, every interval
//! ordering violation, and every invalid block is collected before an error
//! is returned.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extension::{validate_block, ValidationReport};
use crate::hilbert::{Block, ComplexMatrix, Instance, Interval};
use crate::schatten::GrowthModel;
use crate::tol::Tolerances;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: String,
    pub blocks: Vec<BlockFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_model: Option<GrowthModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockFile {
    pub interval: [f64; 2],
    #[serde(rename = "A")]
    pub coeff: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "W")]
    pub coupling: Vec<Vec<[f64; 2]>>,
}

/// Per-run overrides of the base tolerance profile; absent fields keep the
/// profile value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_set: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram_offdiag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            validation: self.validation.unwrap_or(base.validation),
            cluster_rel: self.cluster_rel.unwrap_or(base.cluster_rel),
            residual: self.residual.unwrap_or(base.residual),
            oracle_set: self.oracle_set.unwrap_or(base.oracle_set),
            char_residual: self.char_residual.unwrap_or(base.char_residual),
            gram_offdiag: self.gram_offdiag.unwrap_or(base.gram_offdiag),
            boundary: self.boundary.unwrap_or(base.boundary),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        match key {
            "validation" => self.validation = Some(value),
            "cluster_rel" => self.cluster_rel = Some(value),
            "residual" => self.residual = Some(value),
            "oracle_set" => self.oracle_set = Some(value),
            "char_residual" => self.char_residual = Some(value),
            "gram_offdiag" => self.gram_offdiag = Some(value),
            "boundary" => self.boundary = Some(value),
            other => return Err(format!("unknown tolerance key `{other}`")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockValidation {
    pub block_index: usize,
    pub report: ValidationReport,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file: {}", problems.join("; "))]
    Parse { problems: Vec<String> },
    #[error("interval ordering violated: {}", problems.join("; "))]
    Order { problems: Vec<String> },
    #[error("{} block(s) failed validation", reports.len())]
    Validation { reports: Vec<BlockValidation> },
}

/// A parsed, validated instance plus the run configuration it carries.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub growth_model: Option<GrowthModel>,
    pub tolerances: Tolerances,
}

fn matrix_from_file(
    rows: &[Vec<[f64; 2]>],
    what: &str,
    block: usize,
    problems: &mut Vec<String>,
) -> Option<ComplexMatrix> {
    let dim = rows.len();
    if dim == 0 {
        problems.push(format!("block {block}: {what} is empty"));
        return None;
    }
    if rows.iter().any(|r| r.len() != dim) {
        problems.push(format!("block {block}: {what} is not square"));
        return None;
    }
    let data: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    if data
        .iter()
        .flatten()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        problems.push(format!("block {block}: {what} has non-finite entries"));
        return None;
    }
    ComplexMatrix::from_rows(data).ok()
}

/// Blocks plus configuration, before the hypothesis validation step. Used
/// by callers that need per-block reports for *all* blocks (the `validate`
/// command); everything else goes through [`realize`].
#[derive(Debug, Clone)]
pub struct LoadedBlocks {
    pub blocks: Vec<Block>,
    pub growth_model: Option<GrowthModel>,
    pub tolerances: Tolerances,
}

/// Structural parsing and interval ordering only; collects every violation.
/// Tolerance precedence: `cli_overrides` > file `tolerances` > `base_tol`.
pub fn load_blocks(
    file: &InstanceFile,
    base_tol: Tolerances,
    cli_overrides: Option<&ToleranceOverrides>,
) -> Result<LoadedBlocks, InstanceError> {
    let mut problems = Vec::new();
    if file.version != FORMAT_VERSION {
        problems.push(format!(
            "unsupported format version `{}` (expected `{FORMAT_VERSION}`)",
            file.version
        ));
    }
    if file.blocks.is_empty() {
        problems.push("no blocks".into());
    }

    let mut blocks = Vec::with_capacity(file.blocks.len());
    for (i, bf) in file.blocks.iter().enumerate() {
        let idx = i + 1;
        let interval = match Interval::new(bf.interval[0], bf.interval[1]) {
            Ok(iv) => Some(iv),
            Err(_) => {
                problems.push(format!(
                    "block {idx}: interval [{}, {}] is not a finite nonempty interval",
                    bf.interval[0], bf.interval[1]
                ));
                None
            }
        };
        let coeff = matrix_from_file(&bf.coeff, "A", idx, &mut problems);
        let coupling = matrix_from_file(&bf.coupling, "W", idx, &mut problems);
        if let (Some(iv), Some(a), Some(w)) = (interval, coeff, coupling) {
            if a.dim() != w.dim() {
                problems.push(format!(
                    "block {idx}: A is {}x{} but W is {}x{}",
                    a.dim(),
                    a.dim(),
                    w.dim(),
                    w.dim()
                ));
            } else {
                blocks.push(Block::new(iv, a, w).expect("dims checked"));
            }
        }
    }

    if let Some(model) = &file.growth_model {
        for n in 1..=32usize {
            match model.lambda1.value(n) {
                Some(v) if v >= 1.0 - 1e-12 => {}
                Some(v) => {
                    problems.push(format!("growth_model: lambda1({n}) = {v} < 1"));
                    break;
                }
                None => break,
            }
        }
        for n in 1..=32usize {
            match model.dims.value(n) {
                Some(v) if v >= 1.0 => {}
                Some(v) => {
                    problems.push(format!("growth_model: dims({n}) = {v} < 1"));
                    break;
                }
                None => break,
            }
        }
        if let Some(l) = model.min_length {
            if l <= 0.0 || !l.is_finite() {
                problems.push(format!("growth_model: min_length = {l} must be positive"));
            }
        }
    }

    if !problems.is_empty() {
        return Err(InstanceError::Parse { problems });
    }

    let mut order_problems = Vec::new();
    for i in 0..blocks.len().saturating_sub(1) {
        let b_end = blocks[i].interval().b();
        let a_next = blocks[i + 1].interval().a();
        if b_end >= a_next {
            order_problems.push(format!(
                "block {} ends at {b_end} but block {} starts at {a_next}",
                i + 1,
                i + 2
            ));
        }
    }
    if !order_problems.is_empty() {
        return Err(InstanceError::Order {
            problems: order_problems,
        });
    }

    let mut tolerances = file
        .tolerances
        .as_ref()
        .map(|o| o.apply(base_tol))
        .unwrap_or(base_tol);
    if let Some(cli) = cli_overrides {
        tolerances = cli.apply(tolerances);
    }

    Ok(LoadedBlocks {
        blocks,
        growth_model: file.growth_model.clone(),
        tolerances,
    })
}

/// Per-block hypothesis reports at the loaded tolerances, for every block.
pub fn validate_all(loaded: &LoadedBlocks) -> Vec<BlockValidation> {
    loaded
        .blocks
        .iter()
        .enumerate()
        .map(|(i, block)| BlockValidation {
            block_index: i + 1,
            report: validate_block(block, &loaded.tolerances),
        })
        .collect()
}

/// Builds the validated in-memory model from a deserialized file,
/// collecting every violation.
pub fn realize(
    file: &InstanceFile,
    base_tol: Tolerances,
    cli_overrides: Option<&ToleranceOverrides>,
) -> Result<LoadedInstance, InstanceError> {
    let loaded = load_blocks(file, base_tol, cli_overrides)?;
    let invalid: Vec<BlockValidation> = validate_all(&loaded)
        .into_iter()
        .filter(|v| !v.report.is_valid())
        .collect();
    if !invalid.is_empty() {
        return Err(InstanceError::Validation { reports: invalid });
    }
    let instance =
        Instance::new(loaded.blocks).expect("emptiness and ordering already checked");
    Ok(LoadedInstance {
        instance,
        growth_model: loaded.growth_model,
        tolerances: loaded.tolerances,
    })
}

pub fn read_file(path: &std::path::Path) -> Result<InstanceFile, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| InstanceError::Parse {
        problems: vec![e.to_string()],
    })
}

pub fn parse_instance_str(
    text: &str,
    base_tol: Tolerances,
) -> Result<LoadedInstance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
        problems: vec![e.to_string()],
    })?;
    realize(&file, base_tol, None)
}

pub fn parse_instance(
    path: &std::path::Path,
    base_tol: Tolerances,
) -> Result<LoadedInstance, InstanceError> {
    let file = read_file(path)?;
    realize(&file, base_tol, None)
}

/// Canonical file representation of an in-memory instance.
pub fn to_file(instance: &Instance, growth_model: Option<&GrowthModel>) -> InstanceFile {
    let complexify = |m: &ComplexMatrix| -> Vec<Vec<[f64; 2]>> {
        m.rows()
            .into_iter()
            .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
            .collect()
    };
    InstanceFile {
        version: FORMAT_VERSION.to_string(),
        blocks: instance
            .blocks()
            .iter()
            .map(|b| BlockFile {
                interval: [b.interval().a(), b.interval().b()],
                coeff: complexify(b.coeff()),
                coupling: complexify(b.coupling()),
            })
            .collect(),
        growth_model: growth_model.cloned(),
        tolerances: None,
    }
}

/// Canonical compact JSON; the digest in reports hashes exactly this.
pub fn canonical_json(file: &InstanceFile) -> String {
    serde_json::to_string(file).expect("instance files always serialize")
}
