use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

/// A failure that maps to exit code 2.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "code": self.code, "message": self.message } })
    }
}

impl From<thermomaj::Error> for CliError {
    fn from(e: thermomaj::Error) -> Self {
        use thermomaj::Error as E;
        let code = match &e {
            E::DimensionMismatch { .. } => "dimension_mismatch",
            E::Empty => "empty_input",
            E::NonFinite { .. } | E::NegativeEntry { .. } | E::NotNormalized { .. } => "invalid_distribution",
            E::ZeroEntry { .. } | E::SupportViolation(_) | E::RankDeficient => "support",
            E::NotStochastic(_) | E::NotDoublyStochastic { .. } | E::NotGibbsPreserving { .. } => "invalid_map",
            E::NotMajorized { .. } | E::NotDMajorized { .. } => "not_majorized",
            E::InvalidParameter { .. } | E::EqualSortedVectors | E::UndefinedFreeEnergy => "invalid_parameter",
            E::EnergyConservation { .. } => "energy_conservation",
            E::LpInfeasible { .. } => "lp_infeasible",
            E::NotHermitian { .. }
            | E::NotPositive { .. }
            | E::BadTrace { .. }
            | E::NotSquare { .. }
            | E::NotTraceNonincreasing { .. } => "invalid_operator",
            E::TooLarge(_) => "too_large",
            E::ReducibleChain => "reducible_chain",
            E::Invalid(_) => "invalid_input",
        };
        CliError::new(code, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// What a subcommand produced: a JSON document and whether the answer was
/// mathematically negative.
pub struct Outcome {
    pub value: Value,
    pub negative: bool,
}

impl Outcome {
    pub fn ok(value: impl Serialize) -> CliResult<Self> {
        Ok(Outcome {
            value: to_value(value)?,
            negative: false,
        })
    }

    pub fn verdict(value: impl Serialize, holds: bool) -> CliResult<Self> {
        Ok(Outcome {
            value: to_value(value)?,
            negative: !holds,
        })
    }
}

fn to_value(v: impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::new("serialization", e.to_string()))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
}

pub fn write_csv<R: Serialize>(path: &PathBuf, header: &[String], rows: impl IntoIterator<Item = R>) -> CliResult<()> {
    let io_err = |e: csv::Error| CliError::new("io", format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}
