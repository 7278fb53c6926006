use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

impl ParamValue {
    /// Numeric view of the value; numeric-looking choices parse too.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(v) => Some(v as f64),
            ParamValue::Real(v) => Some(v),
            ParamValue::Choice(ref c) => c.parse().ok(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Choice(v) => f.write_str(v),
        }
    }
}

/// Named hyperparameter values of one preprocessor or learner.
pub type Params = BTreeMap<String, ParamValue>;

pub(crate) fn get_real(params: &Params, name: &str) -> Result<f64> {
    params
        .get(name)
        .and_then(ParamValue::as_f64)
        .ok_or_else(|| Error::param(name, "missing or not numeric"))
}

pub(crate) fn get_real_or(params: &Params, name: &str, default: f64) -> Result<f64> {
    if params.contains_key(name) {
        get_real(params, name)
    } else {
        Ok(default)
    }
}

pub(crate) fn get_int(params: &Params, name: &str) -> Result<i64> {
    get_real(params, name).map(|v| v.round() as i64)
}

pub(crate) fn get_choice<'a>(params: &'a Params, name: &str) -> Result<&'a str> {
    match params.get(name) {
        Some(ParamValue::Choice(c)) => Ok(c),
        _ => Err(Error::param(name, "missing or not a choice")),
    }
}

/// Formats params as `name=value` pairs, comma separated.
pub fn describe(params: &Params) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}
