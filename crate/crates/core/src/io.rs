//! JSON matrix format: `{"d": 3, "entries": [["1", "-0.6", "0.4"], ...]}`.
//!
//! Entries may be strings (`"p/q"`, decimals, scientific) or JSON numbers; both are
//! parsed from their literal text, so `0.4` becomes exactly `2/5` on the rational
//! backend.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{CovarianceMatrix, SymMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub d: usize,
    pub entries: Vec<Vec<Value>>,
}

impl MatrixJson {
    pub fn parse_sym<T: Scalar>(&self) -> Result<SymMatrix<T>> {
        if self.entries.len() != self.d {
            return Err(Error::Structural(format!(
                "\"d\" is {} but \"entries\" has {} rows",
                self.d,
                self.entries.len()
            )));
        }
        let rows = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        parse_value::<T>(v).map_err(|e| {
                            Error::Structural(format!("entry ({}, {}): {e}", i + 1, j + 1))
                        })
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SymMatrix::from_rows(rows)
    }

    /// Entries written as decimals or JSON numbers rather than integers or `p/q`.
    pub fn decimal_entries(&self) -> usize {
        self.entries
            .iter()
            .flatten()
            .filter(|v| match v {
                Value::String(s) => s.contains(['.', 'e', 'E']),
                Value::Number(n) => !n.is_i64() && !n.is_u64(),
                _ => false,
            })
            .count()
    }

    pub fn from_sym<T: Scalar>(m: &SymMatrix<T>) -> Self {
        MatrixJson {
            d: m.dim(),
            entries: m
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|x| Value::String(x.render())).collect())
                .collect(),
        }
    }
}

fn parse_value<T: Scalar>(v: &Value) -> Result<T> {
    match v {
        Value::String(s) => T::parse(s),
        Value::Number(n) => T::parse(&n.to_string()),
        other => Err(Error::Parse(other.to_string())),
    }
}

/// Accepts the `{"d", "entries"}` object or a bare array of rows.
pub fn parse_matrix_json(json: &str) -> Result<MatrixJson> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Input {
        Object(MatrixJson),
        Rows(Vec<Vec<Value>>),
    }
    match serde_json::from_str(json)? {
        Input::Object(m) => Ok(m),
        Input::Rows(entries) => Ok(MatrixJson { d: entries.len(), entries }),
    }
}

pub fn parse_sym_matrix<T: Scalar>(json: &str) -> Result<SymMatrix<T>> {
    parse_matrix_json(json)?.parse_sym()
}

pub fn parse_covariance<T: Scalar>(json: &str) -> Result<CovarianceMatrix<T>> {
    CovarianceMatrix::new(parse_sym_matrix(json)?)
}

pub fn render_matrix<T: Scalar>(m: &SymMatrix<T>) -> Value {
    serde_json::to_value(MatrixJson::from_sym(m)).expect("matrix json")
}
