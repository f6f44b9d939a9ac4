//! Problem files: a TOML document holding the channel, the decoding metric
//! and optional extras (candidate metrics, input composition, a second
//! channel, a broadcast coupling).
//!
//! ```toml
//! name = "bsc"
//! x = 2
//! y = 2
//! w = [[0.9, 0.1], [0.1, 0.9]]
//! q = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [rho]
//! flipped = [[0.0, 1.0], [1.0, 0.0]]
//! ```
//!
//! Scores may be `-inf`; the metric is then treated as a log-likelihood.

use std::collections::BTreeMap;
use std::path::Path;

use mismatch_core::metric::AdditiveMetric;
use mismatch_core::prob::{BroadcastChannel, ProbVector, StochasticMatrix};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub x: usize,
    pub y: usize,
    /// Second output alphabet; defaults to `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    pub w: Matrix,
    pub q: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Vec<f64>>,
    /// Candidate channel `X -> Z` for tightness checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Matrix>,
    /// Second channel `X -> Z` for relation checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<Matrix>,
    /// Broadcast channel `P(y, z | x)`, indexed `[x][y][z]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Matrix>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rho: BTreeMap<String, Matrix>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Malformed(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Malformed(e.to_string()))
    }

    pub fn nz(&self) -> usize {
        self.z.unwrap_or(self.y)
    }

    /// Checks shapes against the declared alphabet sizes and builds the
    /// typed objects.
    pub fn validate(&self) -> Result<Problem, CliError> {
        let (nx, ny, nz) = (self.x, self.y, self.nz());
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(CliError::Malformed("alphabet sizes must be positive".into()));
        }
        let w = channel("w", &self.w, nx, ny)?;
        let q = metric("q", &self.q, nx, ny)?;
        let mut rhos = Vec::with_capacity(self.rho.len());
        for (name, m) in &self.rho {
            rhos.push((name.clone(), metric(&format!("rho.{name}"), m, nx, nz)?));
        }
        let composition = match &self.composition {
            Some(p) => {
                if p.len() != nx {
                    return Err(CliError::Malformed(format!("composition has {} entries, x = {nx}", p.len())));
                }
                Some(ProbVector::new(p.clone()).map_err(|e| CliError::Malformed(format!("composition: {e}")))?)
            }
            None => None,
        };
        let candidate = self.candidate.as_ref().map(|m| channel("candidate", m, nx, nz)).transpose()?;
        let w2 = self.w2.as_ref().map(|m| channel("w2", m, nx, nz)).transpose()?;
        let coupling = match &self.coupling {
            Some(t) => {
                let shape_ok = t.len() == nx && t.iter().all(|s| s.len() == ny && s.iter().all(|r| r.len() == nz));
                if !shape_ok {
                    return Err(CliError::Malformed(format!("coupling must be {nx}x{ny}x{nz}")));
                }
                Some(
                    BroadcastChannel::from_nested(t.clone())
                        .map_err(|e| CliError::Malformed(format!("coupling: {e}")))?,
                )
            }
            None => None,
        };
        Ok(Problem {
            name: self.name.clone(),
            w,
            q,
            nz,
            rhos,
            composition,
            candidate,
            w2,
            coupling,
        })
    }
}

fn check_shape(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), CliError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Malformed(format!("{what} must be {rows}x{cols}")));
    }
    Ok(())
}

fn channel(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<StochasticMatrix, CliError> {
    check_shape(what, m, rows, cols)?;
    StochasticMatrix::new(m.clone()).map_err(|e| CliError::Malformed(format!("{what}: {e}")))
}

fn metric(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<AdditiveMetric, CliError> {
    check_shape(what, m, rows, cols)?;
    let has_neg_inf = m.iter().flatten().any(|&v| v == f64::NEG_INFINITY);
    let built = if has_neg_inf {
        AdditiveMetric::log_likelihood(m.clone())
    } else {
        AdditiveMetric::new(m.clone())
    };
    built.map_err(|e| CliError::Malformed(format!("{what}: {e}")))
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: Option<String>,
    pub w: StochasticMatrix,
    pub q: AdditiveMetric,
    pub nz: usize,
    pub rhos: Vec<(String, AdditiveMetric)>,
    pub composition: Option<ProbVector>,
    pub candidate: Option<StochasticMatrix>,
    pub w2: Option<StochasticMatrix>,
    pub coupling: Option<BroadcastChannel>,
}

impl Problem {
    /// The named metric, the only one when there is exactly one, or `q`
    /// when the file lists none.
    pub fn rho_or_q(&self, name: Option<&str>) -> Result<(String, AdditiveMetric), CliError> {
        if self.rhos.is_empty() && name.is_none() {
            if self.nz != self.w.outputs() {
                return Err(CliError::Malformed("z differs from y, so a rho table is needed".into()));
            }
            return Ok(("q".into(), self.q.clone()));
        }
        self.rho(name)
    }

    pub fn rho(&self, name: Option<&str>) -> Result<(String, AdditiveMetric), CliError> {
        match name {
            Some(n) => self
                .rhos
                .iter()
                .find(|(k, _)| k == n)
                .cloned()
                .ok_or_else(|| CliError::Malformed(format!("no rho named {n:?}"))),
            None => match self.rhos.as_slice() {
                [only] => Ok(only.clone()),
                [] => Err(CliError::Malformed("the file has no [rho] table".into())),
                _ => Err(CliError::Malformed("several rho metrics; pick one with --rho".into())),
            },
        }
    }

    pub fn composition_or_uniform(&self) -> ProbVector {
        self.composition
            .clone()
            .unwrap_or_else(|| ProbVector::uniform(self.w.inputs()))
    }

    /// The coupling from the file, or the splice `z = y` when the output
    /// alphabets agree.
    pub fn coupling_or_splice(&self) -> Result<BroadcastChannel, CliError> {
        if let Some(c) = &self.coupling {
            return Ok(c.clone());
        }
        if self.nz == self.w.outputs() {
            return Ok(BroadcastChannel::splice(&self.w));
        }
        Err(CliError::Malformed("no coupling given and z differs from y".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
name = "demo"
x = 2
y = 2
z = 3
w = [[0.9, 0.1], [0.2, 0.8]]
q = [[0.0, -inf], [-1.5, 0.25]]
composition = [0.25, 0.75]
candidate = [[0.5, 0.5, 0.0], [0.1, 0.1, 0.8]]

[rho]
a = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
b = [[0.0, 0.0, 1.0], [0.1, 0.2, 0.3]]
"#;

    #[test]
    fn parses_and_validates() {
        let f = ProblemFile::parse(TEXT).unwrap();
        assert_eq!(f.rho.len(), 2);
        let p = f.validate().unwrap();
        assert!(p.q.get(0, 1).is_infinite());
        assert_eq!(p.nz, 3);
        assert!(p.rho(None).is_err());
        assert_eq!(p.rho(Some("b")).unwrap().0, "b");
        assert!(p.coupling_or_splice().is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let f = ProblemFile::parse(TEXT).unwrap();
        let again = ProblemFile::parse(&f.to_toml().unwrap()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn rejects_bad_rows_and_shapes() {
        let bad_sum = TEXT.replace("[0.9, 0.1]", "[0.9, 0.2]");
        assert!(ProblemFile::parse(&bad_sum).unwrap().validate().is_err());
        let bad_shape = TEXT.replace("[0.5, 0.5, 0.0]", "[0.5, 0.5]");
        assert!(ProblemFile::parse(&bad_shape).unwrap().validate().is_err());
        assert!(ProblemFile::parse("x = 2\ny = 2\nw = [[1.0, 0.0], [0.0, 1.0]]\nq = [[1.0]]\nextra = 1").is_err());
    }
}
