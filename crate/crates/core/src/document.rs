//! Model files: TOML (or JSON) documents describing one polling model.
//!
//! ```toml
//! n = 2
//! p = [[0, 1], [1, 0]]
//! p_tilde = [[0.5, 0.5], [0.5, 0.5]]
//! lambda = [0.1, 0.2]
//! tau = [1, 1]
//! tau_tilde = [0.5, 0.5]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchMoments, PollingModel, Violation};
use crate::waiting::ServiceMoments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n: usize,
    pub p: Vec<Vec<f64>>,
    pub p_tilde: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_tilde: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_tilde2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchMoments>,
    /// Switchover and service moments, used by the waiting-time special cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServiceMoments>,
}

impl ModelDocument {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("documents always serialize")
    }

    pub fn from_model(m: &PollingModel) -> Self {
        let rows = |x: &nalgebra::DMatrix<f64>| {
            (0..x.nrows())
                .map(|i| x.row(i).iter().copied().collect())
                .collect()
        };
        ModelDocument {
            n: m.n(),
            p: rows(&m.p),
            p_tilde: rows(&m.p_tilde),
            lambda: m.lambda.clone(),
            tau: m.tau.clone(),
            tau_tilde: m.tau_tilde.clone(),
            tau2: m.tau2.clone(),
            tau_tilde2: m.tau_tilde2.clone(),
            batch: m.batch,
            service: None,
        }
    }

    /// Builds the model. Shape problems are reported here; value invariants
    /// are checked by the analyses themselves.
    pub fn to_model(&self) -> Result<PollingModel> {
        let mut bad = Vec::new();
        let mut len = |name: &str, got: usize| {
            if got != self.n {
                bad.push(Violation {
                    path: name.into(),
                    message: format!("has {got} entries but n = {}", self.n),
                    defect: got.abs_diff(self.n) as f64,
                });
            }
        };
        len("p", self.p.len());
        len("p_tilde", self.p_tilde.len());
        len("lambda", self.lambda.len());
        len("tau", self.tau.len());
        len("tau_tilde", self.tau_tilde.len());
        if let Some(v) = &self.tau2 {
            len("tau2", v.len());
        }
        if let Some(v) = &self.tau_tilde2 {
            len("tau_tilde2", v.len());
        }
        for (name, mat) in [("p", &self.p), ("p_tilde", &self.p_tilde)] {
            for (i, row) in mat.iter().enumerate() {
                if row.len() != self.n {
                    bad.push(Violation {
                        path: format!("{name}[{}]", i + 1),
                        message: format!("row has {} entries but n = {}", row.len(), self.n),
                        defect: row.len().abs_diff(self.n) as f64,
                    });
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::InvalidModel(bad));
        }
        let mut m = PollingModel::new(
            self.p.clone(),
            self.p_tilde.clone(),
            self.lambda.clone(),
            self.tau.clone(),
            self.tau_tilde.clone(),
        );
        m.tau2 = self.tau2.clone();
        m.tau_tilde2 = self.tau_tilde2.clone();
        m.batch = self.batch;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAXICAB: &str = r#"
n = 2
p = [[0, 1], [1, 0]]
p_tilde = [[0.5, 0.5], [0.5, 0.5]]
lambda = [0.1, 0.2]
tau = [1, 1]
tau_tilde = [0.5, 0.5]
"#;

    #[test]
    fn parses_minimal_document() {
        let d = ModelDocument::from_toml_str(TAXICAB).unwrap();
        let m = d.to_model().unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.p_tilde[(1, 0)], 0.5);
        assert!(m.tau2.is_none());
    }

    #[test]
    fn toml_round_trip() {
        let mut d = ModelDocument::from_toml_str(TAXICAB).unwrap();
        d.batch = Some(BatchMoments {
            mean: 2.0,
            second_moment: 6.0,
        });
        d.service = Some(ServiceMoments {
            w: 0.5,
            w2: 0.25,
            sigma: 1.0,
            sigma2: 1.0,
        });
        let back = ModelDocument::from_toml_str(&d.to_toml_string()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn json_is_accepted() {
        let d = ModelDocument::from_json_str(
            r#"{"n":2,"p":[[0,1],[1,0]],"p_tilde":[[0,1],[1,0]],"lambda":[0.1,0.1],"tau":[1,1],"tau_tilde":[1,1]}"#,
        )
        .unwrap();
        assert_eq!(d.to_model().unwrap().n(), 2);
    }

    #[test]
    fn unknown_keys_and_bad_shapes_are_rejected() {
        let err = ModelDocument::from_toml_str(&format!("{TAXICAB}\nmu = 1")).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));

        let d = ModelDocument::from_toml_str(&TAXICAB.replace("lambda = [0.1, 0.2]", "lambda = [0.1]")).unwrap();
        let err = d.to_model().unwrap_err();
        assert!(err.to_string().contains("lambda"));
        assert!(err.is_input_error());
    }
}
