use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IntervalBox, LinearConstraint, VerificationProblem};
use crate::{Error, Network, Result, FORMAT_TAG};

/// Risk constraints for "class `target` wins": `y_t - y_j >= 0` for every other
/// class `j`. Ties count as risk.
pub fn argmax_risk(classes: usize, target: usize) -> Result<Vec<LinearConstraint>> {
    if target >= classes {
        return Err(Error::LabelOutOfRange { label: target, classes });
    }
    (0..classes)
        .filter(|&j| j != target)
        .map(|j| {
            let mut c = vec![0.0; classes];
            c[target] = 1.0;
            c[j] = -1.0;
            LinearConstraint::ge(c, 0.0)
        })
        .collect()
}

/// On-disk verification problem.
///
/// The risk region is one of: `risk` (a single conjunction), `risk_cases`
/// (a disjunction of conjunctions, verified case by case) or `risk_argmax`
/// (the argmax lands in any of the listed classes).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format: String,
    /// Path of the model file, relative to the problem file.
    pub model: PathBuf,
    pub input_box: (Vec<f64>, Vec<f64>),
    #[serde(default)]
    pub input_constraints: Vec<LinearConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<Vec<LinearConstraint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_cases: Option<Vec<Vec<LinearConstraint>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_argmax: Option<Vec<usize>>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| Error::MalformedInput(format!("problem file: {e}")))?;
        if f.format != FORMAT_TAG {
            return Err(Error::MalformedInput(format!(
                "problem file: unsupported format {:?}",
                f.format
            )));
        }
        let given = [f.risk.is_some(), f.risk_cases.is_some(), f.risk_argmax.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Error::MalformedInput(
                "problem file: give exactly one of risk, risk_cases, risk_argmax".into(),
            ));
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn model_path(&self, problem_path: &Path) -> PathBuf {
        match problem_path.parent() {
            Some(dir) if self.model.is_relative() => dir.join(&self.model),
            _ => self.model.clone(),
        }
    }

    /// One problem per risk case, all sharing `net`.
    pub fn instantiate(&self, net: &Network) -> Result<Vec<VerificationProblem>> {
        let input_box = IntervalBox::new(self.input_box.0.clone(), self.input_box.1.clone())?;
        let cases: Vec<Vec<LinearConstraint>> = if let Some(r) = &self.risk {
            vec![r.clone()]
        } else if let Some(cases) = &self.risk_cases {
            cases.clone()
        } else {
            self.risk_argmax
                .iter()
                .flatten()
                .map(|&t| argmax_risk(net.output_dim(), t))
                .collect::<Result<_>>()?
        };
        if cases.is_empty() {
            return Err(Error::MalformedInput("problem file: no risk cases".into()));
        }
        cases
            .into_iter()
            .map(|risk| VerificationProblem::new(net.clone(), input_box.clone(), self.input_constraints.clone(), risk))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Affine, Layer};

    #[test]
    fn argmax_encoding() {
        let r = argmax_risk(3, 1).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].coeffs(), &[-1.0, 1.0, 0.0]);
        assert!(r.iter().all(|c| c.is_satisfied(&[0.5, 0.5, 0.1])));
        assert!(!r.iter().all(|c| c.is_satisfied(&[0.6, 0.5, 0.1])));
        assert!(argmax_risk(3, 3).is_err());
    }

    #[test]
    fn parses_problem_file() {
        let text = r#"{"format":"depkit/1","model":"net.json","input_box":[[0,0],[1,1]],
            "input_constraints":[{"coeffs":[1,1],"rel":"<=","bound":1}],
            "risk_argmax":[0,1]}"#;
        let f = ProblemFile::from_json(text).unwrap();
        assert_eq!(f.model_path(Path::new("dir/p.json")), PathBuf::from("dir/net.json"));
        let net = Network::new(
            2,
            vec![Layer::Affine(
                Affine::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap(),
            )],
            None,
        )
        .unwrap();
        let ps = f.instantiate(&net).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[1].risk[0].coeffs(), &[-1.0, 1.0]);
    }

    #[test]
    fn rejects_ambiguous_risk() {
        let text = r#"{"format":"depkit/1","model":"m","input_box":[[0],[1]],
            "risk":[],"risk_argmax":[0]}"#;
        assert!(ProblemFile::from_json(text).is_err());
        let text = r#"{"format":"depkit/1","model":"m","input_box":[[0],[1]]}"#;
        assert!(ProblemFile::from_json(text).is_err());
    }
}
