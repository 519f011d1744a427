use serde::{Deserialize, Serialize};

use crate::error::{Result, StcError};

/// Which norm regularizes a code vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `weight * ||x||_1` (a plain sum for non-negative codes).
    #[default]
    L1,
    /// `weight * ||x||_2^2`.
    L2,
}

impl Regularizer {
    /// Penalty value for a non-negative vector.
    pub fn penalty(self, weight: f64, x: &[f64]) -> f64 {
        match self {
            Regularizer::L1 => weight * x.iter().sum::<f64>(),
            Regularizer::L2 => weight * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Regularizer::L1),
            "l2" => Ok(Regularizer::L2),
            other => Err(format!("unknown regularizer {other:?}, expected l1 or l2")),
        }
    }
}

/// Every knob of the coder, dictionary learner, SVM sub-solver and trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Document-code regularizer weight.
    pub lambda: f64,
    /// Coupling between word codes and their document code.
    pub gamma: f64,
    /// Word-code regularizer weight.
    pub rho: f64,
    pub theta_reg: Regularizer,
    pub s_reg: Regularizer,
    /// Weight of the hinge risk in the supervised objective.
    pub svm_c: f64,
    /// Margin cost for predicting a wrong class.
    pub cost_ell: f64,
    /// Max rounds of (all word codes, then document code) per document.
    pub inner_sweeps: usize,
    /// Relative objective change that stops the per-document sweeps.
    pub tol_obj: f64,
    /// Max outer alternations of the trainer.
    pub outer_iters: usize,
    /// Relative objective change that stops the trainer.
    pub outer_tol: f64,
    /// Floor applied to reconstructions inside the loss only.
    pub mean_floor: f64,
    /// Projected-gradient steps per dictionary update.
    pub pg_steps: usize,
    /// Initial Armijo step for the dictionary update.
    pub step0: f64,
    pub svm_max_epochs: usize,
    pub svm_tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 0.1,
            gamma: 0.1,
            rho: 0.1,
            theta_reg: Regularizer::L1,
            s_reg: Regularizer::L1,
            svm_c: 1.0,
            cost_ell: 3600.0,
            inner_sweeps: 25,
            tol_obj: 1e-5,
            outer_iters: 50,
            outer_tol: 1e-4,
            mean_floor: 1e-12,
            pg_steps: 10,
            step0: 1.0,
            svm_max_epochs: 200,
            svm_tol: 1e-6,
        }
    }
}

impl Hyperparams {
    /// Defaults with `gamma = rho = lambda`.
    pub fn with_lambda(lambda: f64) -> Self {
        Hyperparams {
            lambda,
            gamma: lambda,
            rho: lambda,
            ..Hyperparams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(StcError::domain(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("lambda", self.lambda)?;
        finite_nonneg("rho", self.rho)?;
        finite_nonneg("svm_c", self.svm_c)?;
        finite_nonneg("cost_ell", self.cost_ell)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(StcError::domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.mean_floor > 0.0 && self.mean_floor <= 1e-6) {
            return Err(StcError::domain(format!(
                "mean_floor must lie in (0, 1e-6], got {}",
                self.mean_floor
            )));
        }
        if !(self.tol_obj > 0.0) || !(self.outer_tol > 0.0) || !(self.svm_tol > 0.0) {
            return Err(StcError::domain("tolerances must be > 0"));
        }
        if self.inner_sweeps == 0 || self.pg_steps == 0 {
            return Err(StcError::domain("inner_sweeps and pg_steps must be >= 1"));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(StcError::domain(format!("step0 must be > 0, got {}", self.step0)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Hyperparams::default().validate().unwrap();
        let hp = Hyperparams::with_lambda(0.5);
        assert_eq!(hp.gamma, 0.5);
        assert_eq!(hp.rho, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            Hyperparams {
                gamma: 0.0,
                ..Hyperparams::default()
            },
            Hyperparams {
                mean_floor: 1e-3,
                ..Hyperparams::default()
            },
            Hyperparams {
                lambda: -1.0,
                ..Hyperparams::default()
            },
            Hyperparams {
                tol_obj: f64::NAN,
                ..Hyperparams::default()
            },
        ];
        for hp in bad {
            assert!(hp.validate().is_err(), "{hp:?}");
        }
    }

    #[test]
    fn regularizer_parsing_and_penalty() {
        assert_eq!("L1".parse::<Regularizer>().unwrap(), Regularizer::L1);
        assert_eq!("l2".parse::<Regularizer>().unwrap(), Regularizer::L2);
        assert!("l3".parse::<Regularizer>().is_err());
        assert_eq!(Regularizer::L1.penalty(2.0, &[1.0, 3.0]), 8.0);
        assert_eq!(Regularizer::L2.penalty(2.0, &[1.0, 3.0]), 20.0);
    }
}
