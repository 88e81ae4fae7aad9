//! Laplace mechanism for count release.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::TransformError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DpMechanism {
    #[default]
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpReleaseSpec {
    pub epsilon: f64,
    pub sensitivity: f64,
    #[serde(default)]
    pub mechanism: DpMechanism,
}

impl DpReleaseSpec {
    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(TransformError::InvalidBudget(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(TransformError::InvalidBudget(format!(
                "sensitivity must be > 0, got {}",
                self.sensitivity
            )));
        }
        Ok(())
    }

    /// Laplace scale b = sensitivity / epsilon.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// One Laplace(0, b) draw by inverse CDF.
pub fn laplace_noise<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        // u = -0.5 exactly would give ln(0).
        if tail > 0.0 {
            return -b * u.signum() * tail.ln();
        }
    }
}

/// Perturb each count with independent noise. The same seed gives the same
/// output.
pub fn dp_release(true_counts: &[f64], spec: &DpReleaseSpec, seed: u64) -> Result<Vec<f64>, TransformError> {
    spec.validate()?;
    let b = spec.scale();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(true_counts.iter().map(|c| c + laplace_noise(&mut rng, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(epsilon: f64) -> DpReleaseSpec {
        DpReleaseSpec {
            epsilon,
            sensitivity: 1.0,
            mechanism: DpMechanism::Laplace,
        }
    }

    #[test]
    fn huge_epsilon_is_nearly_exact() {
        let counts: Vec<f64> = (0..1000).map(f64::from).collect();
        let out = dp_release(&counts, &spec(1e6), 7).unwrap();
        assert!(counts.iter().zip(&out).all(|(a, b)| (a - b).abs() < 1.0));
    }

    #[test]
    fn invalid_budgets() {
        for e in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(dp_release(&[1.0], &spec(e), 0), Err(TransformError::InvalidBudget(_))));
        }
        let s = DpReleaseSpec {
            epsilon: 1.0,
            sensitivity: 0.0,
            mechanism: DpMechanism::Laplace,
        };
        assert!(dp_release(&[1.0], &s, 0).is_err());
    }

    #[test]
    fn seeded_runs_reproduce() {
        let a = dp_release(&[10.0, 20.0], &spec(1.0), 42).unwrap();
        let b = dp_release(&[10.0, 20.0], &spec(1.0), 42).unwrap();
        let c = dp_release(&[10.0, 20.0], &spec(1.0), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
