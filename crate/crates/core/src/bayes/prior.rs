use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::SourceKind;
use crate::{Error, Result};

/// Diagonal of the prior covariance `B`; the prior mean is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    variances: Vec<f64>,
}

impl PriorSpec {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() || variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "prior variances must be positive and finite".into(),
            ));
        }
        Ok(Self { variances })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            variances: vec![1.0; dim],
        }
    }

    /// `B_11 = 1`, `B_{i+1,i+1} = B_{i+M+1,i+M+1} = 1/i^2`: an H^2-type smoothness prior.
    pub fn star(harmonics: usize) -> Self {
        let mut v = vec![0.0; 2 * harmonics + 1];
        v[0] = 1.0;
        for i in 1..=harmonics {
            let w = 1.0 / (i * i) as f64;
            v[i] = w;
            v[i + harmonics] = w;
        }
        Self { variances: v }
    }

    pub fn for_source(kind: SourceKind) -> Self {
        match kind {
            SourceKind::Circle => Self::identity(2),
            SourceKind::Star { harmonics } => Self::star(harmonics),
        }
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn trace(&self) -> f64 {
        self.variances.iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.variances
            .iter()
            .map(|v| v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_prior_diagonal() {
        let p = PriorSpec::star(2);
        assert_eq!(p.variances(), &[1.0, 1.0, 0.25, 1.0, 0.25]);
        assert_eq!(PriorSpec::for_source(SourceKind::Circle).variances(), &[1.0, 1.0]);
        let p3 = PriorSpec::star(3);
        assert_eq!(p3.variances()[3], 1.0 / 9.0);
        assert_eq!(p3.variances()[6], 1.0 / 9.0);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(PriorSpec::new(vec![1.0, 0.0]).is_err());
        assert!(PriorSpec::new(vec![]).is_err());
    }
}
