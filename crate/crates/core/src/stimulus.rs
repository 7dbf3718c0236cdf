//! Color-patch stimulus generation in CIE-L\*u\*v\*.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

/// Default number of stimuli per dataset.
pub const DEFAULT_STIMULI: usize = 15;

/// A point in CIE-L\*u\*v\*. Stored unclamped; only rendering clamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorPoint {
    pub l: f64,
    pub u: f64,
    pub v: f64,
}

impl ColorPoint {
    pub const fn new(l: f64, u: f64, v: f64) -> Self {
        Self { l, u, v }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.l, self.u, self.v)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

/// One Gaussian component of a stimulus mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponentSpec {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

impl GaussianComponentSpec {
    pub fn diagonal(mean: [f64; 3], variances: [f64; 3]) -> Self {
        let mut covariance = [[0.0; 3]; 3];
        for (i, var) in variances.iter().enumerate() {
            covariance[i][i] = *var;
        }
        Self { mean, covariance }
    }

    pub fn covariance_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.covariance[i][j])
    }

    /// Checks finiteness, symmetry and positive-definiteness and returns the
    /// lower Cholesky factor of the covariance.
    pub fn validate(&self) -> Result<Matrix3<f64>> {
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("component mean is not finite"));
        }
        let cov = self.covariance_matrix();
        if cov.iter().any(|c| !c.is_finite()) {
            return Err(invalid("component covariance is not finite"));
        }
        if (cov - cov.transpose()).amax() > 1e-9 * cov.amax().max(1.0) {
            return Err(invalid("component covariance is not symmetric"));
        }
        cov.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| invalid("component covariance is not positive-definite"))
    }
}

/// The two built-in datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Hard,
    Easy,
}

impl DatasetKind {
    pub fn id(self) -> &'static str {
        match self {
            DatasetKind::Hard => "hard",
            DatasetKind::Easy => "easy",
        }
    }

    pub fn specs(self) -> [GaussianComponentSpec; 3] {
        let (hard, easy) = builtin_dataset_specs();
        match self {
            DatasetKind::Hard => hard,
            DatasetKind::Easy => easy,
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(DatasetKind::Hard),
            "easy" => Ok(DatasetKind::Easy),
            other => Err(invalid(format!(
                "unknown dataset `{other}` (expected hard|easy)"
            ))),
        }
    }
}

/// Component means and the shared covariance of the hard and easy datasets.
pub fn builtin_dataset_specs() -> ([GaussianComponentSpec; 3], [GaussianComponentSpec; 3]) {
    let hard_var = [25.0, 81.0, 81.0];
    let easy_var = [25.0, 100.0, 100.0];
    let hard = [
        GaussianComponentSpec::diagonal([60.0, -10.0, 20.0], hard_var),
        GaussianComponentSpec::diagonal([60.0, -20.0, -10.0], hard_var),
        GaussianComponentSpec::diagonal([60.0, 20.0, 10.0], hard_var),
    ];
    let easy = [
        GaussianComponentSpec::diagonal([60.0, 30.0, 30.0], easy_var),
        GaussianComponentSpec::diagonal([60.0, 30.0, -30.0], easy_var),
        GaussianComponentSpec::diagonal([60.0, -30.0, -30.0], easy_var),
    ];
    (hard, easy)
}

/// A generated stimulus and the (1-based) index of the component that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub l: f64,
    pub u: f64,
    pub v: f64,
    pub component: usize,
}

impl Stimulus {
    pub fn point(&self) -> ColorPoint {
        ColorPoint::new(self.l, self.u, self.v)
    }
}

/// A dataset manifest: stimuli plus the mixture that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub id: String,
    pub seed: u64,
    pub stimuli: Vec<Stimulus>,
    pub components: Vec<GaussianComponentSpec>,
}

impl StimulusSet {
    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn points(&self) -> Vec<ColorPoint> {
        self.stimuli.iter().map(Stimulus::point).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stimuli.is_empty() {
            return Err(invalid(format!("dataset `{}` has no stimuli", self.id)));
        }
        for (i, s) in self.stimuli.iter().enumerate() {
            if !s.point().is_finite() {
                return Err(invalid(format!(
                    "dataset `{}` stimulus {i} is not finite",
                    self.id
                )));
            }
            if s.component == 0 || s.component > self.components.len() {
                return Err(invalid(format!(
                    "dataset `{}` stimulus {i} references missing component {}",
                    self.id, s.component
                )));
            }
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let set: StimulusSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }
}

/// Draws `n` stimuli: a uniformly chosen component, then a multivariate normal
/// draw from it. Pure in `(specs, n, seed)`.
pub fn sample_stimuli(
    id: &str,
    specs: &[GaussianComponentSpec],
    n: usize,
    seed: u64,
) -> Result<StimulusSet> {
    if n == 0 {
        return Err(invalid("stimulus count must be at least 1"));
    }
    if specs.is_empty() {
        return Err(invalid("at least one mixture component is required"));
    }
    let factors = specs
        .iter()
        .map(GaussianComponentSpec::validate)
        .collect::<Result<Vec<_>>>()?;

    let mut rng = rng_from_seed(seed);
    let stimuli = (0..n)
        .map(|_| {
            let k = rng.random_range(0..specs.len());
            let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let x = Vector3::from(specs[k].mean) + factors[k] * z;
            Stimulus {
                l: x[0],
                u: x[1],
                v: x[2],
                component: k + 1,
            }
        })
        .collect();

    Ok(StimulusSet {
        id: id.to_string(),
        seed,
        stimuli,
        components: specs.to_vec(),
    })
}

/// Convenience wrapper for the built-in datasets.
pub fn builtin_stimuli(kind: DatasetKind, n: usize, seed: u64) -> Result<StimulusSet> {
    sample_stimuli(kind.id(), &kind.specs(), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let (hard, easy) = builtin_dataset_specs();
        assert_eq!(hard[0].mean, [60.0, -10.0, 20.0]);
        assert_eq!(hard[1].mean, [60.0, -20.0, -10.0]);
        assert_eq!(hard[2].mean, [60.0, 20.0, 10.0]);
        assert_eq!(easy[0].mean, [60.0, 30.0, 30.0]);
        assert_eq!(easy[1].mean, [60.0, 30.0, -30.0]);
        assert_eq!(easy[2].mean, [60.0, -30.0, -30.0]);
        for c in &easy {
            assert_eq!(
                c.covariance,
                [[25.0, 0.0, 0.0], [0.0, 100.0, 0.0], [0.0, 0.0, 100.0]]
            );
        }
        for c in &hard {
            assert_eq!(
                c.covariance,
                [[25.0, 0.0, 0.0], [0.0, 81.0, 0.0], [0.0, 0.0, 81.0]]
            );
        }
    }

    #[test]
    fn deterministic() {
        let a = builtin_stimuli(DatasetKind::Hard, 15, 7).unwrap();
        let b = builtin_stimuli(DatasetKind::Hard, 15, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        assert_ne!(a, builtin_stimuli(DatasetKind::Hard, 15, 8).unwrap());
    }

    #[test]
    fn rejects_degenerate_covariance() {
        let spec = GaussianComponentSpec {
            mean: [0.0; 3],
            covariance: [[0.0; 3]; 3],
        };
        assert!(matches!(
            sample_stimuli("x", &[spec], 15, 1),
            Err(crate::Error::Validation(_))
        ));
        let asym = GaussianComponentSpec {
            mean: [0.0; 3],
            covariance: [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
        assert!(sample_stimuli("x", &[asym], 15, 1).is_err());
        assert!(builtin_stimuli(DatasetKind::Easy, 0, 1).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let set = builtin_stimuli(DatasetKind::Easy, 15, 3).unwrap();
        let text = set.to_manifest().unwrap();
        assert_eq!(StimulusSet::from_manifest(&text).unwrap(), set);
        // field order is part of the format
        let id = text.find("\"id\"").unwrap();
        let seed = text.find("\"seed\"").unwrap();
        let stimuli = text.find("\"stimuli\"").unwrap();
        let components = text.find("\"components\"").unwrap();
        assert!(id < seed && seed < stimuli && stimuli < components);
    }

    #[test]
    fn components_are_recorded() {
        let set = builtin_stimuli(DatasetKind::Easy, 300, 11).unwrap();
        set.validate().unwrap();
        for s in &set.stimuli {
            // nearest mean is almost always the generating one for the easy set
            assert!((1..=3).contains(&s.component));
        }
    }
}
