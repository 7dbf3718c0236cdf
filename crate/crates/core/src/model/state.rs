use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stimulus::ColorPoint;

/// Mean and precision of one Gaussian category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussParams {
    pub mean: Vector3<f64>,
    pub precision: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussParamsDoc {
    mean: [f64; 3],
    precision: [[f64; 3]; 3],
}

impl Serialize for GaussParams {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GaussParamsDoc {
            mean: self.mean.into(),
            precision: std::array::from_fn(|i| std::array::from_fn(|j| self.precision[(i, j)])),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GaussParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GaussParamsDoc::deserialize(deserializer)?;
        Ok(GaussParams {
            mean: Vector3::from(doc.mean),
            precision: Matrix3::from_fn(|i, j| doc.precision[i][j]),
        })
    }
}

impl GaussParams {
    pub fn is_valid(&self) -> bool {
        let p = &self.precision;
        self.mean.iter().all(|v| v.is_finite())
            && p.iter().all(|v| v.is_finite())
            && (p - p.transpose()).amax() <= 1e-9 * p.amax().max(1.0)
            && p.cholesky().is_some()
    }
}

/// One agent's parameters and per-stimulus latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// `theta[l][k]`: probability of category `k` given sign `l`.
    pub theta: Vec<Vec<f64>>,
    pub gauss: Vec<GaussParams>,
    /// Category of each stimulus.
    pub assignments: Vec<usize>,
    /// Sign of each stimulus.
    pub signs: Vec<usize>,
}

impl AgentState {
    pub fn categories(&self) -> usize {
        self.gauss.len()
    }

    pub fn sign_count(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.gauss.len();
        if k == 0 || self.theta.is_empty() {
            return Err(invalid(
                "agent state needs at least one category and one sign",
            ));
        }
        for (l, row) in self.theta.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!(
                    "theta row {l} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("theta row {l} is not on the simplex")));
            }
        }
        if let Some(i) = self.gauss.iter().position(|g| !g.is_valid()) {
            return Err(invalid(format!(
                "category {i} precision is not symmetric positive-definite"
            )));
        }
        if self.assignments.len() != self.signs.len() {
            return Err(invalid("assignments and signs differ in length"));
        }
        if self.assignments.iter().any(|&c| c >= k) {
            return Err(invalid("assignment out of range"));
        }
        if self.signs.iter().any(|&s| s >= self.theta.len()) {
            return Err(invalid("sign out of range"));
        }
        Ok(())
    }
}

pub const AGENT_DOCUMENT_VERSION: u32 = 1;

/// Versioned checkpoint of an [`AgentState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDocument {
    pub version: u32,
    pub state: AgentState,
}

impl AgentDocument {
    pub fn new(state: AgentState) -> Self {
        Self {
            version: AGENT_DOCUMENT_VERSION,
            state,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AgentDocument = serde_json::from_str(text)?;
        if doc.version != AGENT_DOCUMENT_VERSION {
            return Err(invalid(format!(
                "unsupported agent document version {}",
                doc.version
            )));
        }
        doc.state.validate()?;
        Ok(doc)
    }
}

/// Per-category observation accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryStats {
    pub count: usize,
    pub sum: Vector3<f64>,
    /// Scatter about the category's sample mean.
    pub scatter: Matrix3<f64>,
}

impl CategoryStats {
    pub fn empty() -> Self {
        Self {
            count: 0,
            sum: Vector3::zeros(),
            scatter: Matrix3::zeros(),
        }
    }

    pub fn sample_mean(&self) -> Option<Vector3<f64>> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Counts needed by the conjugate updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `sign_category_counts[l][k]`.
    pub sign_category_counts: Vec<Vec<u64>>,
    pub categories: Vec<CategoryStats>,
}

impl SufficientStats {
    pub fn empty(categories: usize, signs: usize) -> Self {
        Self {
            sign_category_counts: vec![vec![0; categories]; signs],
            categories: vec![CategoryStats::empty(); categories],
        }
    }

    pub fn from_data(
        observations: &[ColorPoint],
        assignments: &[usize],
        signs: &[usize],
        categories: usize,
        sign_count: usize,
    ) -> Result<Self> {
        if observations.len() != assignments.len() || observations.len() != signs.len() {
            return Err(invalid("observations, assignments and signs must align"));
        }
        let mut stats = Self::empty(categories, sign_count);
        for ((x, &c), &s) in observations.iter().zip(assignments).zip(signs) {
            if c >= categories || s >= sign_count {
                return Err(invalid(format!("category {c} or sign {s} out of range")));
            }
            stats.sign_category_counts[s][c] += 1;
            let cat = &mut stats.categories[c];
            cat.count += 1;
            cat.sum += x.to_vector();
        }
        for ((x, &c), _) in observations.iter().zip(assignments).zip(signs) {
            let cat = &mut stats.categories[c];
            let d = x.to_vector() - cat.sum / cat.count as f64;
            cat.scatter += d * d.transpose();
        }
        Ok(stats)
    }

    pub fn total(&self) -> usize {
        self.categories.iter().map(|c| c.count).sum()
    }
}
