//! Every numeric default in one place. The CLI echoes this block into its
//! reports, and a JSON config file can override any field.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Manifold membership tolerance on the constraint residual.
    pub metric_tol: f64,
    /// Step for central differences of fields (space and parameter).
    pub fd_step: f64,
    pub integrator: IntegratorConfig,
    pub newton: NewtonConfig,
    pub sampling: SamplingConfig,
    pub index: IndexConfig,
    pub continuation: ContinuationConfig,
    pub correspondence: CorrespondenceConfig,
    pub reeb: ReebConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            metric_tol: 1e-9,
            fd_step: 1e-6,
            integrator: IntegratorConfig::default(),
            newton: NewtonConfig::default(),
            sampling: SamplingConfig::default(),
            index: IndexConfig::default(),
            continuation: ContinuationConfig::default(),
            correspondence: CorrespondenceConfig::default(),
            reeb: ReebConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-13,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// An orbit is accepted when the closing residual is at most this.
    pub residual_tol: f64,
    /// Newton keeps iterating towards this residual while it still improves.
    pub target_residual: f64,
    /// Return residual accepted when scanning divisors for the least period.
    pub least_period_tol: f64,
    /// Largest cover multiplicity tested by the divisor scan.
    pub max_cover: u32,
    /// Transversality threshold |X(y).n| >= ratio * |X(y)|.
    pub section_ratio: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            residual_tol: 1e-8,
            target_residual: 1e-11,
            least_period_tol: 1e-7,
            max_cover: 12,
            section_ratio: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Period guesses are cap * ratio^j for j = 0..rungs.
    pub ladder_ratio: f64,
    pub ladder_rungs: usize,
    /// Dedup distance as a fraction of the manifold diameter.
    pub dedup_factor: f64,
    pub dedup_period_rel: f64,
    /// Points per orbit image used for Hausdorff distances.
    pub image_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            ladder_ratio: 0.8,
            ladder_rungs: 6,
            dedup_factor: 1e-4,
            dedup_period_rel: 1e-6,
            image_samples: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// |det(I - A)| above this trusts the sign of the determinant.
    pub nondegeneracy: f64,
    pub degree_radius: f64,
    pub degree_samples: usize,
    pub degree_zero_tol: f64,
    /// Unit directions sampled for the rotation interval of a symplectic path.
    pub cz_directions: usize,
    /// Path samples per unit time for Conley-Zehnder rotation tracking.
    pub cz_samples_per_time: f64,
    pub cz_degeneracy: f64,
    /// Consecutive caps with a uniform tail sign needed for infinite type.
    pub infinite_type_caps: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            nondegeneracy: 1e-6,
            degree_radius: 1e-3,
            degree_samples: 720,
            degree_zero_tol: 1e-9,
            cz_directions: 64,
            cz_samples_per_time: 64.0,
            cz_degeneracy: 1e-8,
            infinite_type_caps: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub initial_step: f64,
    /// Largest allowed distance between consecutive nodes in the branch metric.
    pub step_cap: f64,
    pub min_step: f64,
    pub growth: f64,
    pub shrink: f64,
    pub max_nodes: usize,
    pub corrector_max_iter: usize,
    /// Corrector iterations at or below which the step grows.
    pub fast_iterations: usize,
    /// Branch ends closer than this in the branch metric are merged.
    pub merge_tol: f64,
    /// Default continuation cap as a multiple of the sampling cap.
    pub pmax_factor: f64,
    /// Sampling cap used by the sky detector when a scenario gives none.
    pub sample_cap: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.02,
            step_cap: 0.25,
            min_step: 1e-8,
            growth: 1.3,
            shrink: 0.5,
            max_nodes: 4000,
            corrector_max_iter: 8,
            fast_iterations: 3,
            merge_tol: 1e-4,
            pmax_factor: 1e3,
            sample_cap: 7.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrespondenceConfig {
    /// Separation of tuple points as a fraction of the manifold diameter.
    pub sep_factor: f64,
    pub closure_tol: f64,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        Self {
            sep_factor: 1e-6,
            closure_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReebConfig {
    pub max_halvings: usize,
    pub growth_slack: f64,
    /// Sample count for estimating K over M x [0, 1].
    pub k_net: usize,
    pub reeb_tol: f64,
    pub branch_reeb_tol: f64,
}

impl Default for ReebConfig {
    fn default() -> Self {
        Self {
            max_halvings: 8,
            growth_slack: 0.05,
            k_net: 10_000,
            reeb_tol: 1e-9,
            branch_reeb_tol: 1e-6,
        }
    }
}
