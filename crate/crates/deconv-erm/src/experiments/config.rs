//! JSON experiment configuration and its translation into runtime objects.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::densities::{BoxDomain, CoordNoise, Curve, DensityModel, NoiseModel};
use crate::error::{Error, Result};
use crate::kernel::{BaseKernel, GridSpec, Profile};
use crate::lowerbound::{FamilyParams, HypothesisFamily};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveSpec {
    Const { value: f64 },
    Linear { intercept: f64, slope: f64 },
    Sine { base: f64, amp: f64, cycles: f64 },
}

impl CurveSpec {
    pub fn build(&self) -> Curve<f64> {
        match *self {
            CurveSpec::Const { value } => Curve::Const(value),
            CurveSpec::Linear { intercept, slope } => Curve::Linear { intercept, slope },
            CurveSpec::Sine { base, amp, cycles } => Curve::Sine { base, amp, cycles },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    UniformBox {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    BoundarySplit {
        boundary: CurveSpec,
        below: f64,
    },
    LowerBoundMember {
        m: usize,
        omega: Vec<bool>,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_tau() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    2.0
}
fn default_alpha() -> f64 {
    1.0
}

impl DensitySpec {
    pub fn build(&self) -> Result<DensityModel<f64>> {
        match self {
            DensitySpec::UniformBox { lo, hi } => Ok(DensityModel::uniform_box(BoxDomain::new(
                lo.to_vec(),
                hi.to_vec(),
            )?)),
            DensitySpec::BoundarySplit { boundary, below } => {
                DensityModel::boundary_split(boundary.build(), *below)
            }
            DensitySpec::LowerBoundMember {
                m,
                omega,
                tau,
                gamma,
                alpha,
            } => {
                let mut params = FamilyParams::default_for(*m);
                params.tau = *tau;
                params.gamma = *gamma;
                params.alpha = *alpha;
                let fam = Arc::new(HypothesisFamily::solve(params)?);
                fam.density(omega.clone())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseSpec {
    Dirac,
    Laplace { sigma: f64 },
    GammaSymmetric { k: u32, sigma: f64 },
}

impl NoiseSpec {
    fn build(&self) -> CoordNoise<f64> {
        match *self {
            NoiseSpec::Dirac => CoordNoise::Dirac,
            NoiseSpec::Laplace { sigma } => CoordNoise::Laplace { sigma },
            NoiseSpec::GammaSymmetric { k, sigma } => CoordNoise::GammaSymmetric { k, sigma },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub f: DensitySpec,
    pub g: DensitySpec,
    pub noise: Vec<NoiseSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSpec {
    pub gamma: f64,
    pub holder_l: f64,
    /// Margin exponent declared for the model (used by rate comparisons).
    pub alpha: f64,
    /// Bins; `None` derives `ceil(1/lambda_1)` per sample size.
    #[serde(default)]
    pub j_bins: Option<usize>,
    #[serde(default = "default_v")]
    pub v_levels: usize,
}

fn default_v() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandwidthSpec {
    /// Multiplicative constant of the schedule.
    pub scale: f64,
    /// Exponent `e` in `lambda(n) = scale * n^e`; `None` uses the default
    /// `-1/(2 beta_i + 2 gamma + d)` per coordinate.
    #[serde(default)]
    pub exponent: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_step")]
    pub grid_step: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_profile() -> String {
    "flat-top".into()
}
fn default_step() -> f64 {
    1.0 / 64.0
}
fn default_half_width() -> f64 {
    96.0
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            profile: default_profile(),
            grid_step: default_step(),
            half_width: default_half_width(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub class: ClassSpec,
    pub bandwidth: BandwidthSpec,
    /// Strictly increasing sample sizes (n = m per rung).
    pub ladder: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Configuration(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Configuration(
                "ladder must be nonempty and strictly increasing".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::Configuration("replications must be >= 1".into()));
        }
        if self.model.noise.len() != 2 {
            return Err(Error::Configuration("noise must list two coordinates".into()));
        }
        if self.bandwidth.scale <= 0.0 {
            return Err(Error::Configuration("bandwidth scale must be positive".into()));
        }
        if let Some(e) = self.bandwidth.exponent {
            if e > 0.0 {
                return Err(Error::Configuration(
                    "bandwidth must be nonincreasing in n".into(),
                ));
            }
        }
        if self.class.v_levels < 2 {
            return Err(Error::Configuration("v_levels must be >= 2".into()));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel<f64>> {
        NoiseModel::new(self.model.noise.iter().map(|n| n.build()).collect())
    }

    pub fn base_kernel(&self) -> Result<BaseKernel> {
        match self.kernel.profile.as_str() {
            "flat-top" => Ok(BaseKernel::flat_top(2)),
            "triangular" => Ok(BaseKernel::triangular(2)),
            other => Err(Error::Configuration(format!("unknown kernel profile {other}"))),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            step_u: self.kernel.grid_step,
            half_width_u: self.kernel.half_width,
        }
    }

    /// Per-coordinate bandwidth at sample size `n`.
    pub fn lambda(&self, n: usize) -> Result<[f64; 2]> {
        let noise = self.noise_model()?;
        let betas = noise.betas();
        let mut out = [0.0; 2];
        for i in 0..2 {
            let e = self
                .bandwidth
                .exponent
                .unwrap_or_else(|| -1.0 / (2.0 * betas[i] + 2.0 * self.class.gamma + 2.0));
            out[i] = self.bandwidth.scale * (n as f64).powf(e);
        }
        Ok(out)
    }

    /// Bin count at sample size `n` (explicit, or derived from lambda_1).
    pub fn j_bins(&self, n: usize) -> Result<usize> {
        if let Some(j) = self.class.j_bins {
            return Ok(j);
        }
        let l = self.lambda(n)?;
        Ok((1.0 / l[0]).ceil().max(2.0) as usize)
    }

    pub fn profile(&self) -> Result<Profile> {
        match self.kernel.profile.as_str() {
            "flat-top" => Ok(Profile::FlatTop),
            "triangular" => Ok(Profile::Triangular),
            other => Err(Error::Configuration(format!("unknown kernel profile {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> &'static str {
        r#"{
            "model": {
                "f": {"kind": "boundary-split",
                      "boundary": {"kind": "sine", "base": 0.35, "amp": 0.08, "cycles": 1.0},
                      "below": 1.8},
                "g": {"kind": "uniform-box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
                "noise": [{"family": "laplace", "sigma": 0.25},
                          {"family": "laplace", "sigma": 0.25}]
            },
            "class": {"gamma": 2.0, "holder_l": 4.0, "alpha": 100.0,
                      "j_bins": 32, "v_levels": 64},
            "bandwidth": {"scale": 0.3},
            "ladder": [250, 500, 1000],
            "replications": 5,
            "seed": 42
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_json(sample_config()).unwrap();
        assert_eq!(cfg.ladder, vec![250, 500, 1000]);
        let l = cfg.lambda(1000).unwrap();
        // Default exponent with beta = 2, gamma = 2, d = 2 is -1/10.
        assert!((l[0] - 0.3 * 1000f64.powf(-0.1)).abs() < 1e-12);
        assert!(cfg.noise_model().is_ok());
        assert_eq!(cfg.j_bins(1000).unwrap(), 32);
    }

    #[test]
    fn rejects_bad_ladder() {
        let text = sample_config().replace("[250, 500, 1000]", "[500, 500]");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }
}
