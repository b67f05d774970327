use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gaussian::{angle_prior_marginals, moment_match, recombine_bias, MomentMatch};
use super::particles::ParticleSet;
use super::ImageUpdateError;
use crate::depth::{
    image_log_likelihood, render, CompensatedSum, DepthImage, PixelModel, PixelModelParams,
    PixelSubset, SparseRenderer,
};
use crate::encoder_filter::BeliefVector;
use crate::kinematics::KinematicModel;

/// Images and beliefs must carry the same timestamp up to this tolerance (s).
pub const TIMESTAMP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionOrder {
    ModelOrder,
    RandomPerUpdate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelSubsetStrategy {
    /// Visit only pixels covered by each particle's silhouette.
    SilhouetteUnion,
    /// Render and evaluate every pixel (slow; reference mode).
    FullImage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpfConfig {
    pub particle_count: usize,
    pub dimension_order: DimensionOrder,
    /// Resample when the effective sample size drops below this fraction of
    /// the particle count.
    pub resample_threshold: f64,
    pub pixel_subset_strategy: PixelSubsetStrategy,
    pub seed: u64,
}

impl Default for CpfConfig {
    fn default() -> Self {
        Self {
            particle_count: 200,
            dimension_order: DimensionOrder::RandomPerUpdate,
            resample_threshold: 0.5,
            pixel_subset_strategy: PixelSubsetStrategy::SilhouetteUnion,
            seed: 0,
        }
    }
}

impl CpfConfig {
    pub fn validate(&self) -> Result<(), ImageUpdateError> {
        if self.particle_count < 2 || !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(ImageUpdateError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Image log-likelihood of joint configurations, relative to an image in
/// which nothing is rendered.
///
/// A pixel outside a configuration's silhouette has the background density
/// whatever the configuration, so the likelihood over the union of all
/// silhouettes (or over the full frame) differs from the sum over the
/// configuration's own covered pixels only by a shared constant.
pub struct LikelihoodEvaluator<'a> {
    model: &'a KinematicModel,
    image: &'a DepthImage,
    pixel: PixelModel,
    params: PixelModelParams,
    strategy: PixelSubsetStrategy,
    renderer: SparseRenderer,
    background: f64,
}

impl<'a> LikelihoodEvaluator<'a> {
    pub fn new(
        model: &'a KinematicModel,
        image: &'a DepthImage,
        params: &PixelModelParams,
        strategy: PixelSubsetStrategy,
    ) -> Result<Self, ImageUpdateError> {
        let intr = model.intrinsics();
        if image.width != intr.width || image.height != intr.height {
            return Err(ImageUpdateError::ImageSize {
                image: (image.width, image.height),
                camera: (intr.width, intr.height),
            });
        }
        let pixel = PixelModel::new(*params)?;
        if let Some(z) = image
            .depth
            .iter()
            .map(|&z| z as f64)
            .find(|z| z.is_infinite() || *z < 0.0)
        {
            return Err(crate::depth::DepthError::InvalidDepth(z).into());
        }
        let background = image.valid_count() as f64 * pixel.background_log_density();
        Ok(Self {
            model,
            image,
            pixel,
            params: *params,
            strategy,
            renderer: SparseRenderer::new(*intr),
            background,
        })
    }

    /// Full-frame log-likelihood of an empty scene.
    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn evaluate(&mut self, values: &[f64]) -> Result<f64, ImageUpdateError> {
        let ll = match self.strategy {
            PixelSubsetStrategy::SilhouetteUnion => {
                self.renderer.render(self.model, values)?;
                let mut acc = CompensatedSum::default();
                for (i, d) in self.renderer.covered() {
                    acc.add(self.pixel.log_ratio_to_background(self.image.depth[i] as f64, d));
                }
                acc.value()
            }
            PixelSubsetStrategy::FullImage => {
                let rendered = render(self.model, values)?;
                image_log_likelihood(self.image, &rendered, &self.params, PixelSubset::All)?
                    - self.background
            }
        };
        if !ll.is_finite() {
            return Err(ImageUpdateError::NonFiniteLikelihood);
        }
        Ok(ll)
    }
}

fn check_inputs(
    beliefs: &BeliefVector,
    image: &DepthImage,
    model: &KinematicModel,
    cfg: &CpfConfig,
) -> Result<(), ImageUpdateError> {
    cfg.validate()?;
    if beliefs.len() != model.joint_count() {
        return Err(ImageUpdateError::BeliefSize {
            beliefs: beliefs.len(),
            joints: model.joint_count(),
        });
    }
    if (image.timestamp - beliefs.timestamp).abs() > TIMESTAMP_TOLERANCE {
        return Err(ImageUpdateError::TimestampMismatch {
            image: image.timestamp,
            belief: beliefs.timestamp,
        });
    }
    Ok(())
}

/// Coordinate particle filter over the joint angles.
///
/// All particles start at the prior means. Dimension by dimension, every
/// particle redraws that coordinate from its prior marginal and is reweighted
/// by the ratio of its new to its previous image likelihood; when the
/// effective sample size falls below the threshold the set is resampled
/// systematically. The final weighted set targets
/// `p(angles | image, history)`.
pub fn cpf_update(
    beliefs: &BeliefVector,
    image: &DepthImage,
    model: &KinematicModel,
    params: &PixelModelParams,
    cfg: &CpfConfig,
) -> Result<ParticleSet, ImageUpdateError> {
    check_inputs(beliefs, image, model, cfg)?;
    let marginals = angle_prior_marginals(beliefs);
    let means: Vec<f64> = marginals.iter().map(|m| m.mean).collect();
    let n = cfg.particle_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut set = ParticleSet::replicate(&means, n, cfg.seed);
    let mut eval = LikelihoodEvaluator::new(model, image, params, cfg.pixel_subset_strategy)?;

    let mut order: Vec<usize> = (0..means.len()).collect();
    if cfg.dimension_order == DimensionOrder::RandomPerUpdate {
        order.shuffle(&mut rng);
    }

    let ll0 = eval.evaluate(&means)?;
    let mut ll = vec![ll0; n];
    let mut state = means.clone();
    for &j in &order {
        let mean = marginals[j].mean;
        let std = marginals[j].var.max(0.0).sqrt();
        for l in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            state.copy_from_slice(set.particle(l));
            state[j] = mean + std * z;
            set.particle_mut(l)[j] = state[j];
            let new = eval.evaluate(&state)?;
            set.log_weights_mut()[l] += new - ll[l];
            ll[l] = new;
        }
        set.normalize();
        if set.effective_sample_size() < cfg.resample_threshold * n as f64 {
            let ancestors = set.resample_systematic(&mut rng);
            ll = ancestors.iter().map(|&a| ll[a]).collect();
        }
    }
    set.normalize();
    if set.log_weights().iter().any(|w| !w.is_finite()) {
        return Err(ImageUpdateError::NonFiniteLikelihood);
    }
    Ok(set)
}

/// Result of a full image update with the intermediate particle fit.
#[derive(Clone, Debug)]
pub struct ImageUpdate {
    pub beliefs: BeliefVector,
    pub particles: ParticleSet,
    pub moments: MomentMatch,
}

/// Particle update of the angles, Gaussian fit per joint, then bias
/// recombination through each joint's prior `p(bias | angle)`.
pub fn image_update_full(
    beliefs: &BeliefVector,
    image: &DepthImage,
    model: &KinematicModel,
    params: &PixelModelParams,
    cfg: &CpfConfig,
) -> Result<BeliefVector, ImageUpdateError> {
    image_update_detailed(beliefs, image, model, params, cfg).map(|u| u.beliefs)
}

pub fn image_update_detailed(
    beliefs: &BeliefVector,
    image: &DepthImage,
    model: &KinematicModel,
    params: &PixelModelParams,
    cfg: &CpfConfig,
) -> Result<ImageUpdate, ImageUpdateError> {
    let particles = cpf_update(beliefs, image, model, params, cfg)?;
    let moments = moment_match(&particles);
    let joints = beliefs
        .joints
        .iter()
        .zip(&moments.marginals)
        .map(|(prior, post)| recombine_bias(prior, *post))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImageUpdate {
        beliefs: BeliefVector {
            joints,
            timestamp: beliefs.timestamp,
        },
        particles,
        moments,
    })
}
