use serde::{Deserialize, Serialize};

use super::image::DepthImage;
use super::render::RenderedDepth;
use super::DepthError;

/// Below this many standard deviations from both range limits the truncated
/// Gaussian normalizer rounds to exactly 1 in f64.
const TRUNCATION_FREE_SIGMAS: f64 = 8.5;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Parameters of the per-pixel depth model: a Gaussian around the rendered
/// depth, an occluder branch uniform in front of it, and a uniform outlier
/// tail over the sensor range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PixelModelParams {
    pub sigma_z: f64,
    pub p_occluded: f64,
    pub w_tail: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for PixelModelParams {
    fn default() -> Self {
        Self {
            sigma_z: 0.02,
            p_occluded: 0.2,
            w_tail: 0.02,
            z_min: 0.3,
            z_max: 4.0,
        }
    }
}

impl PixelModelParams {
    pub fn validate(&self) -> Result<(), DepthError> {
        let ok = self.sigma_z > 0.0
            && self.sigma_z.is_finite()
            && (0.0..1.0).contains(&self.p_occluded)
            && (0.0..1.0).contains(&self.w_tail)
            && self.z_min.is_finite()
            && self.z_max.is_finite()
            && self.z_min < self.z_max;
        if ok {
            Ok(())
        } else {
            Err(DepthError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Per-pixel model with its constants precomputed.
#[derive(Clone, Copy, Debug)]
pub struct PixelModel {
    params: PixelModelParams,
    inv_range: f64,
    ln_range: f64,
    gauss_coef: f64,
    inv_sigma: f64,
}

/// The two branches of the pixel density at one `(z, d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelTerms {
    pub visible: f64,
    pub occluded: f64,
}

impl PixelTerms {
    pub fn total(&self) -> f64 {
        self.visible + self.occluded
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

impl PixelModel {
    pub fn new(params: PixelModelParams) -> Result<Self, DepthError> {
        params.validate()?;
        let range = params.z_max - params.z_min;
        Ok(Self {
            params,
            inv_range: 1.0 / range,
            ln_range: range.ln(),
            gauss_coef: 1.0 / (params.sigma_z * SQRT_2PI),
            inv_sigma: 1.0 / params.sigma_z,
        })
    }

    pub fn params(&self) -> &PixelModelParams {
        &self.params
    }

    /// Log-density of a pixel where no robot surface is rendered.
    pub fn background_log_density(&self) -> f64 {
        -self.ln_range
    }

    /// `(1 - p_occ) p_vis` and `p_occ p_occl` for an in-range `z`.
    ///
    /// `d` at or beyond `z_max` (including infinity) means nothing is there to
    /// see, so the density reduces to the uniform over the sensor range.
    /// `d` below `z_min` is clamped to `z_min`.
    #[inline]
    pub fn terms(&self, z: f64, d: f64) -> PixelTerms {
        let p = &self.params;
        if !(d < p.z_max) {
            return PixelTerms {
                visible: 0.0,
                occluded: self.inv_range,
            };
        }
        let d = d.max(p.z_min);
        let tail = p.w_tail * self.inv_range;

        let e = (z - d) * self.inv_sigma;
        let mut gauss = if e.abs() < 38.0 {
            self.gauss_coef * (-0.5 * e * e).exp()
        } else {
            0.0
        };
        if d - p.z_min < TRUNCATION_FREE_SIGMAS * p.sigma_z
            || p.z_max - d < TRUNCATION_FREE_SIGMAS * p.sigma_z
        {
            let mass = std_normal_cdf((p.z_max - d) * self.inv_sigma)
                - std_normal_cdf((p.z_min - d) * self.inv_sigma);
            gauss /= mass;
        }
        let p_vis = (1.0 - p.w_tail) * gauss + tail;

        let occluder = if d > p.z_min {
            if z <= d {
                1.0 / (d - p.z_min)
            } else {
                0.0
            }
        } else {
            // no room for an occluder in front of the surface
            self.inv_range
        };
        let p_occl = (1.0 - p.w_tail) * occluder + tail;

        PixelTerms {
            visible: (1.0 - p.p_occluded) * p_vis,
            occluded: p.p_occluded * p_occl,
        }
    }

    /// `ln p(z | d)`; NaN `z` (no return) is uninformative and gives 0.
    #[inline]
    pub fn log_density(&self, z: f64, d: f64) -> f64 {
        if z.is_nan() {
            return 0.0;
        }
        self.terms(z, d).total().ln()
    }

    /// `ln p(z | d) - ln p(z | no surface)`: the contribution of a covered
    /// pixel relative to an uncovered one.
    #[inline]
    pub fn log_ratio_to_background(&self, z: f64, d: f64) -> f64 {
        if z.is_nan() {
            return 0.0;
        }
        self.terms(z, d).total().ln() + self.ln_range
    }
}

fn check_z(z: f64) -> Result<(), DepthError> {
    if z.is_infinite() || z < 0.0 {
        Err(DepthError::InvalidDepth(z))
    } else {
        Ok(())
    }
}

/// Log-density of one observed depth `z` given the rendered depth `d`.
pub fn pixel_log_likelihood(z: f64, d: f64, params: &PixelModelParams) -> Result<f64, DepthError> {
    let model = PixelModel::new(*params)?;
    check_z(z)?;
    Ok(model.log_density(z, d))
}

/// Density form of [`pixel_log_likelihood`] (NaN `z` gives 1).
pub fn pixel_density(z: f64, d: f64, params: &PixelModelParams) -> Result<f64, DepthError> {
    pixel_log_likelihood(z, d, params).map(f64::exp)
}

/// Posterior probability that the pixel is occluded given the observation.
/// Diagnostic only; it is not carried to the next frame.
pub fn posterior_occlusion(z: f64, d: f64, params: &PixelModelParams) -> Result<f64, DepthError> {
    let model = PixelModel::new(*params)?;
    check_z(z)?;
    if z.is_nan() || params.p_occluded == 0.0 {
        return Ok(if z.is_nan() { params.p_occluded } else { 0.0 });
    }
    let t = model.terms(z, d);
    let total = t.total();
    Ok(if total > 0.0 { t.occluded / total } else { params.p_occluded })
}

/// Which pixels enter an image log-likelihood.
#[derive(Clone, Copy, Debug)]
pub enum PixelSubset<'a> {
    /// Pixels covered by the rendered silhouette.
    Covered,
    /// Every pixel of the image.
    All,
    /// An explicit index list, e.g. the union of several silhouettes.
    Indices(&'a [usize]),
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum of pixel log-likelihoods over `subset`, accumulated with compensated
/// summation.
pub fn image_log_likelihood(
    observed: &DepthImage,
    rendered: &RenderedDepth,
    params: &PixelModelParams,
    subset: PixelSubset<'_>,
) -> Result<f64, DepthError> {
    if observed.width != rendered.width || observed.height != rendered.height {
        return Err(DepthError::DimensionMismatch {
            observed: (observed.width, observed.height),
            rendered: (rendered.width, rendered.height),
        });
    }
    let model = PixelModel::new(*params)?;
    let n = observed.depth.len();
    let mut acc = CompensatedSum::default();
    let mut add = |i: usize| -> Result<(), DepthError> {
        if i >= n {
            return Err(DepthError::IndexOutOfRange { index: i, len: n });
        }
        let z = observed.depth[i] as f64;
        check_z(z)?;
        acc.add(model.log_density(z, rendered.depth[i]));
        Ok(())
    };
    match subset {
        PixelSubset::Covered => {
            for i in (0..n).filter(|&i| rendered.coverage[i]) {
                add(i)?;
            }
        }
        PixelSubset::All => {
            for i in 0..n {
                add(i)?;
            }
        }
        PixelSubset::Indices(idx) => {
            for &i in idx {
                add(i)?;
            }
        }
    }
    Ok(acc.value())
}
