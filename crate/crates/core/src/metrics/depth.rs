use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{check_dims, depth_to_disparity, DepthImage, DisparityImage, NormalImage};

/// Relative error below which a depth counts as correct.
pub const PCD_THRESHOLD: f64 = 0.1;

/// Percentage of ground-truth pixels whose estimate is within 10% of the
/// true depth. Pixels missing from the estimate count as incorrect.
pub fn pcd(z_est: &DepthImage, z_gt: &DepthImage) -> Result<f64> {
    check_dims(z_gt.dims(), z_est.dims())?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (x, y, gt) in z_gt.iter_valid() {
        total += 1;
        if let Some(est) = z_est.get(x, y) {
            if (est - gt).abs() < PCD_THRESHOLD * gt {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("ground truth has no valid pixel"));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Huber loss: `r^2 / 2` for `|r| <= delta`, `delta (|r| - delta / 2)` beyond.
pub fn huber(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to the residual.
pub fn huber_grad(residual: f64, delta: f64) -> f64 {
    if residual.abs() <= delta {
        residual
    } else {
        delta * residual.signum()
    }
}

pub fn l1(residual: f64) -> f64 {
    residual.abs()
}

/// Weights of the four loss terms and the Huber threshold rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Huber threshold as a fraction of the term's largest absolute residual.
    pub huber_delta_rel: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.05,
            huber_delta_rel: 0.1,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("loss weight {name} must be non-negative")));
            }
        }
        if !(self.huber_delta_rel > 0.0) {
            return Err(Error::invalid("huber_delta_rel must be positive"));
        }
        Ok(())
    }
}

/// Virtual-stereo disparity model `d = B f / z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisparityModel {
    pub f_train: f64,
    pub baseline: f64,
}

impl Default for DisparityModel {
    fn default() -> Self {
        Self {
            f_train: 525.0,
            baseline: 0.1,
        }
    }
}

/// Images entering [`coupled_loss`].
#[derive(Clone, Copy, Debug)]
pub struct LossInputs<'a> {
    /// Predicted disparity.
    pub d_hat: &'a DisparityImage,
    /// Predicted normals.
    pub n_hat: &'a NormalImage,
    pub d_gt: &'a DisparityImage,
    pub n_gt: &'a NormalImage,
    /// Depth reconstructed by normal-guided filtering.
    pub z_re: &'a DepthImage,
    /// Normals computed from the predicted depth.
    pub n_re: &'a NormalImage,
    pub disparity: DisparityModel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    /// Huber on predicted vs true disparity.
    pub disparity_supervised: f64,
    /// Huber on predicted vs true normals.
    pub normal_supervised: f64,
    /// Huber on reconstructed vs true disparity.
    pub disparity_coupled: f64,
    /// L1 between depth-derived and predicted normals.
    pub normal_coupled: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn with_weights(mut self, p: &LossParams) -> Self {
        self.total = p.alpha * (self.disparity_supervised + self.normal_supervised)
            + p.beta * self.disparity_coupled
            + p.gamma * self.normal_coupled;
        self
    }
}

/// Mean Huber loss over `residuals` with the threshold set relative to the
/// largest residual magnitude. Empty or all-zero residuals give 0.
fn relative_huber_mean(residuals: &[f64], delta_rel: f64) -> f64 {
    let max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if residuals.is_empty() || max == 0.0 {
        return 0.0;
    }
    let delta = delta_rel * max;
    residuals.iter().map(|&r| huber(r, delta)).sum::<f64>() / residuals.len() as f64
}

fn scalar_residuals(a: &DisparityImage, b: &DisparityImage) -> Vec<f64> {
    (0..a.len())
        .filter_map(|i| Some(a.get_index(i)? - b.get_index(i)?))
        .collect()
}

fn normal_pairs<'a>(a: &'a NormalImage, b: &'a NormalImage) -> impl Iterator<Item = Vector3<f64>> + 'a {
    (0..a.values().len()).filter_map(move |i| Some(a.get_index(i)? - b.get_index(i)?))
}

/// Training objective that couples the disparity and normal predictions
/// through the depth reconstructed from them.
///
/// Each term is averaged over the pixels valid in both of its operands.
/// Normal residuals enter the Huber terms through their Euclidean length and
/// the L1 term as the sum of absolute components.
pub fn coupled_loss(inputs: &LossInputs<'_>, p: &LossParams) -> Result<LossBreakdown> {
    p.validate()?;
    let dims = inputs.d_hat.dims();
    check_dims(dims, inputs.n_hat.dims())?;
    check_dims(dims, inputs.d_gt.dims())?;
    check_dims(dims, inputs.n_gt.dims())?;
    check_dims(dims, inputs.z_re.dims())?;
    check_dims(dims, inputs.n_re.dims())?;

    let d_re = depth_to_disparity(inputs.z_re, inputs.disparity.f_train, inputs.disparity.baseline)?;

    let normal_sup: Vec<f64> = normal_pairs(inputs.n_hat, inputs.n_gt).map(|r| r.norm()).collect();
    let normal_l1: Vec<f64> = normal_pairs(inputs.n_re, inputs.n_hat)
        .map(|r| l1(r.x) + l1(r.y) + l1(r.z))
        .collect();
    let normal_coupled = if normal_l1.is_empty() {
        0.0
    } else {
        normal_l1.iter().sum::<f64>() / normal_l1.len() as f64
    };

    Ok(LossBreakdown {
        disparity_supervised: relative_huber_mean(&scalar_residuals(inputs.d_hat, inputs.d_gt), p.huber_delta_rel),
        normal_supervised: relative_huber_mean(&normal_sup, p.huber_delta_rel),
        disparity_coupled: relative_huber_mean(&scalar_residuals(&d_re, inputs.d_gt), p.huber_delta_rel),
        normal_coupled,
        total: 0.0,
    }
    .with_weights(p))
}
