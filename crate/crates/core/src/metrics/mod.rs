//! Trajectory and depth quality measures.

mod depth;
mod trajectory;

pub use depth::{
    coupled_loss, huber, huber_grad, l1, pcd, DisparityModel, LossBreakdown, LossInputs, LossParams,
    PCD_THRESHOLD,
};
pub use trajectory::{
    align_points, associate_timestamps, ate, ate_rmse, AlignMode, Alignment, AteReport, Trajectory,
    ASSOCIATION_WINDOW,
};
