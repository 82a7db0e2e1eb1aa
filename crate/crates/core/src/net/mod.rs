//! Differentiable grasp-quality network, exact reverse-mode gradients,
//! training, and the finite-difference oracle.

pub mod checkpoint;
mod conv;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{check_input_gradient, finite_diff, finite_diff_oracle, finite_diff_params, GradCheckReport};
pub use loss::{backward_to_input, backward_to_params, MapLoss, MseLoss, Scaled};
pub use model::{DepthEncoding, InputGradient, QualityMap, QualityNet, PARAM_COUNT};
pub use train::{batch_gradient, evaluate_mse, train_model, TrainConfig, TrainOutcome};
