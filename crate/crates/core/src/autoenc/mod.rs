//! Fully connected and convolutional autoencoders trained with Adam on
//! reconstruction MSE.

mod arch;
mod gradcheck;
mod net;
mod optim;
pub mod persist;
mod train;

pub use arch::{
    build_arch, round_conv_window, Activation, AeArchitecture, ArchKind, LayerOp, LayerSpec, ParamRange,
};
pub use gradcheck::{gradient_check, gradient_check_with, relative_error, GradCheckOptions, GradCheckReport, LayerCheck};
pub use net::{loss_and_gradient, reconstruction_loss, AeModel};
pub use optim::Adam;
pub use persist::{load, save};
pub use train::{mean_loss, split_indices, train, EpochStats, FlatWindows, TrainConfig, TrainReport, WindowSource};
