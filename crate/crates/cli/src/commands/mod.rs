mod agreement;
mod data;
mod evaluate;
mod sweep;
mod train;

pub use agreement::agreement;
pub use data::{generate, ingest, GenerateSpec};
pub use evaluate::evaluate;
pub use sweep::{report, sweep};
pub use train::{train_gmm, train_stgcn, TrainGmmSpec, TrainStgcnSpec};
