//! Storing exemplars in a predictive coding network and recalling them.

mod retrieve;
mod store;

pub use retrieve::{
    complete_batch, complete_retrieve, denoise_batch, denoise_retrieve, denoise_trajectory, evaluate_retrieval,
    hetero_batch, mse, nearest_stored, ItemResult, RetrievalConfig, RetrievalReport,
};
pub use store::{store, EpochStats, TrainConfig, TrainTrace, UpdateMode};
