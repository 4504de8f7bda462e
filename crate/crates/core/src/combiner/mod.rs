//! Task-based design of the hybrid analog/digital receiver.

pub mod design;
pub mod equalize;
pub mod response;
pub mod waterfill;

pub use design::{
    design_block, design_monotone, design_multitone, emse_of_combiner, modeled_excess_mse, quantization_noise,
    support_for_combiner, AcquisitionDesign, BlockDesign, DesignParams,
};
pub use equalize::equalizing_unitary;
pub use response::{analog_filter_response, combiners_from_responses, read_responses_csv, write_responses_csv, ResponseSample};
pub use waterfill::{block_emse, noise_ratio, waterfill, WaterFill};
