//! Click/no-click detectors: joint pattern probabilities, conditioning on
//! outcomes, and sampled count records.

mod condition;
mod counts;
mod error;
mod pattern;
mod probabilities;

pub use condition::{condition_on_pattern, condition_pure_on_pattern, MIN_PATTERN_PROBABILITY};
pub use counts::{
    read_records_csv, read_records_json, sample_counts, sample_counts_partitioned,
    sample_counts_with, write_records_csv, write_records_json, CountRecord,
};
pub use error::DetectionError;
pub use pattern::{validate_detectors, ClickPattern, DetectorSpec};
pub use probabilities::{
    aggregate_split_detector, click_probabilities, pattern_weights_of_matrix, AggregatedProbabilities, JointProbabilities,
};
