//! Dataset ingestion, synthetic data and result serialization.
//!
//! Directory layouts understood by the loaders:
//!
//! ```text
//! UCI HAR                      EMG 3DC
//! root/                        root/
//!   subject_<id>/                participant_<id>/
//!     gyro.txt      n x 3          artificial/
//!     acc.txt       n x 3            session_<k>/ block files, n_i x 10
//!     body_acc.txt  n x 3          evaluation/
//!     labels.txt    one activity     session_<k>.txt   n x 10
//!                   per r samples    session_<k>.cps   transitions
//! ```
//!
//! Channel files are comma-, tab- or whitespace-delimited.

mod datasets;
mod delimited;
mod output;
mod synth;

use serde::{Deserialize, Serialize};

use crate::extract::ChangePointSet;
use crate::series::TimeSeries;

pub use datasets::{
    assign_splits, load_emg_3dc, load_uci_har, split_sizes, EmgVariant, EMG_CHANNELS, EMG_GESTURE_SECONDS,
    EMG_SAMPLE_RATE_HZ, EMG_SESSION_GESTURES, UCI_CHANNELS, UCI_SAMPLE_RATE_HZ,
};
pub use delimited::{labels_path, load_delimited, read_labels, read_matrix, write_delimited, write_labels, DelimitedOptions};
pub use output::{read_curve, write_change_points, write_curve, write_json, ResultRecord};
pub use synth::{generate_synthetic, RegimeGenerator, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub series: TimeSeries,
    pub change_points: ChangePointSet,
    pub split: Split,
    pub subject_id: String,
    /// Set when no label file accompanied the data.
    pub labels_missing: bool,
}
