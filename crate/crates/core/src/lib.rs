//! Saliency-aware implicit gaze calibration.
//!
//! Video frames are turned into saliency heatmaps, frames whose saliency is
//! concentrated enough are kept, and the offset between clustered salient
//! points and clustered rough gaze becomes a transform that corrects every
//! subsequent gaze sample. Head movement and scene cuts trigger
//! recalibration. A simulator provides ground truth for all of it.

pub mod calibration;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod frame;
pub mod geom;
pub mod heatmap;
pub mod io;
pub mod pipeline;
pub mod saliency;
pub mod session;
pub mod sim;
pub mod temporal;

pub use calibration::{
    cluster_points, compute_transform, merge_historical, zscore_filter, CalibrationParams, HistoricalTrajectories,
    RoughGazeSample, TransformSource, TransformVector,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use frame::{downscale, Frame};
pub use geom::Point;
pub use heatmap::{compute_scs, extract_feature_vector, FeatureVector, HeatmapSource, SaliencyHeatmap, Selection, SelectionParams};
pub use pipeline::{frames_cost, run, run_with_history, Corpus, RunOutput};
pub use saliency::{SaliencyDetector, SpectralResidual};
pub use session::{Event, HeadPose, Orientation, Session, SessionConfig};
pub use sim::{generate_scenario, simulate_rough_gaze, ScenarioConfig};
pub use temporal::{phash, Attention, PerceptualHash};
