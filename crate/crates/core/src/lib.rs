//! Post-processing of predicted individual survival distributions with
//! conformal regression adapted to right-censored data, plus the baseline
//! models and evaluation metrics needed to measure discrimination and
//! calibration.

pub mod baseline;
pub mod conformal;
pub mod curve;
pub mod data;
pub mod error;
pub mod km;
pub mod metrics;
pub mod synth;

pub use curve::{
    mean_time_from_percentiles, Extrapolation, Interpolation, PercentileGrid, SurvivalCurve,
};
pub use data::{SurvivalDataset, SurvivalRecord};
pub use error::{Error, Result};
pub use km::{pseudo_observations, KmCurve, PseudoObservations};
