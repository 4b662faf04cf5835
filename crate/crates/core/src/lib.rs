//! Structural-balance dynamics on signed temporal networks.
//!
//! The pipeline runs from timestamped appraisal events to signed directed
//! networks, sparse triad censuses over the 138 isomorphism classes of
//! three-node signed digraphs, empirical and time-varying Markov transition
//! matrices over triad types, one-step forecasting, and stability statistics
//! against exogenous series.
//!
//! | module | contents |
//! |---|---|
//! | [`ingest`] | event and scalar-series parsing, period binning |
//! | [`netbuild`] | sign-of-sum networks, positive core/periphery |
//! | [`triads`] | triad codes, type table, census, transition counts |
//! | [`markov`] | row normalization, stationary vectors, stability series |
//! | [`tvsolver`] | fused/group-lasso estimation of time-varying chains |
//! | [`forecast`] | one-step forecasts, RMSE, walk-forward tuning |
//! | [`stats`] | alignment, Pearson, Granger causality |
//! | [`cli`] | subcommand drivers and on-disk artifacts |

pub mod cli;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod markov;
pub mod netbuild;
pub mod output;
pub mod stats;
pub mod synth;
pub mod triads;
pub mod tvsolver;

pub use error::{Error, Result};
