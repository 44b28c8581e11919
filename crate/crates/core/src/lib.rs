//! Solution-function policies whose parameters are adapted online by a
//! guided evolutionary search.

pub mod error;
pub mod es;
pub mod experiment;
pub mod lp;
pub mod metrics;
pub mod param_space;
pub mod planner;
pub mod sim;

pub use error::{Error, Result};
