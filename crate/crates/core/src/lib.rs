pub mod cc_bound;
pub mod error;
pub mod lower_bounds;
pub mod metric;
pub mod optim;
pub mod prob;
pub mod relations;
pub mod simulate;
pub mod sd_bound;

pub use error::{Error, Result};
