pub mod error;
pub mod exact;
pub mod lrs;
pub mod pipeline;
pub mod reduce3;
pub mod reduce4;
pub mod sat;
pub mod solver;
pub mod tdm;

pub use error::{Error, Result};
