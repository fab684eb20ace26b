pub mod cli;
pub mod data;
pub mod dnp;
pub mod ensemble;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod quad;
pub mod seed;
pub mod sim;
pub mod theory;

pub use data::{Dataset, ResponseScale, Task};
pub use error::{Error, ErrorKind, Result};
