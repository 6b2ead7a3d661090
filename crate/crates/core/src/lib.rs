pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod inference;
pub mod numerics;
pub mod synthgen;
pub mod task;
pub mod training;
pub mod transformer;

pub use error::{Error, ErrorClass, Result};
pub use exec::Exec;
pub use task::{Arm, Task};
