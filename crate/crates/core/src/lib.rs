pub mod checkpoint;
pub mod corpus;
pub mod deteval;
pub mod error;
pub mod features;
pub mod imfeat;
pub mod learn;
pub mod lingfeat;
pub mod nn;
pub mod pipeline;
pub mod synth;
pub mod table;
pub mod textcnn;
pub mod util;

pub use error::{Error, Result};
