//! Hidden conditional random fields for whole-document opinion
//! classification of pause-segmented spoken-review transcripts.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod introspection;
pub mod lbfgs;
pub mod logreg;
pub mod model;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
pub use model::{HcrfParameters, Label, LabelSet, ObservationSequence, PosteriorDistribution};
