//! Random trees grown under a degree-dependent attachment rule, and the
//! entropy and dimension of their limiting leaf measure.
//!
//! * [`malthus`]: closed-form analytics (Malthusian parameter, entropy,
//!   dimension).
//! * [`growth`]: exact-in-law tree generators and the arena tree.
//! * [`estimators`]: finite-time estimators of the limiting objects.
//! * [`leafwalk`]: size-biased random leaf paths and local dimensions.
//! * [`oracle`]: exact enumeration of small discrete-time trees.
//! * [`stats`]: goodness-of-fit helpers shared by the checks.

pub mod error;
pub mod estimators;
pub mod format;
pub mod growth;
pub mod leafwalk;
pub mod malthus;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use growth::{Stop, TimeKind, TreeRealization};
pub use malthus::{MalthusReport, WeightFunction};
pub use rng::SeedSpec;
