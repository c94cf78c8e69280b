//! Vine copulas: regular vine structures, pair-copula models on them,
//! density evaluation, simulation, conditioning, and sequential fitting.

mod joint;
mod model;
mod select;
pub(crate) mod structure;

pub use joint::JointVineModel;
pub use model::{ConditionalChain, RVineModel};
pub use select::{
    fit_regression_rvine, fit_rvine, fit_rvine_fixed, select_structure, FittedVine,
    VineFitConfig,
};
pub use structure::{ColumnStep, EdgeSpec, Peeling, VineStructure};
