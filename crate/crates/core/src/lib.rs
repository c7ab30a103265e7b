//! Mean-field-game model of deforestation under heterogeneous religious
//! adherence: equilibrium policies, forest-cover dynamics, structural
//! estimation and the exposure instrument.

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod instrument;
pub mod model;
pub mod optimize;
pub mod panel;
pub mod plot;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{adherence_grid, elasticities, g1, g2, BeliefPrior, Elasticities, G1Form, G2Form, ModelParams};
pub use quadrature::belief_moment;
