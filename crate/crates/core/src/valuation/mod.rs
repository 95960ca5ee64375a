//! Valuation models: signal spaces, the valuation families, property
//! estimators and the privatized and truncated values.

mod family;
mod model;
mod properties;
mod space;

pub use family::{Family, Monomial};
pub use model::{Declared, ModelSpec, ValuationModel, DEFAULT_STEPS, DEFAULT_TOL};
pub use properties::{
    check_property, estimate_c, estimate_gamma, GridConfig, Property, PropertyReport, Witness,
};
pub use space::{SignalProfile, SignalSpace};
