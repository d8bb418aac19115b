//! Dense state-vector engine over truncated bosonic modes and qutrits.

mod density;
mod layout;
mod measure;
mod ops;
mod state;

pub use density::{DensityMatrix, DENSITY_TOL, PSD_TOL};
pub use layout::{BasisState, LayoutSpec, ModeLayout, ModeSpec, Site, SiteKind, Spin, DEFAULT_DIM_LIMIT};
pub use measure::{
    LocalBasis, MeasurementBasis, MeasurementOutcome, Observable, ResidualPolicy, ORTHONORMAL_TOL, OUTSIDE_LABEL,
    RESIDUAL_TOL,
};
pub use ops::Unitary;
pub use state::{PureState, StateSnapshot, INDEX_ORDER_TAG, NORM_TOL, ONE, ZERO};
