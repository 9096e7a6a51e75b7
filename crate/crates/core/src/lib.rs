pub mod eigen;
pub mod error;
pub mod spin;
pub mod solver;
pub mod hull;
pub mod curves;
pub mod criteria;
pub mod metrology;
pub mod pipeline;

pub use criteria::{
    entanglement_depth, xi_parallel, CriterionConfig, CriterionData, CriterionKind, DepthVerdict, FractionEntry,
};
pub use curves::{
    linear_lower_bound, producibility_hull, sm_curve, symmetric_curve, zeta, zeta_table, BoundCurve, CurveMode,
    CurveProvider, CurveSettings, ZetaSource, ZetaTable,
};
pub use error::{Error, Result};
pub use spin::{PlanarMoments, SpinLabel};
