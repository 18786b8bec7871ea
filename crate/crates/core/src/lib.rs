//! Fractional Hardy-Littlewood maximal operators on radial and
//! one-dimensional piecewise-linear functions.

pub mod convergence;
pub mod csvio;
pub mod derivative;
pub mod error;
pub mod geometry;
pub mod maximal;
pub mod oracle2d;
mod quad;
pub mod radial;

pub use error::{Error, Result};
pub use geometry::{
    ball_average, build_average_table, cap_fraction, directional_ball_average,
    directional_cap_moment, AverageTable, CapKernelContext, Kernel, RadialDensity,
};
pub use maximal::{
    good_radius_stats, maximal_1d, maximal_density, maximal_profile, maximal_radial,
    maximal_with_table, uniform_grid, GoodBall, GoodBallSet, MaximalResult, TableGrid, VariantKind,
    VariantSpec,
};
pub use radial::{
    make_profile, unit_ball_volume, LineFunction, LineSpec, NormReport, ProfileSpec, RadialGrid,
    RadialProfile, SlopeProfile,
};
