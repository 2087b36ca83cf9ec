//! Information geometry of exponentially concave functions on the open
//! probability simplex: L-divergence, c-duality, the induced Riemannian
//! structure, geodesics, gradient flows, displacement interpolation and
//! portfolio rebalancing diagnostics.

pub mod divergence;
pub mod error;
pub mod fd;
pub mod finance;
pub mod generator;
pub mod geodesic;
pub mod geometry;
pub(crate) mod optim;
pub mod region;
pub mod simplex;
pub mod spline;
pub mod transport;

pub use error::{Error, Result};
pub use finance::{BacktestReport, MarketPath, TimeStamp};
pub use generator::{Builtin, Generator};
pub use geodesic::{CoordSystem, Curve, PythResult};
pub use geometry::{Connection, MetricMatrix};
pub use simplex::{cost, psi, CostValue, DualCoord, PrimalCoord, SimplexPoint};
pub use transport::{ActionValue, InterpolationFamily};
