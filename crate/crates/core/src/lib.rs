//! Networks of perfect integrate-and-fire neurons with mutual inhibition,
//! driven by Lévy noise: simulation, fluid limit, stability analysis and
//! Monte Carlo verification.

pub mod config;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod levy;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod stability;
pub mod verification;

pub use error::{FluidError, LinalgError, ParamError, SimError, StabilityError, VerifyError};
pub use fluid::{integrate_fluid, FluidStatus, FluidTrajectory};
pub use levy::{Law, LawFamily, LevySpec};
pub use linalg::Matrix;
pub use network::{decoupled_simulate, simulate, NetworkConfig, SimOptions, SimRecord};
pub use rng::{ReplicaKey, Stream};
pub use stability::{check_partial_stability, steady_rates, StabilityReport, Verdict};
pub use verification::CheckResult;
