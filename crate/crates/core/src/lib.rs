//! Post-selected Bell correlations between two preparers and a selecting
//! third party.
//!
//! Alice and Bob each draw a basis bit and a state bit, prepare a physical
//! entity, and hand it to Charlie, who announces a selection bit. Only the
//! selected trials enter the CHSH combination
//! `S = E(0,0) + E(0,1) + E(1,0) - E(1,1)`.
//!
//! * [`qcore`]: dense state-vector and density-matrix algebra for up to four qubits.
//! * [`protocol`]: preparation schemes, sampled and exact post-selected statistics,
//!   the basis-independence check and bootstrap error bars.
//! * [`lhv`]: classical hidden-variable models, the `|S| <= 2` bound, and the
//!   discard (detection loophole) variant reaching `S = 4`.
//! * [`swap`]: remote state preparation from Bell pairs, measurement-order
//!   equivalence and noise sweeps.

pub mod error;
pub mod lhv;
pub mod protocol;
pub mod qcore;
pub mod rng;
pub mod swap;

pub use error::{Error, Result};
pub use lhv::{CellWeights, LhvSimModel, ResponseAtom, ResponseModel, TritCellWeights};
pub use protocol::{
    BellReport, CondProbTable, PreparationScheme, SelectionRates, StdErr, Tally, TrialRecord,
};
pub use qcore::{Angle, DensityMatrix, Projector, PureState};
pub use swap::{MeasurementOrder, NoiseParams, SwapConfig};

/// Basis and outcome bits are carried as `u8` holding 0 or 1.
pub type Bit = u8;
