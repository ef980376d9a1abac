//! Truncated-Fock-space simulation of a BPSK coherent-state receiver that
//! mixes the signal with ancillae on beam splitters, measures every port by
//! homodyne detection and decides by threshold.

pub mod analysis;
pub mod decision;
pub mod error;
pub mod fock;
pub mod hermite;
pub mod homodyne;
pub mod policy;
pub mod receiver;
pub mod stats;
pub mod u2;

pub use decision::{threshold, DecisionRule, Region, SignalSpec, Truth};
pub use error::{Error, Result};
pub use fock::{
    beam_splitter, beam_splitter_u2, cat_state, coherent_state, fock_state, squeezed_vacuum, tensor, BeamSplitterAngle,
    ModeState, Parity, Truncation, TwoModeState,
};
pub use homodyne::{HomodynePhase, MeasuredMode, QuadratureGrid};
pub use u2::U2Params;
