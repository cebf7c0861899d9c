//! Identity testing of quantum channels against a fixed unitary or the
//! completely depolarizing channel, from incoherent single-copy access.
//!
//! The crate is organised bottom-up: [`linalg`] provides matrices and
//! states, [`channel`] Kraus/Choi representations and distances, [`random`]
//! seeded streams and Haar sampling, [`povm`] measurements and categorical
//! sampling, [`weingarten`] Haar-moment calculus and the lemma checkers, and
//! [`certify`] the testers themselves.

pub mod certify;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod povm;
pub mod random;
pub mod weingarten;

pub use channel::{ChoiOperator, KrausChannel};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, PureState, SchattenP, C64};
pub use random::RngStream;
