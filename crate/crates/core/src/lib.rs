//! Quantum mutual entropy and channel capacities for finite-dimensional systems.
//!
//! Everything is computed in nats. The modules build on each other:
//! [`linalg`] (Hermitian eigensolver, matrix functions, tensor products),
//! [`entropy`] (states, von Neumann and relative entropy),
//! [`channels`] (Kraus maps, measurements, classical channels),
//! [`mutual`] (compound states and mutual entropy),
//! [`capacity`] (Holevo bounds and capacity optimizers), and the
//! [`cli`] driver behind the `qcap` binary.

pub mod capacity;
pub mod channels;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod mutual;
pub mod optim;
pub mod random;

pub use channels::{ClassicalChannel, ProjectiveMeasurement, QuantumChannel, StandardChannel};
pub use entropy::{DensityMatrix, ExtendedReal};
pub use error::{Error, Result};
