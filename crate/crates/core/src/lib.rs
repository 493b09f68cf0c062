//! Quantum-trained convolutional network.
//!
//! A simulated N-qubit circuit of Ry rotations and a linear CNOT chain yields
//! 2^N basis-state probabilities. A small mapping network turns each
//! `(basis bits, probability)` pair into one weight of a classical CNN, a
//! per-layer affine scaling model adjusts the magnitudes, and the CNN is
//! trained by backpropagating the cross-entropy loss all the way back to the
//! circuit angles. Only the circuit angles, the mapping network and the
//! scaling model are trainable, so the trainable count grows with the number
//! of circuit blocks rather than with the CNN size.
//!
//! Modules:
//! - [`qsim`]: exact real statevector simulation and its gradients.
//! - [`generator`]: probability-to-weight mapping and its backward pass.
//! - [`nn`]: the target CNN, binary cross-entropy and Adam.
//! - [`data`]: feature table ingestion, scaling, windowing and splits.
//! - [`runner`]: training loops, evaluation, sweeps and checkpoints.
//! - [`cli`]: the `qtcnn` command line.

pub mod cli;
pub mod data;
pub mod error;
pub mod generator;
pub mod nn;
pub mod qsim;
pub mod runner;

pub use error::{Error, Result};
