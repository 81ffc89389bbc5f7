//! Discrete-time Grover walks on wedge graphs, built for studying *pulsation*:
//! the near-periodic concentration of the walker on a marked star attached to
//! a highly symmetric base graph.
//!
//! The crate is organised as a pipeline:
//!
//! * [`graph`] — undirected simple graphs with symmetric-arc indexing, the
//!   Johnson / star / hypercube / complete families, and the wedge (one-vertex
//!   identification) composite that marks the attached component.
//! * [`walk`] — the arc-space Grover walk `U = S(2K*K - I)` itself: state
//!   vectors, single steps (data-parallel or sequential), finding-probability
//!   curves, and dense materialisations of `S`, `K`, `U` for small instances.
//! * [`reduction`] — the distance-class picture over a Johnson base: the
//!   `(k+1) x (k+1)` lumped transition matrix, its stationary measure and
//!   symmetrisation, and the `(3k+2)`-dimensional invariant arc subspace with
//!   the reduced walk operator.
//! * [`perturbation`] — exact rational eigenvalue perturbation in `eps = 1/d`:
//!   series terms of the lumped matrix, the unperturbed eigensystem, the
//!   reduced resolvent, and the trace-formula coefficients that yield the
//!   closed-form top-gap `1 - m * k! * k^k * eps^(k+1)`.
//! * [`spectral`] — from the symmetrised lumped matrix to the walk: principal
//!   eigenpair, the lift onto unitary eigenvectors `exp(±i theta)`, overlap
//!   with the uniform initial state, and the `sin^2(theta t)` prediction with
//!   its hitting-time scaling law.
//! * [`acceptance`] — the verification battery: named, numbered checks with
//!   pinned tolerances that exercise the whole pipeline end to end.
//!
//! # Example
//!
//! Simulate a Johnson-star composite and compare the observed first peak of
//! the finding probability against the spectral prediction:
//!
//! ```
//! use pulsar_core::graph::WedgeGraph;
//! use pulsar_core::reduction::ClassDecomposition;
//! use pulsar_core::spectral;
//!
//! let wedge = WedgeGraph::johnson_star(15, 2, 1).unwrap();
//! let dec = ClassDecomposition::new(15, 2, 1).unwrap();
//! let prediction = spectral::predict(&dec).unwrap();
//!
//! let curve = pulsar_core::walk::curve(&wedge, 2 * prediction.tau as usize);
//! let (t_peak, p_peak) = curve.argmax();
//! assert!(p_peak > 0.8);
//! assert!((t_peak as f64 - prediction.tau as f64).abs() <= 0.15 * prediction.tau as f64);
//! ```

pub mod acceptance;
pub mod error;
pub mod graph;
pub mod perturbation;
pub mod reduction;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
