//! Rooted R-trees inside finite hyperbolic graphs.
//!
//! The crate builds, over a finite rooted graph with a set of boundary
//! proxies, a subtree whose root rays reach every proxy, and checks the
//! quantitative properties such a tree is expected to have: quasi-geodesic
//! rays, a surjective boundary map with bounded fibers, and coverage of the
//! ambient space.
//!
//! - [`metric`]: exact finite metric spaces, Gromov products, visual metrics
//! - [`graph`]: weighted graphs as geodesic spaces
//! - [`doubling`]: packing numbers, nets and colored covers
//! - [`boundary`]: boundary proxies with their metric
//! - [`approx`]: instance generators and visual cores
//! - [`rtree`]: the staged tree construction
//! - [`verify`]: property checks and the verification report

pub mod approx;
pub mod boundary;
pub mod doubling;
pub mod error;
pub mod graph;
pub mod length;
pub mod metric;
pub mod rtree;
pub mod verify;

pub use error::{Error, Result};
pub use length::Length;
