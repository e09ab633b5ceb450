//! Numerical laboratory for a family of perturbed nonlocal
//! reaction-diffusion problems on an interval with Dirichlet conditions:
//!
//! ```text
//! du/dt - a(l(u)) Lap u = f(u) + h(t),   u = 0 on the boundary.
//! ```
//!
//! The crate provides, on a uniform finite-difference grid:
//!
//! * an energy-exact IMEX integrator for individual trajectories,
//! * closed-form and quadrature evaluation of exponentially weighted
//!   forcing tails, Gronwall-type energy bounds and pullback absorbing
//!   radii,
//! * sampled audits of the structural assumptions on a perturbed family
//!   (growth certificates, tail summability, convergence of the data, and
//!   the uniform-tail conditions behind robustness of the attractors),
//! * attractor-cloud experiments: pullback omega-limits, robustness of the
//!   limit attractor under the perturbation, finite-time convergence rates,
//!   and the order-of-limits counterexample.
//!
//! Everything is driven by plain-data descriptors so that runs are
//! reproducible bit for bit from a configuration file.

pub mod attractor;
pub mod conditions;
pub mod config;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod model;
pub mod report;
pub mod runner;
pub mod scenarios;
pub mod solver;
pub mod verdict;

pub use attractor::{AttractorCloud, CloudSettings, FiniteTimeReport, RobustnessReport};
pub use conditions::{A4Mode, ConditionSettings, MuLimits, NoncommutationReport};
pub use error::{Error, Result};
pub use grid::{EigenvalueMode, Field, Grid1D, Norms};
pub use model::{PerturbedFamily, ProblemSpec};
pub use verdict::{ConditionVerdict, EvidenceRow, Verdict};
