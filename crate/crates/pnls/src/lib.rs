//! Pseudospectral laboratory for the nonlinear Schrodinger equation
//! i du/dt + Lap u + lambda |u|^mu u = 0 on product domains R^n x T^k:
//! a truncated periodic box times a rectangular flat torus.
//!
//! The crate has three layers:
//!
//! * exact rational calculus over Lebesgue/Sobolev exponents
//!   (admissibility and acceptability predicates, the feasibility system
//!   and its deterministic witness scan);
//! * the solver core: spectral grids and transforms, non-isotropic norms,
//!   the split-step integrator, and the Duhamel fixed-point machinery;
//! * diagnostics: fractional calculus on the torus (ball-average
//!   derivatives, maximal operator, product inequalities) and scattering
//!   measurements (interaction profiles, wave-data extraction, decay
//!   fits).
//!
//! The `pnls` binary drives experiments from flat key=value configs and
//! writes CSV artifacts; see the README for the format.
//!
//! # Example
//!
//! Solve the exponent feasibility system for the cubic nonlinearity in two
//! dispersive dimensions and integrate a small-data trajectory:
//!
//! ```
//! use pnls::exponents::{solve_system, NonlinearityContext, Rational};
//! use pnls::evolution::{evolve, gaussian_mode_data, EvolutionConfig};
//! use pnls::grid::{BoxGrid, ProductGrid, TorusSpectrum};
//! use pnls::norms::mass;
//!
//! let ctx = NonlinearityContext::new(2, 1, Rational::new(3, 1), -1.0, 0.6).unwrap();
//! let sys = solve_system(&ctx).unwrap();
//! assert_eq!(sys.pair.to_string(), "(15/2, 5)");
//! assert_eq!(sys.derived_pair.to_string(), "(10/3, 5)");
//!
//! let grid = ProductGrid::new(
//!     BoxGrid { n: 1, half_length: 16.0, points_per_axis: 128, band: 0.0 },
//!     TorusSpectrum::new(1, vec![1.0], 8).unwrap(),
//! )
//! .unwrap();
//! let ctx1 = NonlinearityContext::new(1, 1, Rational::new(4, 1), -1.0, 0.75).unwrap();
//! let datum = gaussian_mode_data(&grid, 0.75, 0.05).unwrap();
//! let cfg = EvolutionConfig {
//!     ctx: ctx1,
//!     dt: 1e-2,
//!     t_final: 0.5,
//!     sample_stride: 10,
//!     dealias_factor: 2.0,
//!     allow_recurrence: true,
//! };
//! let series = evolve(&datum, &cfg).unwrap();
//! let drift = (mass(series.get(series.len() - 1)) - mass(&datum)).abs() / mass(&datum);
//! assert!(drift < 1e-10);
//! ```

// validation guards are written `!(x > 0)` on purpose: they must reject
// NaN, which the suggested `x <= 0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evolution;
pub mod exponents;
pub mod field;
pub mod fractional;
pub mod grid;
pub mod norms;
pub mod runner;
pub mod scattering;

pub use error::{Error, Result};
