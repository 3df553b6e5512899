//! Free-fermion simulation of measured, periodically driven spin chains.
//!
//! The drive is `V = e^{β Σ ZZ} e^{-i Σ J_zz ZZ} e^{-i Σ J_xx XX} e^{-i Σ h Y}`.
//! After a Jordan-Wigner transformation every factor is the exponential of a
//! quadratic Majorana form, so one period acts on the `2L` Majorana operators
//! through a single complex-orthogonal matrix. The crate builds that matrix,
//! extracts complex quasi-energies, constructs boundary i0 modes, evolves pure
//! Gaussian states, and checks all of it against a dense state-vector engine.
//!
//! ```
//! use nufloquet::{floquet, majorana::{Boundary, ModelParams}};
//!
//! let p = ModelParams::uniform(40, 2.0, 0.0, 0.0, std::f64::consts::FRAC_PI_3, Boundary::Open);
//! let v = floquet::build_floquet_matrix(&p, 0).unwrap();
//! let spec = floquet::quasi_energies(&v, &Default::default()).unwrap();
//! assert_eq!(spec.pairs.len(), 40);
//! ```

pub mod edge;
pub mod error;
pub mod exact;
pub mod fit;
pub mod floquet;
pub mod gaussian;
pub mod hp;
pub mod harness;
pub mod linalg;
pub mod majorana;
pub mod ode;
pub mod pfaffian;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
