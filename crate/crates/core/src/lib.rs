//! Randomized rank-revealing factorizations.
//!
//! * [`rurv::rurv`] / [`rurv::rulv`]: `A = U·R·V` (or `U·L·V`) with a Haar `V`,
//!   rank revealing with high probability at every split index;
//! * [`grurv::grurv`]: the same for `A₁^{±1} ⋯ A_k^{±1}` without forming the
//!   product or any inverse;
//! * [`bounds`]: the corner density, the tail bound and the bounds on the
//!   rank-revealing ratios;
//! * [`spectrum`], [`metrics`], [`harness`]: test matrices, measurements and
//!   the experiment driver behind the `rurv` command line tool.
//!
//! ```
//! use rurv::dense::Matrix;
//! use rurv::haar::SeededRng;
//!
//! let a = Matrix::from_rows(&[[4.0, 1.0], [2.0, 3.0]]);
//! let f = rurv::rurv::rurv(&a, &mut SeededRng::new(7, 0)).unwrap();
//! let back = f.reconstruct();
//! assert!(a.sub(&back).unwrap().max_abs() < 1e-14);
//! ```

pub mod bounds;
pub mod dense;
pub mod error;
pub mod grurv;
pub mod haar;
pub mod harness;
pub mod metrics;
pub mod rurv;
pub mod spectrum;

pub use error::{Error, Result};
