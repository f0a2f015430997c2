//! Radial Fourier calculus on two-step nilpotent groups.
//!
//! The crate evaluates the bounded spherical functions of the free two-step
//! nilpotent group `N_{v,2}` under the orthogonal actions `O(v)` / `SO(v)`
//! and of Heisenberg-type groups, together with the supporting machinery:
//!
//! * [`specfun`] — reduced Bessel, Laguerre and Hermite-Weber functions and
//!   the discrete shift operators acting on Laguerre indices;
//! * [`group`] — exact step-two group arithmetic, Korányi norm, dilations,
//!   Haar integration and the unit-sphere measure;
//! * [`matpolar`] — polar coordinates on antisymmetric matrices, Haar
//!   quadrature on `O(v)`/`SO(v)` and the polar Laplacian;
//! * [`spherical`] — spherical function evaluation and eigenvalue checks;
//! * [`plancherel`] — the radial Plancherel measure, forward transforms,
//!   inversion and spectral-multiplier kernels;
//! * [`areafn`] — spectral-side area functions and uniform-bound scans;
//! * [`multiplier`] — the dyadic partition of the spectrum, the operators
//!   turning `|X|^2` and `|A|^2` into parameter-side operators, and the
//!   weighted summability criterion.
//!
//! Every analytic formula implemented here is paired with an independent
//! numerical verification in the test suite; the `acceptance` integration
//! test runs the whole battery.

pub mod areafn;
pub mod error;
pub mod group;
pub mod matpolar;
pub mod multiplier;
pub mod plancherel;
pub mod quad;
pub mod specfun;
pub mod spherical;

pub use error::{Error, Result};
pub use group::{GroupDims, GroupPoint, TypeHModel};
pub use matpolar::{AntisymPolar, OrthQuadrature};
pub use plancherel::SpectralGrid;
pub use spherical::{HeisenbergParam, SphericalParam};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
