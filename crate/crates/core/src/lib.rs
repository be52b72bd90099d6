//! Exact-arithmetic workbench for positive-characteristic p-adic
//! cohomology: Galois rings with Frobenius, linear algebra over Z/p^N,
//! the explicit divided-power ring Acris of an elementary quasiregular
//! semiperfect algebra with its Nygaard filtration and syntomic map,
//! sigma-semilinear crystal computations along residue-field towers, and
//! the Čech–Alexander complex of the affine line.
//!
//! Everything is exact modulo p^N; precision windows are explicit and no
//! result is approximate within its window.

pub mod acris;
pub mod arith;
pub mod battery;
pub mod cech;
pub mod fcrystal;
pub mod linalg;
pub mod padic;
pub mod syntomic;
