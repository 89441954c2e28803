//! Numerical toolkit for the generalized Abreu equation on 2D Delzant
//! polytopes: polytope geometry, homogeneous-bundle data, symplectic
//! potentials, the weighted Abreu operator, energy functionals with a
//! PL stability estimate, and a continuation solver.

pub mod bundle;
pub mod functionals;
pub mod io;
pub mod operators;
pub mod polytope;
pub mod potentials;
pub mod solver;
