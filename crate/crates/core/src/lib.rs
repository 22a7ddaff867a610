//! Deduction engine for Adams-spectral-sequence data over F2.
//!
//! The library models bigraded charts with their cycle/boundary lattices,
//! closed-form synthetic pages, and extension facts for maps between spectra.
//! On top of that sit inference rules that derive new differentials and
//! extensions, a provenance-carrying fact store with fixpoint saturation,
//! and a proof-trace renderer.

pub mod chart;
pub mod extdb;
pub mod factstore;
pub mod gf2;
pub mod rules;
pub mod synthetic;
pub mod table;
