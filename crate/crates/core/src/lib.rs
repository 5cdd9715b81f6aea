//! Exact counting, search, and verification toolkit for rainbow arithmetic
//! progressions in equinumerous colorings.
//!
//! The crate bundles the finite, machine-checkable side of the anti-Ramsey
//! quantity `T_k` (the least number of colors forcing a rainbow `AP(k)` in
//! every equinumerous coloring) together with the supporting machinery:
//!
//! * [`progression`] — enumeration and closed-form counting of arithmetic
//!   progressions in `[m]`, plus per-pair incidence counts.
//! * [`coloring`] — equinumerous colorings of `[t*n]`, rainbow detection,
//!   and canonicalization under color relabeling.
//! * [`search`] — backtracking search for rainbow-free colorings (lower-bound
//!   witnesses) and exhaustive verification over canonical colorings.
//! * [`matrix`] — 0-1 matrices, all-ones pattern avoidance, exact
//!   Zarankiewicz-type extremal values, and the Kővári–Sós–Turán bound.
//! * [`numtheory`] — divisor counting, divisor-count sieve, and finite-scale
//!   Wigert ratios.
//! * [`audit`] — per-instance reconstruction of the divisibility-matrix
//!   argument: color-class profiles, wide gaps, blocks, `A^s` matrices, and
//!   the inequality chain they support.
//! * [`cli`] — the `rainbow-aps` command-line front end.
//!
//! With the default `parallel` feature the heavy inner loops (search subtrees,
//! exhaustive matrix scans, rainbow censuses, audit cells) run on rayon;
//! without it every code path falls back to the sequential implementation
//! with identical results.

pub mod audit;
pub mod cli;
pub mod coloring;
pub mod error;
pub mod matrix;
pub mod numtheory;
pub mod progression;
pub mod search;

pub use error::{Error, Result};
