//! Frozen numeric tolerances.
//!
//! | constant       | bound on                                              |
//! |----------------|-------------------------------------------------------|
//! | `KERNEL_EQUIV` | per-amplitude chunk kernel vs dense reference         |
//! | `ORACLE_EQUIV` | per-amplitude full run vs dense reference             |
//! | `UNITARY`      | elementwise deviation of M†M from the identity        |
//! | `NORM_DRIFT`   | drift of Σ|amp|² from 1 after a full circuit          |
//!
//! The ladder is deliberate: a single chunked gate reproduces the dense
//! arithmetic almost exactly, a whole distributed run accumulates rounding
//! across gates and the byte codec, and the norm is a sum over the entire
//! state so it carries the loosest bound.

pub const KERNEL_EQUIV: f64 = 1e-14;
pub const ORACLE_EQUIV: f64 = 1e-12;
pub const UNITARY: f64 = 1e-12;
pub const NORM_DRIFT: f64 = 1e-10;
