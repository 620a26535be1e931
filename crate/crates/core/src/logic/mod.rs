//! Syntax and static checking of Horn formulas over word structures.
//!
//! A formula quantifies a set of binary *computation predicates* over all
//! pairs of positions `(x, y)` of a word and constrains them with Horn
//! clauses.  Three clause classes are supported, differing in which atoms a
//! hypothesis may use and in the direction of the induction they express:
//!
//! * `pred` — offsets look backwards (`x-a`, `y-b`); letters are read at
//!   backward offsets of either variable.
//! * `pred-dio` — like `pred`, but letters may only be read on the diagonal
//!   (`x=y` must accompany every letter atom).
//! * `incl` — every clause is guarded by `x<=y` (or stronger) and computation
//!   atoms read inner intervals `(x+a, y-b)`.
//!
//! Comparisons against constants (`x>2`, `y=n-1`, ...) are *sugar*: each is
//! equivalent, uniformly in the word length, to a short conjunction of
//! `min`/`max` literals under the saturating position arithmetic.
//! [`desugar`] performs that expansion; [`validate`] checks fragment
//! membership (reporting each offending clause) and optionally inserts the
//! border guards that keep offset reads from silently saturating.

mod ast;
pub mod desugar;
pub mod validate;

pub use ast::*;
