//! Horn-clause formulas interpreted over positional word structures, and the
//! machinery that connects them to real-time cellular automata and conjunctive
//! grammars.
//!
//! The crate is organised around one central object, [`logic::Formula`]: a set
//! of universally quantified Horn clauses in two position variables, evaluated
//! over the structure of a finite word (positions `1..=n`, one monadic letter
//! predicate per alphabet symbol, `min`/`max` markers, and saturating
//! successor/predecessor arithmetic).  A word is *accepted* when the least
//! model of the clause set does not derive the contradiction.
//!
//! On top of that sit:
//!
//! * [`fixpoint`] — the reference evaluator: a semi-naive least-fixpoint
//!   computation of the minimal model, used as the oracle everything else is
//!   checked against.
//! * [`normalize`] — rewriting a formula of one of the three clause classes
//!   (`pred`, `pred-dio`, `incl`) into its rigid normal form while preserving
//!   the accepted language.
//! * [`grid`] and [`ca`] — compiling a normal-form formula into a grid
//!   circuit and then into a real-time cellular automaton (sequential,
//!   parallel, or two-dimensional input mode), plus the reverse direction
//!   that re-expresses an automaton as a formula.
//! * [`grammar`] — linear conjunctive grammars and the two translations that
//!   exhibit their duality with `incl` formulas.
//! * [`corpus`] — the bundled example formulas and their independent
//!   reference deciders.

pub mod ca;
pub mod ca_transform;
pub mod corpus;
pub mod crosscheck;
pub mod fixpoint;
pub mod grammar;
pub mod grid;
pub mod letters;
pub mod logic;
pub mod normalize;
pub mod parse;
pub mod prophorn;
pub mod render;
pub mod sim;
