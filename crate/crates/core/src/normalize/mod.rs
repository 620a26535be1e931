//! Normal-form construction for the three clause fragments.
//!
//! Each fragment has a strict normal form in which only three clause shapes
//! survive:
//!
//! * input clauses that translate one letter of the word into computation
//!   predicates at designated border sites,
//! * a single contradiction clause reading the designated bottom predicate
//!   at its corner site, and
//! * computation clauses whose hypotheses read immediate neighbours.
//!
//! [`normalize`] rewrites an arbitrary validated formula into this form
//! without changing its language.  The construction is a pipeline of
//! elementary steps, each of which preserves derivability site by site; the
//! intermediate formula after every step is recorded in a
//! [`NormalizationTrace`] so tests can cross-check each step against the
//! reference fixpoint semantics in isolation.
//!
//! [`check_normal`] is the corresponding recognizer: it verifies membership
//! in the normal form syntactically and reports every violation.

mod elim;
mod incl;
mod pred;
pub mod shape;

use crate::logic::{
    ArithAtom, Clause, CmpOp, Conclusion, Formula, FragmentKind, Hypothesis, InputLiteral,
    InputPred, PredId, Var,
};
use crate::parse::print_clause;
use crate::prophorn::SupportError;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug)]
pub enum NormalizeError {
    /// Offset reads without their margin guards; run validation with guard
    /// insertion first.
    Guards(Vec<shape::ShapeError>),
    /// The propositional analysis in the final step exceeded its budget.
    Support(SupportError),
    /// The formula's language cannot be expressed in the target normal form.
    Unrealizable(String),
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::Guards(errs) => {
                writeln!(f, "unguarded offset reads:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            NormalizeError::Support(e) => write!(f, "{e}"),
            NormalizeError::Unrealizable(msg) => write!(f, "not realizable: {msg}"),
        }
    }
}

impl std::error::Error for NormalizeError {}

impl From<SupportError> for NormalizeError {
    fn from(e: SupportError) -> Self {
        NormalizeError::Support(e)
    }
}

#[derive(Clone, Debug)]
pub struct NormalizeOpts {
    /// Cap on minimal supports per derived variable in the final
    /// clause-elimination step.
    pub support_cap: usize,
}

impl Default for NormalizeOpts {
    fn default() -> Self {
        NormalizeOpts { support_cap: 512 }
    }
}

/// The formula after each named pipeline step, in order.  Every entry is a
/// complete formula with the same language as the original.
#[derive(Clone, Debug, Default)]
pub struct NormalizationTrace {
    pub steps: Vec<(String, Formula)>,
}

impl NormalizationTrace {
    pub fn push(&mut self, name: &str, f: &Formula) {
        self.steps.push((name.to_string(), f.clone()));
    }

    pub fn get(&self, name: &str) -> Option<&Formula> {
        self.steps.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

/// Result of a successful normalization.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub formula: Formula,
    pub trace: NormalizationTrace,
}

/// Rewrites a validated formula into the fragment's normal form without
/// changing its language.  The input must already carry its margin guards
/// (run validation with guard insertion first); the trace records the
/// formula after every pipeline stage, each stage preserving the language.
pub fn normalize(f: &Formula, opts: &NormalizeOpts) -> Result<Normalized, NormalizeError> {
    let canon = shape::canonicalize(f);
    shape::check_guards(&canon).map_err(NormalizeError::Guards)?;
    let mut trace = NormalizationTrace::default();
    trace.push("canonical", &canon);
    let out = match f.kind {
        FragmentKind::Pred | FragmentKind::PredDio => {
            let staged = pred::run(&canon, &mut trace);
            let staged = prune_dead(&staged);
            trace.push("prune", &staged);
            elim::eliminate(&staged, opts)?
        }
        FragmentKind::Incl => {
            let staged = incl::run(&canon, &mut trace);
            let staged = prune_dead(&staged);
            trace.push("prune", &staged);
            elim::eliminate_incl(&staged, opts)?
        }
    };
    let mut out = prune_dead(&out);
    dedup_clauses(&mut out);
    let out = bottom_first(&out);
    trace.push("normal", &out);
    Ok(Normalized {
        formula: out,
        trace,
    })
}

/// Renumbers predicates so the designated bottom predicate has index 0.
fn bottom_first(f: &Formula) -> Formula {
    let b = match f.bottom {
        Some(b) if b != 0 => b,
        _ => return f.clone(),
    };
    let mut out = f.clone();
    out.preds.swap(0, b);
    out.bottom = Some(0);
    let map = |p: PredId| match p {
        0 => b,
        p if p == b => 0,
        p => p,
    };
    for cl in &mut out.clauses {
        for h in &mut cl.hyps {
            if let Hypothesis::Comp(c) = h {
                c.pred = map(c.pred);
            }
        }
        if let Conclusion::Pred(p) = cl.concl {
            cl.concl = Conclusion::Pred(map(p));
        }
    }
    out
}

/// Removes clauses and predicates that cannot contribute to a contradiction:
/// only predicates backward-reachable from a `FALSE` clause are kept.
/// Predicate ids are renumbered; the language is unchanged because clause
/// hypotheses are positive, so dropping a dead conclusion never unblocks
/// anything.
pub fn prune_dead(f: &Formula) -> Formula {
    let mut needed = vec![false; f.preds.len()];
    if let Some(b) = f.bottom {
        needed[b] = true;
    }
    for cl in &f.clauses {
        if cl.concl == Conclusion::False {
            for c in cl.comp_hyps() {
                needed[c.pred] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for cl in &f.clauses {
            if let Conclusion::Pred(p) = cl.concl {
                if needed[p] {
                    for c in cl.comp_hyps() {
                        if !needed[c.pred] {
                            needed[c.pred] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut remap: Vec<Option<PredId>> = vec![None; f.preds.len()];
    let mut out = Formula::new(f.kind, f.alphabet.clone());
    for (id, name) in f.preds.iter().enumerate() {
        if needed[id] {
            remap[id] = Some(out.preds.len());
            out.preds.push(name.clone());
        }
    }
    out.bottom = f.bottom.and_then(|b| remap[b]);
    for cl in &f.clauses {
        let keep = match cl.concl {
            Conclusion::False => true,
            Conclusion::Pred(p) => needed[p],
        };
        if !keep {
            continue;
        }
        let mut hyps = cl.hyps.clone();
        for h in &mut hyps {
            if let Hypothesis::Comp(c) = h {
                c.pred = remap[c.pred].expect("hypothesis of a live clause is live");
            }
        }
        let concl = match cl.concl {
            Conclusion::False => Conclusion::False,
            Conclusion::Pred(p) => Conclusion::Pred(remap[p].unwrap()),
        };
        out.clauses.push(Clause::new(hyps, concl));
    }
    out
}

/// Drops duplicate clauses (same conclusion, same hypothesis set regardless
/// of order), keeping first occurrences.
pub fn dedup_clauses(f: &mut Formula) {
    let mut seen: BTreeSet<(Vec<Hypothesis>, Conclusion)> = BTreeSet::new();
    f.clauses.retain(|cl| {
        let mut key = cl.hyps.clone();
        key.sort();
        key.dedup();
        seen.insert((key, cl.concl))
    });
}

// ---------------------------------------------------------------------------
// Normal-form recognition

fn lit0(pred: InputPred, positive: bool, var: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred,
        positive,
        term: crate::logic::Term { var, offset: 0 },
    })
}

/// Checks one computation clause of the two predecessor normal forms: every
/// hypothesis reads an immediate predecessor site paired with its border
/// guard, and nothing else.
fn check_pred_computation(cl: &Clause, errors: &mut Vec<String>, text: &str) {
    let mut reads_x = false;
    let mut reads_y = false;
    let mut guard_x = false;
    let mut guard_y = false;
    let mut atoms = 0usize;
    for h in &cl.hyps {
        match h {
            Hypothesis::Comp(c) if c.is_straight() => match (c.arg1.offset, c.arg2.offset) {
                (-1, 0) => {
                    reads_x = true;
                    atoms += 1;
                }
                (0, -1) => {
                    reads_y = true;
                    atoms += 1;
                }
                _ => errors.push(format!(
                    "'{text}': computation hypothesis must read (x-1,y) or (x,y-1)"
                )),
            },
            Hypothesis::Input(l)
                if l.pred == InputPred::Min && !l.positive && l.term.offset == 0 =>
            {
                match l.term.var {
                    Var::X => guard_x = true,
                    Var::Y => guard_y = true,
                }
            }
            _ => errors.push(format!(
                "'{text}': hypothesis not allowed in a computation clause"
            )),
        }
    }
    if atoms == 0 {
        errors.push(format!("'{text}': computation clause reads no atom"));
    }
    if reads_x != guard_x {
        errors.push(format!(
            "'{text}': an (x-1,y) read and its ~min(x) guard must appear together"
        ));
    }
    if reads_y != guard_y {
        errors.push(format!(
            "'{text}': an (x,y-1) read and its ~min(y) guard must appear together"
        ));
    }
}

/// Checks one computation clause of the inclusion normal form: the strict
/// interval guard plus reads of the two inner neighbour intervals.
fn check_incl_computation(cl: &Clause, errors: &mut Vec<String>, text: &str) {
    let mut guard = false;
    let mut atoms = 0usize;
    for h in &cl.hyps {
        match h {
            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Lt)) => guard = true,
            Hypothesis::Comp(c)
                if c.is_straight()
                    && matches!((c.arg1.offset, c.arg2.offset), (1, 0) | (0, -1)) =>
            {
                atoms += 1;
            }
            _ => errors.push(format!(
                "'{text}': hypothesis not allowed in a computation clause"
            )),
        }
    }
    if !guard {
        errors.push(format!("'{text}': computation clause needs the x<y guard"));
    }
    if atoms == 0 {
        errors.push(format!("'{text}': computation clause reads no atom"));
    }
}

/// Does the hypothesis set equal `expected` as a multiset?
fn hyps_match(cl: &Clause, expected: &mut Vec<Hypothesis>) -> bool {
    let mut have = cl.hyps.clone();
    have.sort();
    expected.sort();
    have == *expected
}

/// Verifies strict normal-form membership, reporting every violation.
///
/// The accepted shapes per fragment are exactly the ones produced by
/// [`normalize`]; see the module documentation.
pub fn check_normal(f: &Formula) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    let bottom = match f.bottom {
        Some(b) => Some(b),
        None => {
            errors.push("no designated bottom predicate".to_string());
            None
        }
    };

    let mut false_clauses = 0usize;
    for cl in &f.clauses {
        let text = print_clause(f, cl);
        let is_input = cl.hyps.iter().any(|h| match h {
            Hypothesis::Input(l) => {
                matches!(l.pred, InputPred::Letter(_)) || (l.pred == InputPred::Min && l.positive)
            }
            _ => false,
        });

        if cl.concl == Conclusion::False {
            false_clauses += 1;
            let mut expected = match f.kind {
                FragmentKind::Incl => vec![
                    lit0(InputPred::Min, true, Var::X),
                    lit0(InputPred::Max, true, Var::Y),
                ],
                _ => vec![
                    lit0(InputPred::Max, true, Var::X),
                    lit0(InputPred::Max, true, Var::Y),
                ],
            };
            if let Some(b) = bottom {
                expected.push(Hypothesis::Comp(crate::logic::CompAtom::xy(b, 0, 0)));
            }
            if bottom.is_some() && !hyps_match(cl, &mut expected) {
                errors.push(format!(
                    "'{text}': contradiction clause must read exactly the bottom predicate at its corner site"
                ));
            }
            continue;
        }

        if is_input {
            let ok = match f.kind {
                FragmentKind::Pred => f.alphabet.iter().any(|(s, _)| {
                    [true, false].iter().any(|&second| {
                        let mut expected = vec![
                            lit0(InputPred::Min, true, Var::X),
                            lit0(InputPred::Min, second, Var::Y),
                            lit0(InputPred::Letter(s), true, Var::Y),
                        ];
                        hyps_match(cl, &mut expected)
                    })
                }),
                FragmentKind::PredDio => f.alphabet.iter().any(|(s, _)| {
                    [true, false].iter().any(|&first| {
                        let mut expected = vec![
                            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Eq)),
                            lit0(InputPred::Min, first, Var::X),
                            lit0(InputPred::Letter(s), true, Var::X),
                        ];
                        hyps_match(cl, &mut expected)
                    })
                }),
                FragmentKind::Incl => f.alphabet.iter().any(|(s, _)| {
                    let mut expected = vec![
                        Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Eq)),
                        lit0(InputPred::Letter(s), true, Var::X),
                    ];
                    hyps_match(cl, &mut expected)
                }),
            };
            if !ok {
                errors.push(format!("'{text}': not an input clause of the {} normal form", f.kind));
            }
            continue;
        }

        match f.kind {
            FragmentKind::Incl => check_incl_computation(cl, &mut errors, &text),
            _ => check_pred_computation(cl, &mut errors, &text),
        }
    }

    if false_clauses != 1 {
        errors.push(format!(
            "normal form has exactly one contradiction clause, found {false_clauses}"
        ));
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub fn is_normal(f: &Formula) -> bool {
    check_normal(f).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn parse(src: &str) -> Formula {
        parse_formula(src).unwrap()
    }

    #[test]
    fn recognizes_a_normal_pred_formula() {
        let f = parse(
            "logic pred\nalphabet ab\nfalse B\n\
             min(x) & min(y) & Qa(y) -> B(x,y)\n\
             min(x) & ~min(y) & Qa(y) -> B(x,y)\n\
             ~min(x) & B(x-1,y) -> B(x,y)\n\
             max(x) & max(y) & B(x,y) -> FALSE\n",
        );
        assert!(is_normal(&f), "{:?}", check_normal(&f));
    }

    #[test]
    fn recognizes_a_normal_incl_formula() {
        let f = parse(
            "logic incl\nalphabet ab\nfalse B\n\
             x=y & Qa(x) -> B(x,y)\n\
             x<y & B(x+1,y) & B(x,y-1) -> B(x,y)\n\
             min(x) & max(y) & B(x,y) -> FALSE\n",
        );
        assert!(is_normal(&f), "{:?}", check_normal(&f));
    }

    #[test]
    fn rejects_shape_violations() {
        // missing guard next to the read
        let f = parse(
            "logic pred\nalphabet ab\nfalse B\n\
             min(x) & min(y) & Qa(y) -> B(x,y)\n\
             B(x-1,y) -> B(x,y)\n\
             max(x) & max(y) & B(x,y) -> FALSE\n",
        );
        let errs = check_normal(&f).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("~min(x)")), "{errs:?}");

        // letter read on the wrong variable
        let g = parse(
            "logic pred\nalphabet ab\nfalse B\n\
             min(x) & min(y) & Qa(x) -> B(x,y)\n\
             max(x) & max(y) & B(x,y) -> FALSE\n",
        );
        assert!(!is_normal(&g));

        // two contradiction clauses
        let h = parse(
            "logic pred\nalphabet ab\nfalse B\n\
             min(x) & min(y) & Qa(y) -> B(x,y)\n\
             max(x) & max(y) & B(x,y) -> FALSE\n\
             max(x) & max(y) & B(x,y) -> FALSE\n",
        );
        assert!(!is_normal(&h));
    }

    #[test]
    fn corpus_formulas_are_not_yet_normal() {
        for e in crate::corpus::entries() {
            let f = parse(e.source);
            assert!(!is_normal(&f), "{} unexpectedly normal", e.name);
        }
    }

    #[test]
    fn prune_keeps_exactly_the_contradiction_cone() {
        let f = parse(
            "logic pred\nalphabet ab\n\
             min(x) & min(y) -> A(x,y)\n\
             A(x,y) -> B(x,y)\n\
             A(x,y) -> Dead(x,y)\n\
             Dead2(x,y) -> Dead2(x,y)\n\
             max(x) & max(y) & B(x,y) -> FALSE\n",
        );
        let p = prune_dead(&f);
        assert_eq!(p.preds, vec!["A".to_string(), "B".to_string()]);
        assert_eq!(p.clauses.len(), 3);
        // ids were remapped consistently
        let printed: Vec<String> = p.clauses.iter().map(|c| print_clause(&p, c)).collect();
        assert_eq!(
            printed,
            vec![
                "min(x) & min(y) -> A(x,y)",
                "A(x,y) -> B(x,y)",
                "max(x) & max(y) & B(x,y) -> FALSE",
            ]
        );
    }

    #[test]
    fn dedup_ignores_hypothesis_order() {
        let mut f = parse(
            "logic pred\nalphabet ab\n\
             min(x) & Qa(y) -> R(x,y)\n\
             Qa(y) & min(x) -> R(x,y)\n\
             min(x) & Qa(y) & Qa(y) -> R(x,y)\n",
        );
        dedup_clauses(&mut f);
        assert_eq!(f.clauses.len(), 1);
    }

    /// Rejection conditioned on the final letter AND an unstable fact about
    /// the word length has no equivalent in the diagonal normal form: the
    /// corner's letter is readable only by input clauses, which cannot also
    /// see the neighbours, and every neighbour fact is independent of that
    /// letter.  The pipeline must refuse rather than emit a wrong formula.
    #[test]
    fn reports_diagonal_corner_conjunctions_as_unrealizable() {
        let src = "logic pred-dio\nalphabet ab\n\
             x=y & min(x) & Qa(x) -> Odd(x,y)\n\
             x=y & min(x) & Qb(x) -> Odd(x,y)\n\
             Odd(x-1,y-1) -> Even(x,y)\n\
             Even(x-1,y-1) -> Odd(x,y)\n\
             max(x) & max(y) & x=y & Qa(x) & Even(x,y) -> FALSE\n";
        let f = parse(src);
        let v = crate::logic::validate::validate(&f, &crate::logic::validate::ValidateOpts::default())
            .unwrap();
        let err = normalize(&v.formula, &NormalizeOpts::default()).unwrap_err();
        assert!(
            matches!(err, NormalizeError::Unrealizable(_)),
            "expected the unrealizable report, got {err:?}"
        );
    }
}
