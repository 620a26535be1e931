//! Fragment-membership checking and border-guard insertion.
//!
//! Position arithmetic saturates at the word borders, so an offset read like
//! `Border(x-1,y-1)` silently reads position 1 when `x=1`.  Almost always the
//! author wants the clause not tofire there, which is what the guard literal
//! `~min(x)` expresses.  With [`ValidateOpts::insert_guards`] enabled (the
//! default), validation adds the missing guards — `x>a` for a backward read
//! over distance `a`, `v<=n-a` for a forward read — next to the atom they
//! protect, skipping any guard the clause already states.  `min`/`max`
//! literals are never guarded: testing saturation is exactly their job.

use super::desugar::{expand_const_atom, Expansion};
use super::{
    ArithAtom, CmpOp, ConstAtom, ConstRhs, Formula, FragmentKind, Hypothesis, InputLiteral,
    InputPred, Term, Var,
};
use crate::parse::{print_clause, print_hypothesis};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug)]
pub struct ValidateOpts {
    /// Insert border guards for offset letter/computation reads.
    pub insert_guards: bool,
    /// Largest allowed |offset| in any term (measured after sugar expansion).
    pub max_offset: u32,
}

impl Default for ValidateOpts {
    fn default() -> Self {
        ValidateOpts {
            insert_guards: true,
            max_offset: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    /// Index of the offending clause, if the problem is clause-local.
    pub clause: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.clause {
            Some(i) => write!(f, "clause {}: {}", i + 1, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// A validated formula together with non-fatal observations.
#[derive(Clone, Debug)]
pub struct Validated {
    pub formula: Formula,
    pub warnings: Vec<Diagnostic>,
}

/// Checks fragment membership and (optionally) inserts border guards.
/// On success the returned formula is the input with guards added; on
/// failure every violation is reported at once.
pub fn validate(formula: &Formula, opts: &ValidateOpts) -> Result<Validated, ValidationReport> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    check_structure(formula, &mut errors);
    if !errors.is_empty() {
        return Err(ValidationReport { errors, warnings });
    }

    let mut out = formula.clone();
    if opts.insert_guards {
        for cl in &mut out.clauses {
            insert_guards(cl);
        }
    }

    for (ci, cl) in out.clauses.iter().enumerate() {
        check_clause(&out, ci, cl, opts, &mut errors, &mut warnings);
    }

    if errors.is_empty() {
        Ok(Validated {
            formula: out,
            warnings,
        })
    } else {
        Err(ValidationReport { errors, warnings })
    }
}

fn check_structure(f: &Formula, errors: &mut Vec<Diagnostic>) {
    let arity = f.preds.len();
    let mut seen = BTreeSet::new();
    for name in &f.preds {
        if !seen.insert(name.clone()) {
            errors.push(Diagnostic {
                clause: None,
                message: format!("duplicate predicate name '{name}'"),
            });
        }
    }
    let check_pred = |id: usize, errors: &mut Vec<Diagnostic>| {
        if id >= arity {
            errors.push(Diagnostic {
                clause: None,
                message: format!("predicate id {id} out of range"),
            });
        }
    };
    if let Some(b) = f.bottom {
        check_pred(b, errors);
    }
    for cl in &f.clauses {
        if let super::Conclusion::Pred(p) = cl.concl {
            check_pred(p, errors);
        }
        for c in cl.comp_hyps() {
            check_pred(c.pred, errors);
        }
        for h in &cl.hyps {
            if let Hypothesis::Input(InputLiteral {
                pred: InputPred::Letter(l),
                ..
            }) = h
            {
                if *l >= f.alphabet.len() {
                    errors.push(Diagnostic {
                        clause: None,
                        message: format!("letter id {l} out of range"),
                    });
                }
            }
        }
    }
}

/// The guard that keeps a read at `var` offset `off` from saturating:
/// `var > a` for backward reads, `var <= n-a` for forward reads.
fn guard_for(var: Var, off: i32) -> Option<ConstAtom> {
    if off < 0 {
        Some(ConstAtom {
            var,
            op: CmpOp::Gt,
            rhs: ConstRhs::Const((-off) as u32),
        })
    } else if off > 0 {
        Some(ConstAtom {
            var,
            op: CmpOp::Le,
            rhs: ConstRhs::NMinus(off as u32),
        })
    } else {
        None
    }
}

fn term_guards(t: &Term, out: &mut Vec<ConstAtom>) {
    if let Some(g) = guard_for(t.var, t.offset) {
        out.push(g);
    }
}

/// Inserts missing border guards immediately before the hypotheses they
/// protect.  A guard is skipped when the clause already contains it as a
/// comparison atom or as its expanded `~min`/`~max` literal.
fn insert_guards(cl: &mut super::Clause) {
    // everything the clause already states, for dedup
    let mut present_consts: BTreeSet<ConstAtom> = BTreeSet::new();
    let mut present_lits: BTreeSet<InputLiteral> = BTreeSet::new();
    for h in &cl.hyps {
        match h {
            Hypothesis::Arith(ArithAtom::Const(c)) => {
                present_consts.insert(*c);
            }
            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Lt)) => {
                // x<y already implies x <= n-1 and y > 1
                present_consts.insert(ConstAtom {
                    var: Var::X,
                    op: CmpOp::Le,
                    rhs: ConstRhs::NMinus(1),
                });
                present_consts.insert(ConstAtom {
                    var: Var::Y,
                    op: CmpOp::Gt,
                    rhs: ConstRhs::Const(1),
                });
            }
            Hypothesis::Input(l) => {
                present_lits.insert(*l);
            }
            _ => {}
        }
    }

    let mut new_hyps = Vec::with_capacity(cl.hyps.len());
    for h in &cl.hyps {
        let mut guards = Vec::new();
        match h {
            Hypothesis::Input(InputLiteral {
                pred: InputPred::Letter(_),
                term,
                ..
            }) => term_guards(term, &mut guards),
            Hypothesis::Comp(c) => {
                term_guards(&c.arg1, &mut guards);
                term_guards(&c.arg2, &mut guards);
            }
            _ => {}
        }
        for g in guards {
            if present_consts.contains(&g) {
                continue;
            }
            let covered = match expand_const_atom(&g) {
                Expansion::Literals(ls) => ls.iter().all(|l| present_lits.contains(l)),
                _ => true,
            };
            if covered {
                continue;
            }
            present_consts.insert(g);
            new_hyps.push(Hypothesis::Arith(ArithAtom::Const(g)));
        }
        new_hyps.push(h.clone());
    }
    cl.hyps = new_hyps;
}

fn check_clause(
    f: &Formula,
    ci: usize,
    cl: &super::Clause,
    opts: &ValidateOpts,
    errors: &mut Vec<Diagnostic>,
    warnings: &mut Vec<Diagnostic>,
) {
    let kind = f.kind;
    let text = print_clause(f, cl);
    let error = |msg: String, errors: &mut Vec<Diagnostic>| {
        errors.push(Diagnostic {
            clause: Some(ci),
            message: format!("'{text}': {msg}"),
        });
    };

    let cap = opts.max_offset as i64;
    let check_offset = |t: &Term, what: &str, errors: &mut Vec<Diagnostic>| {
        if (t.offset as i64).abs() > cap {
            errors.push(Diagnostic {
                clause: Some(ci),
                message: format!(
                    "'{}': offset of {what} '{t}' exceeds the cap of {}",
                    print_clause(f, cl),
                    opts.max_offset
                ),
            });
        }
    };

    let mut has_letter = false;
    let mut has_eq = false;
    let mut has_interval_guard = false;

    for h in &cl.hyps {
        match h {
            Hypothesis::Input(l) => {
                check_offset(&l.term, "literal", errors);
                if let InputPred::Letter(_) = l.pred {
                    has_letter = true;
                    if !l.positive {
                        error("negation over a letter atom is not allowed".into(), errors);
                    }
                }
                if kind != FragmentKind::Incl && l.term.offset > 0 {
                    error(
                        format!(
                            "forward offset in '{}' ({} only looks backwards)",
                            print_hypothesis(f, h),
                            kind
                        ),
                        errors,
                    );
                }
            }
            Hypothesis::Arith(ArithAtom::VarCmp(op)) => match (kind, op) {
                (FragmentKind::Pred, _) => {
                    error("pred clauses cannot compare x and y".into(), errors)
                }
                (FragmentKind::PredDio, CmpOp::Eq) => has_eq = true,
                (FragmentKind::PredDio, _) => {
                    error("pred-dio admits only x=y between the variables".into(), errors)
                }
                (FragmentKind::Incl, CmpOp::Eq | CmpOp::Lt | CmpOp::Le) => {
                    has_interval_guard = true;
                }
                (FragmentKind::Incl, _) => error(
                    "incl clauses relate the variables by x=y, x<y, or x<=y only".into(),
                    errors,
                ),
            },
            Hypothesis::Arith(ArithAtom::Const(c)) => match expand_const_atom(c) {
                Expansion::True => warnings.push(Diagnostic {
                    clause: Some(ci),
                    message: format!("'{text}': hypothesis '{c}' always holds"),
                }),
                Expansion::False => warnings.push(Diagnostic {
                    clause: Some(ci),
                    message: format!(
                        "'{text}': hypothesis '{c}' can never hold; the clause has no effect"
                    ),
                }),
                Expansion::Literals(ls) => {
                    for l in &ls {
                        check_offset(&l.term, &format!("'{c}' (expanded)"), errors);
                        if kind != FragmentKind::Incl && l.term.offset > 0 {
                            error(
                                format!(
                                    "'{c}' reaches positions relative to n; {} cannot express it",
                                    kind
                                ),
                                errors,
                            );
                            break;
                        }
                    }
                }
            },
            Hypothesis::Comp(c) => {
                check_offset(&c.arg1, "atom argument", errors);
                check_offset(&c.arg2, "atom argument", errors);
                if c.arg1.var == c.arg2.var {
                    error(
                        format!(
                            "atom '{}' must use both variables",
                            print_hypothesis(f, h)
                        ),
                        errors,
                    );
                    continue;
                }
                match kind {
                    FragmentKind::Pred | FragmentKind::PredDio => {
                        if c.arg1.offset > 0 || c.arg2.offset > 0 {
                            error(
                                format!(
                                    "forward offset in '{}' ({} only looks backwards)",
                                    print_hypothesis(f, h),
                                    kind
                                ),
                                errors,
                            );
                        }
                    }
                    FragmentKind::Incl => {
                        if !c.is_straight() {
                            error(
                                format!(
                                    "transposed atom '{}' is not allowed in incl",
                                    print_hypothesis(f, h)
                                ),
                                errors,
                            );
                        } else if c.arg1.offset < 0 || c.arg2.offset > 0 {
                            error(
                                format!(
                                    "atom '{}' must read an inner interval (x+a, y-b)",
                                    print_hypothesis(f, h)
                                ),
                                errors,
                            );
                        }
                    }
                }
            }
        }
    }

    match kind {
        FragmentKind::PredDio => {
            if has_letter && !has_eq {
                error(
                    "a letter atom in pred-dio requires x=y in the same clause".into(),
                    errors,
                );
            }
            if has_eq && !has_letter {
                warnings.push(Diagnostic {
                    clause: Some(ci),
                    message: format!(
                        "'{text}': x=y without a letter atom (accepted as an extension)"
                    ),
                });
            }
        }
        FragmentKind::Incl => {
            if !has_interval_guard {
                error(
                    "every incl clause needs x<=y, x<y, or x=y among its hypotheses".into(),
                    errors,
                );
            }
        }
        FragmentKind::Pred => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_formula, print_clause};

    fn v(src: &str) -> Result<Validated, ValidationReport> {
        validate(&parse_formula(src).unwrap(), &ValidateOpts::default())
    }

    fn v_strict(src: &str) -> Result<Validated, ValidationReport> {
        validate(
            &parse_formula(src).unwrap(),
            &ValidateOpts {
                insert_guards: false,
                ..Default::default()
            },
        )
    }

    #[test]
    fn inserts_guards_for_offset_reads() {
        let r = v("logic pred\nalphabet ab\nQa(x-2) & R(x-1,y-1) -> R(x,y)\n").unwrap();
        let cl = &r.formula.clauses[0];
        let text = print_clause(&r.formula, cl);
        assert_eq!(text, "x>2 & Qa(x-2) & x>1 & y>1 & R(x-1,y-1) -> R(x,y)");
    }

    #[test]
    fn does_not_duplicate_existing_guards() {
        let r = v("logic pred\nalphabet ab\n~min(x) & ~min(y) & Border(x-1,y-1) -> Border(x,y)\n")
            .unwrap();
        let cl = &r.formula.clauses[0];
        assert_eq!(
            print_clause(&r.formula, cl),
            "~min(x) & ~min(y) & Border(x-1,y-1) -> Border(x,y)"
        );
    }

    #[test]
    fn guard_insertion_is_idempotent() {
        let r = v("logic pred\nalphabet ab\nQa(x-2) & R(x-1,y-1) -> R(x,y)\n").unwrap();
        let again = validate(&r.formula, &ValidateOpts::default()).unwrap();
        assert_eq!(r.formula, again.formula);
    }

    #[test]
    fn min_max_literals_are_never_guarded() {
        let r = v("logic pred\nalphabet ab\nmin(x-2) & max(y) -> R(x,y)\n").unwrap();
        assert_eq!(
            print_clause(&r.formula, &r.formula.clauses[0]),
            "min(x-2) & max(y) -> R(x,y)"
        );
    }

    #[test]
    fn rejects_forward_offsets_in_pred() {
        let err = v_strict("logic pred\nalphabet ab\nR(x+1,y) -> R(x,y)\n").unwrap_err();
        assert_eq!(err.errors.len(), 1);
        assert!(err.errors[0].message.contains("forward offset"));
    }

    #[test]
    fn rejects_n_relative_sugar_in_pred() {
        let err = v_strict("logic pred\nalphabet ab\nx<=n-2 -> R(x,y)\n").unwrap_err();
        assert!(err.errors[0].message.contains("relative to n"));
        // but x<=n-1 (= ~max(x)) is fine
        assert!(v_strict("logic pred\nalphabet ab\nx<=n-1 -> R(x,y)\n").is_ok());
    }

    #[test]
    fn dio_letter_atoms_need_diagonal() {
        let err = v_strict("logic pred-dio\nalphabet ab\nQa(x) -> R(x,y)\n").unwrap_err();
        assert!(err.errors[0].message.contains("x=y"));
        let ok = v_strict("logic pred-dio\nalphabet ab\nx=y & Qa(x) -> R(x,y)\n").unwrap();
        assert!(ok.warnings.is_empty());
        let warned = v_strict("logic pred-dio\nalphabet ab\nx=y & min(x) -> R(x,y)\n").unwrap();
        assert_eq!(warned.warnings.len(), 1);
    }

    #[test]
    fn incl_clauses_need_interval_guard() {
        let err = v_strict("logic incl\nalphabet ab\nQa(x) -> R(x,y)\n").unwrap_err();
        assert!(err.errors[0].message.contains("x<=y"));
        assert!(v_strict("logic incl\nalphabet ab\nx<y & Qa(x) -> R(x,y)\n").is_ok());
    }

    #[test]
    fn incl_atoms_read_inner_intervals_only() {
        let err = v_strict("logic incl\nalphabet ab\nx<=y & R(x-1,y) -> R(x,y)\n").unwrap_err();
        assert!(err.errors[0].message.contains("inner interval"));
        let err2 = v_strict("logic incl\nalphabet ab\nx<=y & R(y,x) -> R(x,y)\n").unwrap_err();
        assert!(err2.errors[0].message.contains("transposed"));
    }

    #[test]
    fn incl_guards_forward_reads_against_overflow() {
        let r = v("logic incl\nalphabet ab\nx<=y & Qa(x+2) & S(x+1,y-1) -> R(x,y)\n").unwrap();
        assert_eq!(
            print_clause(&r.formula, &r.formula.clauses[0]),
            "x<=y & x<=n-2 & Qa(x+2) & x<=n-1 & y>1 & S(x+1,y-1) -> R(x,y)"
        );
    }

    #[test]
    fn offset_cap_is_enforced() {
        let err = v("logic pred\nalphabet ab\nR(x-9,y) -> R(x,y)\n").unwrap_err();
        assert!(err.errors.iter().any(|e| e.message.contains("cap")));
        // sugar measured after expansion: x>9 expands to ~min(x-8), within cap
        assert!(v("logic pred\nalphabet ab\nx>9 -> R(x,y)\n").is_ok());
        let err2 = v("logic pred\nalphabet ab\nx>10 -> R(x,y)\n").unwrap_err();
        assert!(err2.errors[0].message.contains("cap"));
    }

    #[test]
    fn transposed_atoms_are_legal_in_pred() {
        let r = v("logic pred\nalphabet ab\nR(y-1,x) -> R(x,y)\n").unwrap();
        let text = print_clause(&r.formula, &r.formula.clauses[0]);
        assert_eq!(text, "y>1 & R(y-1,x) -> R(x,y)");
    }

    #[test]
    fn negated_letters_rejected() {
        let err = v("logic pred\nalphabet ab\n~Qa(x) -> R(x,y)\n").unwrap_err();
        assert!(err.errors[0].message.contains("negation over a letter"));
    }
}
