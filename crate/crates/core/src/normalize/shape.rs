//! Clause canonicalization ahead of normalization proper.
//!
//! Brings every hypothesis into a small per-fragment menu:
//!
//! * predecessor fragments — input literals `Q_s(v)`, `(~)min(v)`,
//!   `(~)max(v)` at offset 0, letters at non-positive offsets, and constant
//!   atoms `v = a` / `v > a` with `a >= 2` (the `a = 1` forms are the
//!   `min`/`~min` literals);
//! * inclusion fragment — letters at arbitrary offsets, the clause guard
//!   (`x=y`, `x<y`, `x<=y`), and constant atoms `v = a`, `v > a` (`a >= 1`),
//!   `v = n-b`, `v < n-b` (`b >= 0`); no bare `min`/`max` literals remain.
//!
//! Offset `min`/`max` literals are resolved under the saturating semantics
//! of position arithmetic, where e.g. `min(v-a)` means `v <= a+1` and
//! `max(v-a)` (for `a >= 1`) can only hold on one-letter words.  Some
//! resolutions split a clause into several copies; all are exact for every
//! word length.
//!
//! Afterwards [`check_guards`] verifies that every offset read is covered by
//! a margin guard already present in the clause, which the shift-predicate
//! construction downstream relies on.

use crate::logic::{
    Clause, CmpOp, ConstAtom, ConstRhs, FragmentKind, Formula, Hypothesis, InputLiteral,
    InputPred, Term, Var,
};
use crate::parse::print_hypothesis;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeError {
    pub clause: usize,
    pub message: String,
}

impl std::fmt::Display for ShapeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "clause {}: {}", self.clause, self.message)
    }
}

/// One hypothesis canonicalized into zero or more alternative replacement
/// conjunctions: the clause splits into one copy per alternative.
enum Canon {
    Keep,
    /// Replace by these conjunctions (empty vec = hypothesis unsatisfiable,
    /// drop the whole clause).
    Cases(Vec<Vec<Hypothesis>>),
}

fn eq_const(var: Var, a: u32) -> Hypothesis {
    Hypothesis::Arith(crate::logic::ArithAtom::Const(ConstAtom {
        var,
        op: CmpOp::Eq,
        rhs: ConstRhs::Const(a),
    }))
}

fn gt_const(var: Var, a: u32) -> Hypothesis {
    Hypothesis::Arith(crate::logic::ArithAtom::Const(ConstAtom {
        var,
        op: CmpOp::Gt,
        rhs: ConstRhs::Const(a),
    }))
}

fn eq_nminus(var: Var, b: u32) -> Hypothesis {
    Hypothesis::Arith(crate::logic::ArithAtom::Const(ConstAtom {
        var,
        op: CmpOp::Eq,
        rhs: ConstRhs::NMinus(b),
    }))
}

fn lt_nminus(var: Var, b: u32) -> Hypothesis {
    Hypothesis::Arith(crate::logic::ArithAtom::Const(ConstAtom {
        var,
        op: CmpOp::Lt,
        rhs: ConstRhs::NMinus(b),
    }))
}

fn lit(pred: InputPred, positive: bool, var: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred,
        positive,
        term: Term { var, offset: 0 },
    })
}

/// `min(v)` under predecessor conventions, `v = 1` under inclusion ones.
fn is_one(kind: FragmentKind, var: Var) -> Hypothesis {
    match kind {
        FragmentKind::Incl => eq_const(var, 1),
        _ => lit(InputPred::Min, true, var),
    }
}

fn above_one(kind: FragmentKind, var: Var) -> Hypothesis {
    match kind {
        FragmentKind::Incl => gt_const(var, 1),
        _ => lit(InputPred::Min, false, var),
    }
}

fn is_last(kind: FragmentKind, var: Var) -> Hypothesis {
    match kind {
        FragmentKind::Incl => eq_nminus(var, 0),
        _ => lit(InputPred::Max, true, var),
    }
}

fn below_last(kind: FragmentKind, var: Var) -> Hypothesis {
    match kind {
        FragmentKind::Incl => lt_nminus(var, 0),
        _ => lit(InputPred::Max, false, var),
    }
}

/// `v = a` in menu form: `a = 1` is the first-position form.
fn eq_pos(kind: FragmentKind, var: Var, a: u32) -> Hypothesis {
    if a == 1 {
        is_one(kind, var)
    } else {
        eq_const(var, a)
    }
}

/// `v > a` in menu form: `a = 1` is the not-first form.
fn gt_pos(kind: FragmentKind, var: Var, a: u32) -> Hypothesis {
    if a == 1 {
        above_one(kind, var)
    } else {
        gt_const(var, a)
    }
}

/// `v = n - b` in menu form: `b = 0` is the last-position form.
fn eq_end(kind: FragmentKind, var: Var, b: u32) -> Hypothesis {
    if b == 0 {
        is_last(kind, var)
    } else {
        eq_nminus(var, b)
    }
}

/// `v < n - b` in menu form: `b = 0` is the not-last form.
fn lt_end(kind: FragmentKind, var: Var, b: u32) -> Hypothesis {
    if b == 0 {
        below_last(kind, var)
    } else {
        lt_nminus(var, b)
    }
}

/// `n = 1`, under saturation equivalent to `min(v) & max(v)` for either v.
fn one_letter_word(kind: FragmentKind, var: Var) -> Vec<Hypothesis> {
    vec![is_one(kind, var), is_last(kind, var)]
}

/// `n >= 2` as the union of a `v >= 2` copy and a `v < n` copy.
fn at_least_two(kind: FragmentKind, var: Var) -> Vec<Vec<Hypothesis>> {
    vec![vec![above_one(kind, var)], vec![below_last(kind, var)]]
}

/// Exact meaning of an extremum literal at a saturating offset.
fn canon_minmax(kind: FragmentKind, l: &InputLiteral) -> Canon {
    let v = l.term.var;
    let a = l.term.offset;
    match (&l.pred, l.positive) {
        (InputPred::Min, true) => {
            if a == 0 {
                if kind == FragmentKind::Incl {
                    Canon::Cases(vec![vec![eq_const(v, 1)]])
                } else {
                    Canon::Keep
                }
            } else if a < 0 {
                // min(v-k)  <=>  v <= k+1: one copy per admissible value
                let k = (-a) as u32;
                Canon::Cases((1..=k + 1).map(|i| vec![eq_pos(kind, v, i)]).collect())
            } else {
                // min(v+k), k>=1: position v+k saturates to n, so n = 1
                Canon::Cases(vec![one_letter_word(kind, v)])
            }
        }
        (InputPred::Min, false) => {
            if a == 0 {
                if kind == FragmentKind::Incl {
                    Canon::Cases(vec![vec![gt_const(v, 1)]])
                } else {
                    Canon::Keep
                }
            } else if a < 0 {
                // ~min(v-k)  <=>  v > k+1
                Canon::Cases(vec![vec![gt_pos(kind, v, (-a) as u32 + 1)]])
            } else {
                // ~min(v+k), k>=1  <=>  n >= 2
                Canon::Cases(at_least_two(kind, v))
            }
        }
        (InputPred::Max, true) => {
            if a == 0 {
                if kind == FragmentKind::Incl {
                    Canon::Cases(vec![vec![eq_nminus(v, 0)]])
                } else {
                    Canon::Keep
                }
            } else if a < 0 {
                // max(v-k), k>=1: saturates below n unless the word is "n=1"
                Canon::Cases(vec![one_letter_word(kind, v)])
            } else {
                // max(v+k)  <=>  v >= n-k: one copy per distance from the end
                let k = a as u32;
                Canon::Cases((0..=k).map(|i| vec![eq_end(kind, v, i)]).collect())
            }
        }
        (InputPred::Max, false) => {
            if a == 0 {
                if kind == FragmentKind::Incl {
                    Canon::Cases(vec![vec![lt_nminus(v, 0)]])
                } else {
                    Canon::Keep
                }
            } else if a < 0 {
                // ~max(v-k), k>=1  <=>  n >= 2
                Canon::Cases(at_least_two(kind, v))
            } else {
                // ~max(v+k)  <=>  v < n-k
                Canon::Cases(vec![vec![lt_end(kind, v, a as u32)]])
            }
        }
        (InputPred::Letter(_), _) => Canon::Keep,
    }
}

/// Rewrites a constant comparison into the canonical menu.
fn canon_const(kind: FragmentKind, c: &ConstAtom) -> Canon {
    let v = c.var;
    match c.rhs {
        ConstRhs::Const(k) => match c.op {
            CmpOp::Eq => {
                if k == 0 {
                    Canon::Cases(vec![]) // positions start at 1
                } else if k == 1 {
                    Canon::Cases(vec![vec![is_one(kind, v)]])
                } else {
                    Canon::Keep
                }
            }
            CmpOp::Gt => {
                if k == 0 {
                    Canon::Cases(vec![vec![]]) // always true
                } else if k == 1 && kind != FragmentKind::Incl {
                    Canon::Cases(vec![vec![above_one(kind, v)]])
                } else {
                    Canon::Keep
                }
            }
            CmpOp::Ge => {
                if k <= 1 {
                    Canon::Cases(vec![vec![]]) // positions are always >= 1
                } else {
                    Canon::Cases(vec![vec![gt_pos(kind, v, k - 1)]])
                }
            }
            // upper bounds by a constant: finitely many admissible values
            CmpOp::Lt => Canon::Cases((1..k).map(|i| vec![eq_pos(kind, v, i)]).collect()),
            CmpOp::Le => Canon::Cases((1..=k).map(|i| vec![eq_pos(kind, v, i)]).collect()),
        },
        ConstRhs::NMinus(b) => match c.op {
            CmpOp::Eq => {
                if b == 0 && kind != FragmentKind::Incl {
                    Canon::Cases(vec![vec![is_last(kind, v)]])
                } else {
                    Canon::Keep
                }
            }
            CmpOp::Lt => {
                if b == 0 && kind != FragmentKind::Incl {
                    Canon::Cases(vec![vec![below_last(kind, v)]])
                } else {
                    Canon::Keep
                }
            }
            CmpOp::Le => {
                if b == 0 {
                    Canon::Cases(vec![vec![]]) // v <= n always holds
                } else {
                    Canon::Cases(vec![vec![lt_end(kind, v, b - 1)]])
                }
            }
            // lower bounds relative to n: finitely many distances from the end
            CmpOp::Gt => Canon::Cases((0..b).map(|i| vec![eq_end(kind, v, i)]).collect()),
            CmpOp::Ge => Canon::Cases((0..=b).map(|i| vec![eq_end(kind, v, i)]).collect()),
        },
    }
}

fn canon_hypothesis(kind: FragmentKind, h: &Hypothesis) -> Canon {
    match h {
        Hypothesis::Input(l) => canon_minmax(kind, l),
        Hypothesis::Arith(crate::logic::ArithAtom::Const(c)) => {
            // v <= n - b guards arrive as Le over NMinus via Lt rewriting in
            // the parser; normalize whatever op survived validation
            canon_const(kind, c)
        }
        Hypothesis::Arith(crate::logic::ArithAtom::VarCmp(_)) => Canon::Keep,
        Hypothesis::Comp(_) => Canon::Keep,
    }
}

fn push_dedup(hyps: &mut Vec<Hypothesis>, h: Hypothesis) {
    if !hyps.contains(&h) {
        hyps.push(h);
    }
}

/// Canonicalizes every clause, splitting into copies where a hypothesis
/// resolves to a union of cases.
pub fn canonicalize(formula: &Formula) -> Formula {
    let mut out = formula.clone();
    out.clauses.clear();
    for clause in &formula.clauses {
        let mut variants: Vec<Vec<Hypothesis>> = vec![Vec::new()];
        let mut dead = false;
        for h in &clause.hyps {
            match canon_hypothesis(formula.kind, h) {
                Canon::Keep => {
                    for v in &mut variants {
                        push_dedup(v, h.clone());
                    }
                }
                Canon::Cases(cases) => {
                    if cases.is_empty() {
                        dead = true;
                        break;
                    }
                    let mut next = Vec::with_capacity(variants.len() * cases.len());
                    for v in &variants {
                        for case in &cases {
                            let mut nv = v.clone();
                            for ch in case {
                                push_dedup(&mut nv, ch.clone());
                            }
                            next.push(nv);
                        }
                    }
                    variants = next;
                }
            }
        }
        if dead {
            continue;
        }
        for hyps in variants {
            out.clauses.push(Clause {
                hyps,
                concl: clause.concl.clone(),
            });
        }
    }
    out
}

/// Does the clause's hypothesis set syntactically entail `v > k` (`k >= 1`)?
fn entails_gt(clause: &Clause, v: Var, k: u32) -> bool {
    clause.hyps.iter().any(|h| match h {
        Hypothesis::Input(l) => {
            l.term.var == v && l.term.offset == 0 && l.pred == InputPred::Min && !l.positive && k == 1
        }
        Hypothesis::Arith(crate::logic::ArithAtom::Const(c)) => {
            c.var == v
                && match (c.op, c.rhs) {
                    (CmpOp::Gt, ConstRhs::Const(a)) => a >= k,
                    (CmpOp::Eq, ConstRhs::Const(a)) => a > k,
                    _ => false,
                }
        }
        Hypothesis::Arith(crate::logic::ArithAtom::VarCmp(op)) => {
            // x < y pins y > 1 (and nothing more at the margin)
            v == Var::Y && *op == CmpOp::Lt && k == 1
        }
        _ => false,
    })
}

/// Does the clause's hypothesis set syntactically entail `v <= n - k`
/// (`k >= 1`)?
fn entails_le_nminus(clause: &Clause, v: Var, k: u32) -> bool {
    clause.hyps.iter().any(|h| match h {
        Hypothesis::Input(l) => {
            l.term.var == v && l.term.offset == 0 && l.pred == InputPred::Max && !l.positive && k == 1
        }
        Hypothesis::Arith(crate::logic::ArithAtom::Const(c)) => {
            c.var == v
                && match (c.op, c.rhs) {
                    (CmpOp::Lt, ConstRhs::NMinus(b)) => b + 1 >= k,
                    (CmpOp::Eq, ConstRhs::NMinus(b)) => b >= k,
                    (CmpOp::Eq, ConstRhs::Const(_)) => false,
                    _ => false,
                }
        }
        Hypothesis::Arith(crate::logic::ArithAtom::VarCmp(op)) => {
            v == Var::X && *op == CmpOp::Lt && k == 1
        }
        _ => false,
    })
}

/// Verifies that every offset read has its margin guard in the same clause.
/// The shift predicates introduced later have exact in-range contracts, so
/// replacing an unguarded saturating read through them would change meaning.
pub fn check_guards(formula: &Formula) -> Result<(), Vec<ShapeError>> {
    let mut errors = Vec::new();
    for (ci, clause) in formula.clauses.iter().enumerate() {
        let mut need: Vec<(Var, i32, String)> = Vec::new();
        for h in &clause.hyps {
            match h {
                Hypothesis::Input(l) => {
                    if matches!(l.pred, InputPred::Letter(_)) && l.term.offset != 0 {
                        need.push((l.term.var, l.term.offset, print_hypothesis(formula, h)));
                    }
                }
                Hypothesis::Comp(c) => {
                    let ((xv, xo), (yv, yo)) = ((c.arg1.var, c.arg1.offset), (c.arg2.var, c.arg2.offset));
                    for (v, o) in [(xv, xo), (yv, yo)] {
                        if o != 0 {
                            need.push((v, o, print_hypothesis(formula, h)));
                        }
                    }
                }
                _ => {}
            }
        }
        for (v, o, atom) in need {
            let ok = if o < 0 {
                entails_gt(clause, v, (-o) as u32)
            } else {
                entails_le_nminus(clause, v, o as u32)
            };
            if !ok {
                let guard = if o < 0 {
                    format!("{v}>{}", -o)
                } else {
                    format!("{v}<=n-{o}")
                };
                errors.push(ShapeError {
                    clause: ci,
                    message: format!(
                        "offset atom {atom} needs the margin guard {guard}; \
                         re-validate with guard insertion enabled or add it explicitly"
                    ),
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixpoint::eval;
    use crate::letters::Alphabet;
    use crate::parse::{parse_formula, print_clause};

    fn pred_formula(clauses: &[&str]) -> Formula {
        let mut src = String::from("logic pred\nalphabet ab\n");
        for c in clauses {
            src.push_str(c);
            src.push('\n');
        }
        parse_formula(&src).unwrap()
    }

    fn incl_formula(clauses: &[&str]) -> Formula {
        let mut src = String::from("logic incl\nalphabet ab\n");
        for c in clauses {
            src.push_str(c);
            src.push('\n');
        }
        parse_formula(&src).unwrap()
    }

    fn printed(f: &Formula) -> Vec<String> {
        f.clauses.iter().map(|c| print_clause(f, c)).collect()
    }

    #[test]
    fn offset_min_splits_into_equalities() {
        let f = pred_formula(&["min(x-2) & Qa(y) -> R(x,y)"]);
        let c = canonicalize(&f);
        assert_eq!(
            printed(&c),
            vec![
                "min(x) & Qa(y) -> R(x,y)",
                "x=2 & Qa(y) -> R(x,y)",
                "x=3 & Qa(y) -> R(x,y)",
            ]
        );
    }

    #[test]
    fn negated_offset_max_covers_exactly_two_letter_words_and_more() {
        let f = pred_formula(&["~max(x-1) -> R(x,y)"]);
        let c = canonicalize(&f);
        assert_eq!(printed(&c), vec!["~min(x) -> R(x,y)", "~max(x) -> R(x,y)"]);
    }

    #[test]
    fn offset_max_means_one_letter_word() {
        let f = pred_formula(&["max(x-2) -> R(x,y)"]);
        let c = canonicalize(&f);
        assert_eq!(printed(&c), vec!["min(x) & max(x) -> R(x,y)"]);
    }

    #[test]
    fn incl_extrema_become_position_comparisons() {
        let f = incl_formula(&["x<=y & min(x) & max(y) & R(x,y) -> FALSE"]);
        let c = canonicalize(&f);
        assert_eq!(printed(&c), vec!["x<=y & x=1 & y=n & R(x,y) -> FALSE"]);
    }

    // Semantic ground truth: canonicalization must preserve the language on
    // every word, for formulas probing each rewritten atom shape.
    #[test]
    fn canonicalization_preserves_the_oracle_language() {
        let sources: Vec<Formula> = vec![
            pred_formula(&[
                "min(x-2) & max(y) & R(x,y) -> FALSE",
                "min(x) & min(y) -> R(x,y)",
                "~min(x) & R(x-1,y) -> R(x,y)",
                "~min(y) & R(x,y-1) -> R(x,y)",
            ]),
            pred_formula(&["max(x-1) & min(y) -> P(x,y)", "max(x) & max(y) & P(x,y) -> FALSE"]),
            pred_formula(&["~max(y-2) & min(x) -> P(x,y)", "max(x) & max(y) & P(x,y) -> FALSE"]),
            incl_formula(&[
                "x=y & min(y+1) -> P(x,y)",
                "x<=y & min(x) & max(y) & P(x,y) -> FALSE",
            ]),
            incl_formula(&[
                "x=y & max(y+2) & Qa(x) -> P(x,y)",
                "x<y & P(x,y-1) -> P(x,y)",
                "x<=y & min(x) & max(y) & P(x,y) -> FALSE",
            ]),
        ];
        let ab = Alphabet::new(['a', 'b']).unwrap();
        for (fi, f) in sources.iter().enumerate() {
            let c = canonicalize(f);
            for w in ab.words_up_to(5) {
                let before = eval(f, &w).unwrap().bottom;
                let after = eval(&c, &w).unwrap().bottom;
                assert_eq!(before, after, "formula {fi}, word {}", ab.render(&w));
            }
        }
    }

    #[test]
    fn guard_check_accepts_validated_and_rejects_bare_offsets() {
        let f = pred_formula(&["x>1 & Qa(x-1) -> R(x,y)"]);
        assert!(check_guards(&canonicalize(&f)).is_ok());
        let g = pred_formula(&["Qa(x-1) -> R(x,y)"]);
        let errs = check_guards(&canonicalize(&g)).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("x>1"), "{}", errs[0].message);
    }

    #[test]
    fn strict_less_counts_as_distance_one_guard() {
        let f = incl_formula(&["x<y & S(x+1,y-1) -> R(x,y)"]);
        assert!(check_guards(&canonicalize(&f)).is_ok());
    }
}
