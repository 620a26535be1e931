//! Expansion of constant-comparison sugar into `min`/`max` literals.
//!
//! Every comparison of a variable against `k` or `n-k` is equivalent —
//! uniformly in the word length `n`, under the saturating position
//! arithmetic — to a conjunction of at most two `min`/`max` literals:
//! `min(v-k)` holds iff `v <= k+1` and `max(v+k)` holds iff `v >= n-k`,
//! because the offset saturates exactly when the position is close enough to
//! the border.  The table below is exhaustive; its two trivial outcomes
//! (`True`, `False`) make a hypothesis disappear or kill its whole clause.

use super::{ArithAtom, Clause, ConstAtom, ConstRhs, CmpOp, Formula, Hypothesis, InputLiteral, InputPred, Term, Var};

/// Result of expanding one constant comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expansion {
    /// Equivalent conjunction of monadic literals (1 or 2 of them).
    Literals(Vec<InputLiteral>),
    /// Holds at every position of every word.
    True,
    /// Holds nowhere.
    False,
}

fn lmin(var: Var, offset: i32, positive: bool) -> InputLiteral {
    InputLiteral {
        pred: InputPred::Min,
        positive,
        term: Term::new(var, offset),
    }
}

fn lmax(var: Var, offset: i32, positive: bool) -> InputLiteral {
    InputLiteral {
        pred: InputPred::Max,
        positive,
        term: Term::new(var, offset),
    }
}

/// Expands `v <op> k` / `v <op> n-k` into border literals.
pub fn expand_const_atom(c: &ConstAtom) -> Expansion {
    let v = c.var;
    match c.rhs {
        ConstRhs::Const(k) => {
            let k = k as i32;
            match c.op {
                // v = k:  min(v-(k-1)) & ~min(v-(k-2))   [k >= 2]
                CmpOp::Eq => match k {
                    0 => Expansion::False,
                    1 => Expansion::Literals(vec![lmin(v, 0, true)]),
                    _ => Expansion::Literals(vec![lmin(v, -(k - 1), true), lmin(v, -(k - 2), false)]),
                },
                // v <= k:  min(v-(k-1))
                CmpOp::Le => match k {
                    0 => Expansion::False,
                    _ => Expansion::Literals(vec![lmin(v, -(k - 1), true)]),
                },
                // v < k  ==  v <= k-1
                CmpOp::Lt => match k {
                    0 | 1 => Expansion::False,
                    _ => Expansion::Literals(vec![lmin(v, -(k - 2), true)]),
                },
                // v > k:  ~min(v-(k-1))
                CmpOp::Gt => match k {
                    0 => Expansion::True,
                    _ => Expansion::Literals(vec![lmin(v, -(k - 1), false)]),
                },
                // v >= k  ==  v > k-1
                CmpOp::Ge => match k {
                    0 | 1 => Expansion::True,
                    _ => Expansion::Literals(vec![lmin(v, -(k - 2), false)]),
                },
            }
        }
        ConstRhs::NMinus(k) => {
            let k = k as i32;
            match c.op {
                // v = n-k:  max(v+k) & ~max(v+(k-1))   [k >= 1]
                CmpOp::Eq => match k {
                    0 => Expansion::Literals(vec![lmax(v, 0, true)]),
                    _ => Expansion::Literals(vec![lmax(v, k, true), lmax(v, k - 1, false)]),
                },
                // v <= n-k:  ~max(v+(k-1))   [k >= 1]
                CmpOp::Le => match k {
                    0 => Expansion::True,
                    _ => Expansion::Literals(vec![lmax(v, k - 1, false)]),
                },
                // v < n-k:  ~max(v+k)
                CmpOp::Lt => Expansion::Literals(vec![lmax(v, k, false)]),
                // v >= n-k:  max(v+k)
                CmpOp::Ge => Expansion::Literals(vec![lmax(v, k, true)]),
                // v > n-k  ==  v >= n-(k-1)
                CmpOp::Gt => match k {
                    0 => Expansion::False,
                    _ => Expansion::Literals(vec![lmax(v, k - 1, true)]),
                },
            }
        }
    }
}

/// Replaces every constant-comparison hypothesis by its literal expansion.
/// Clauses with an unsatisfiable comparison are dropped (they can never
/// fire); variable comparisons (`x=y` etc.) are left untouched.
pub fn desugar(formula: &Formula) -> Formula {
    let mut out = formula.clone();
    let mut clauses = Vec::with_capacity(out.clauses.len());
    'clauses: for cl in &out.clauses {
        let mut hyps = Vec::with_capacity(cl.hyps.len());
        for h in &cl.hyps {
            match h {
                Hypothesis::Arith(ArithAtom::Const(c)) => match expand_const_atom(c) {
                    Expansion::Literals(ls) => {
                        hyps.extend(ls.into_iter().map(Hypothesis::Input));
                    }
                    Expansion::True => {}
                    Expansion::False => continue 'clauses,
                },
                other => hyps.push(other.clone()),
            }
        }
        clauses.push(Clause::new(hyps, cl.concl));
    }
    out.clauses = clauses;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(var: Var, op: CmpOp, rhs: ConstRhs) -> ConstAtom {
        ConstAtom { var, op, rhs }
    }

    /// Truth of the expansion at position `v` in a word of length `n`,
    /// evaluating literals under saturating arithmetic.
    fn expansion_holds(e: &Expansion, v: usize, n: usize) -> bool {
        match e {
            Expansion::True => true,
            Expansion::False => false,
            Expansion::Literals(ls) => ls.iter().all(|l| {
                let p = l.term.eval(v, v, n);
                let holds = match l.pred {
                    InputPred::Min => p == 1,
                    InputPred::Max => p == n,
                    InputPred::Letter(_) => unreachable!(),
                };
                holds == l.positive
            }),
        }
    }

    #[test]
    fn expansion_matches_direct_meaning_exhaustively() {
        let ops = [CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
        for n in 1usize..=9 {
            for k in 0u32..=6 {
                for rhs in [ConstRhs::Const(k), ConstRhs::NMinus(k)] {
                    for op in ops {
                        let a = atom(Var::X, op, rhs);
                        let e = expand_const_atom(&a);
                        for v in 1..=n {
                            let direct = op.holds(v as i64, rhs.eval(n));
                            assert_eq!(
                                expansion_holds(&e, v, n),
                                direct,
                                "{a} at v={v}, n={n} (expansion {e:?})"
                            );
                        }
                    }
                }
            }
        }
    }
}
