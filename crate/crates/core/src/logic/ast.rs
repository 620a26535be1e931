use crate::letters::{Alphabet, LetterId};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a computation predicate within its formula's `preds` table.
pub type PredId = usize;

/// The two universally quantified position variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    X,
    Y,
}

impl Var {
    pub fn other(self) -> Var {
        match self {
            Var::X => Var::Y,
            Var::Y => Var::X,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::Y => write!(f, "y"),
        }
    }
}

/// A position term `x+k` / `x-k` (saturating successor/predecessor applied
/// `|k|` times).  `offset` is signed: negative means predecessor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub var: Var,
    pub offset: i32,
}

impl Term {
    pub fn new(var: Var, offset: i32) -> Self {
        Term { var, offset }
    }

    pub fn x(offset: i32) -> Self {
        Term::new(Var::X, offset)
    }

    pub fn y(offset: i32) -> Self {
        Term::new(Var::Y, offset)
    }

    /// Evaluates the term at concrete positions, clamping into `[1, n]`.
    pub fn eval(&self, x: usize, y: usize, n: usize) -> usize {
        let base = match self.var {
            Var::X => x as i64,
            Var::Y => y as i64,
        };
        (base + self.offset as i64).clamp(1, n as i64) as usize
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use std::cmp::Ordering;
        match self.offset.cmp(&0) {
            Ordering::Equal => write!(f, "{}", self.var),
            Ordering::Greater => write!(f, "{}+{}", self.var, self.offset),
            Ordering::Less => write!(f, "{}-{}", self.var, -self.offset),
        }
    }
}

/// The monadic predicates of the word structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputPred {
    Letter(LetterId),
    Min,
    Max,
}

/// A possibly negated monadic atom applied to a position term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputLiteral {
    pub pred: InputPred,
    pub positive: bool,
    pub term: Term,
}

impl InputLiteral {
    pub fn pos(pred: InputPred, term: Term) -> Self {
        InputLiteral {
            pred,
            positive: true,
            term,
        }
    }

    pub fn neg(pred: InputPred, term: Term) -> Self {
        InputLiteral {
            pred,
            positive: false,
            term,
        }
    }
}

/// Comparison operators between the two variables (`x <op> y`) or between a
/// variable and a constant bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    /// The operator with its arguments swapped (`a op b` iff `b op.flip() a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        write!(f, "{s}")
    }
}

/// Right-hand side of a constant comparison: an absolute position or a
/// position counted down from the word length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstRhs {
    Const(u32),
    NMinus(u32),
}

impl ConstRhs {
    pub fn eval(self, n: usize) -> i64 {
        match self {
            ConstRhs::Const(k) => k as i64,
            ConstRhs::NMinus(k) => n as i64 - k as i64,
        }
    }
}

impl fmt::Display for ConstRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstRhs::Const(k) => write!(f, "{k}"),
            ConstRhs::NMinus(0) => write!(f, "n"),
            ConstRhs::NMinus(k) => write!(f, "n-{k}"),
        }
    }
}

/// A comparison of one variable against a constant bound, kept as written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstAtom {
    pub var: Var,
    pub op: CmpOp,
    pub rhs: ConstRhs,
}

impl fmt::Display for ConstAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.var, self.op, self.rhs)
    }
}

/// An interpreted arithmetic hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithAtom {
    /// `x <op> y` (argument order fixed as x-then-y).
    VarCmp(CmpOp),
    /// Comparison against a constant bound; sugar for `min`/`max` literals.
    Const(ConstAtom),
}

impl ArithAtom {
    pub fn holds(&self, x: usize, y: usize, n: usize) -> bool {
        match self {
            ArithAtom::VarCmp(op) => op.holds(x as i64, y as i64),
            ArithAtom::Const(c) => {
                let lhs = match c.var {
                    Var::X => x as i64,
                    Var::Y => y as i64,
                };
                c.op.holds(lhs, c.rhs.eval(n))
            }
        }
    }
}

impl fmt::Display for ArithAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithAtom::VarCmp(op) => write!(f, "x{op}y"),
            ArithAtom::Const(c) => write!(f, "{c}"),
        }
    }
}

/// A computation atom `S(t1, t2)` over position terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompAtom {
    pub pred: PredId,
    pub arg1: Term,
    pub arg2: Term,
}

impl CompAtom {
    /// `S(x+dx, y+dy)` — the common straight-argument form.
    pub fn xy(pred: PredId, dx: i32, dy: i32) -> Self {
        CompAtom {
            pred,
            arg1: Term::x(dx),
            arg2: Term::y(dy),
        }
    }

    /// `S(y+dy, x+dx)` — the transposed form.
    pub fn yx(pred: PredId, dy: i32, dx: i32) -> Self {
        CompAtom {
            pred,
            arg1: Term::y(dy),
            arg2: Term::x(dx),
        }
    }

    pub fn is_straight(&self) -> bool {
        self.arg1.var == Var::X && self.arg2.var == Var::Y
    }

    pub fn is_transposed(&self) -> bool {
        self.arg1.var == Var::Y && self.arg2.var == Var::X
    }

    /// Offsets as `(x-component, y-component)` regardless of argument order.
    /// Only meaningful when the two arguments use distinct variables.
    pub fn var_offsets(&self) -> (i32, i32) {
        if self.is_straight() {
            (self.arg1.offset, self.arg2.offset)
        } else {
            (self.arg2.offset, self.arg1.offset)
        }
    }
}

/// A clause hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    Input(InputLiteral),
    Arith(ArithAtom),
    Comp(CompAtom),
}

impl Hypothesis {
    pub fn comp(&self) -> Option<&CompAtom> {
        match self {
            Hypothesis::Comp(c) => Some(c),
            _ => None,
        }
    }
}

/// A clause conclusion: a computation atom `R(x,y)` (offsets are always zero
/// in conclusions) or the contradiction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conclusion {
    Pred(PredId),
    False,
}

/// One Horn clause `h1 & ... & hr -> concl`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub hyps: Vec<Hypothesis>,
    pub concl: Conclusion,
}

impl Clause {
    pub fn new(hyps: Vec<Hypothesis>, concl: Conclusion) -> Self {
        Clause { hyps, concl }
    }

    pub fn comp_hyps(&self) -> impl Iterator<Item = &CompAtom> {
        self.hyps.iter().filter_map(Hypothesis::comp)
    }

    pub fn has_hyp(&self, h: &Hypothesis) -> bool {
        self.hyps.contains(h)
    }
}

/// Which clause class a formula belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FragmentKind {
    Pred,
    PredDio,
    Incl,
}

impl FragmentKind {
    pub fn name(self) -> &'static str {
        match self {
            FragmentKind::Pred => "pred",
            FragmentKind::PredDio => "pred-dio",
            FragmentKind::Incl => "incl",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "pred" => Some(FragmentKind::Pred),
            "pred-dio" => Some(FragmentKind::PredDio),
            "incl" => Some(FragmentKind::Incl),
            _ => None,
        }
    }
}

impl fmt::Display for FragmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// A full formula: fragment, alphabet, predicate name table, clauses, and an
/// optional designated contradiction-carrier predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub kind: FragmentKind,
    pub alphabet: Alphabet,
    pub preds: Vec<String>,
    /// The predicate read by the (unique) contradiction clause of a
    /// normal-form formula, when one has been designated.
    pub bottom: Option<PredId>,
    pub clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(kind: FragmentKind, alphabet: Alphabet) -> Self {
        Formula {
            kind,
            alphabet,
            preds: Vec::new(),
            bottom: None,
            clauses: Vec::new(),
        }
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.preds.iter().position(|p| p == name)
    }

    pub fn pred_name(&self, id: PredId) -> &str {
        &self.preds[id]
    }

    /// Returns the id of `name`, interning it if new.
    pub fn ensure_pred(&mut self, name: &str) -> PredId {
        if let Some(id) = self.pred_id(name) {
            id
        } else {
            self.preds.push(name.to_string());
            self.preds.len() - 1
        }
    }

    /// Interns a new predicate with name `base`, appending `.2`, `.3`, ... if
    /// the name is taken.  Always creates a fresh id.
    pub fn fresh_pred(&mut self, base: &str) -> PredId {
        if self.pred_id(base).is_none() {
            self.preds.push(base.to_string());
        } else {
            let mut k = 2usize;
            loop {
                let cand = format!("{base}.{k}");
                if self.pred_id(&cand).is_none() {
                    self.preds.push(cand);
                    break;
                }
                k += 1;
            }
        }
        self.preds.len() - 1
    }

    pub fn add_clause(&mut self, hyps: Vec<Hypothesis>, concl: Conclusion) {
        self.clauses.push(Clause::new(hyps, concl));
    }

    /// Largest absolute offset appearing in any term of the formula
    /// (constant-comparison sugar measured on its literal expansion).
    pub fn max_abs_offset(&self) -> u32 {
        let mut m = 0u32;
        for cl in &self.clauses {
            for h in &cl.hyps {
                match h {
                    Hypothesis::Input(l) => m = m.max(l.term.offset.unsigned_abs()),
                    Hypothesis::Comp(c) => {
                        m = m.max(c.arg1.offset.unsigned_abs());
                        m = m.max(c.arg2.offset.unsigned_abs());
                    }
                    Hypothesis::Arith(ArithAtom::Const(c)) => {
                        if let super::desugar::Expansion::Literals(ls) =
                            super::desugar::expand_const_atom(c)
                        {
                            for l in ls {
                                m = m.max(l.term.offset.unsigned_abs());
                            }
                        }
                    }
                    Hypothesis::Arith(ArithAtom::VarCmp(_)) => {}
                }
            }
        }
        m
    }

    /// Predicates that appear in some hypothesis, per predicate id.
    pub fn hypothesis_preds(&self) -> Vec<bool> {
        let mut used = vec![false; self.preds.len()];
        for cl in &self.clauses {
            for c in cl.comp_hyps() {
                used[c.pred] = true;
            }
        }
        used
    }
}
