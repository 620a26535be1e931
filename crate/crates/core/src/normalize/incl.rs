//! Stepwise rewriting of inclusion formulas toward normal form.
//!
//! The target shape allows computation clauses to read only the two inner
//! neighbours `(x+1, y)` and `(x, y-1)`, input clauses to test only the
//! letter at `x` on the diagonal, and the single contradiction to look at
//! the full-word interval `(1, n)`.  Everything else a validated formula may
//! contain — letters at either coordinate and at an offset, comparisons of a
//! coordinate against a constant or against `n`, reads at deeper offsets,
//! non-strict interval guards — has to be compiled away:
//!
//! * `bottom` — funnel every contradiction into one `Bot` predicate that
//!   travels to the interval `(1, n)`, and normalize each clause to a single
//!   interval guard (`x=y`, `x<y`, or `x<=y`).
//! * `letters` — replace letter tests by carrier predicates seeded on the
//!   diagonal and transported along the coordinate they depend on.
//! * `positions` — likewise replace constant comparisons by position
//!   predicates.
//! * `shifts` — replace reads deeper than the two inner neighbours by chains
//!   of single-step shift predicates, then split `x<=y` guards into their
//!   diagonal and strict parts.
//! * `obligations` — the carriers and position predicates introduced above
//!   are defined by diagonal clauses whose bodies (a letter at an offset, a
//!   comparison against a constant) are not allowed in input clauses.  Those
//!   definitions are replaced by conditioned variants: `P.o…` holds where the
//!   recorded conditions would, if true, make `P` hold.  Variants are seeded
//!   unconditionally on the diagonal, follow the clauses of their base
//!   predicate with the conditions re-anchored to the current interval, and
//!   are discharged against the letter carriers once a condition's distance
//!   reaches zero.  The contradiction then reads the variant of `Bot` whose
//!   conditions are exactly `x=1` and `y=n` — true at `(1, n)` — so the
//!   final clause needs nothing beyond `min(x)` and `max(y)`.
//!
//! Every step preserves the accepted language; the tests check each stage
//! against the fixpoint evaluator on all short words.

use crate::letters::LetterId;
use crate::logic::{
    ArithAtom, Clause, CmpOp, CompAtom, Conclusion, ConstAtom, ConstRhs, Formula, FragmentKind,
    Hypothesis, InputLiteral, InputPred, PredId, Term, Var,
};
use std::collections::{BTreeMap, BTreeSet};

fn at(p: PredId, dx: i32, dy: i32) -> Hypothesis {
    Hypothesis::Comp(CompAtom::xy(p, dx, dy))
}

fn lletter(s: LetterId, v: Var, off: i32) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Letter(s),
        positive: true,
        term: Term::new(v, off),
    })
}

fn lmin(v: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Min,
        positive: true,
        term: Term::new(v, 0),
    })
}

fn lmax(v: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Max,
        positive: true,
        term: Term::new(v, 0),
    })
}

fn guard(op: CmpOp) -> Hypothesis {
    Hypothesis::Arith(ArithAtom::VarCmp(op))
}

fn heq() -> Hypothesis {
    guard(CmpOp::Eq)
}

fn hlt() -> Hypothesis {
    guard(CmpOp::Lt)
}

fn cbound(v: Var, op: CmpOp, rhs: ConstRhs) -> Hypothesis {
    Hypothesis::Arith(ArithAtom::Const(ConstAtom { var: v, op, rhs }))
}

/// Role of a clause within the staged formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tag {
    /// `x=y & Qs(x) -> P` — already a legal input clause.
    Input,
    /// Diagonal definition of a carrier or position predicate; replaced by
    /// conditioned variants in the final step.
    Def(Cond),
    /// Ordinary clause, subject to every rewrite.
    Comp,
    /// The contradiction; rebuilt by the final step.
    Contra,
}

/// What a defining diagonal clause actually tests.  `v` stands for either
/// coordinate: on the diagonal the two agree, so each condition is stated
/// canonically through `x` (start-anchored) or `y` (end-anchored).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Cond {
    /// `v = a`, `a >= 1`.
    At(u32),
    /// `v = n - b`.
    End(u32),
    /// `Qs(v-a)` together with `v > a`, `a >= 1`.
    Low(u32, LetterId),
    /// `Qs(v+b)` together with `v <= n-b`, `b >= 1`.
    High(u32, LetterId),
}

/// The four constant-comparison shapes canonicalization leaves behind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Pos {
    /// `v = a`, `a >= 1`.
    Is(u32),
    /// `v > a`, `a >= 1`.
    After(u32),
    /// `v = n - b`.
    IsEnd(u32),
    /// `v < n - b`.
    Short(u32),
}

/// Pending conditions attached to one predicate variant.  A variant fact at
/// `(x, y)` claims: if every recorded condition holds, the base fact holds
/// at `(x, y)`.  Distances are measured from the interval ends, so passing
/// a fact through an inner-neighbour read decrements them.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
struct Ob {
    /// pending `x = a`.
    ex: Option<u32>,
    /// pending `y = n - b`.
    ey: Option<u32>,
    /// pending `Qs(x - a)`, sorted, at most one letter per distance.
    lx: Vec<(u32, LetterId)>,
    /// pending `Qs(y + b)`, likewise.
    ly: Vec<(u32, LetterId)>,
}

impl Ob {
    fn seed(c: Cond) -> Ob {
        let mut v = Ob::default();
        match c {
            Cond::At(a) => v.ex = Some(a),
            Cond::End(b) => v.ey = Some(b),
            Cond::Low(a, s) => v.lx.push((a, s)),
            Cond::High(b, s) => v.ly.push((b, s)),
        }
        v
    }

    fn is_empty(&self) -> bool {
        self.ex.is_none() && self.ey.is_none() && self.lx.is_empty() && self.ly.is_empty()
    }

    /// Union of two condition sets, or `None` if they contradict (two
    /// different exact positions, or two letters at the same distance).
    fn merge(&self, other: &Ob) -> Option<Ob> {
        fn one(a: Option<u32>, b: Option<u32>) -> Option<Option<u32>> {
            match (a, b) {
                (Some(x), Some(y)) if x != y => None,
                (Some(x), _) => Some(Some(x)),
                (None, y) => Some(y),
            }
        }
        fn both(a: &[(u32, LetterId)], b: &[(u32, LetterId)]) -> Option<Vec<(u32, LetterId)>> {
            let mut m: BTreeMap<u32, LetterId> = a.iter().copied().collect();
            for &(d, s) in b {
                if *m.entry(d).or_insert(s) != s {
                    return None;
                }
            }
            Some(m.into_iter().collect())
        }
        Some(Ob {
            ex: one(self.ex, other.ex)?,
            ey: one(self.ey, other.ey)?,
            lx: both(&self.lx, &other.lx)?,
            ly: both(&self.ly, &other.ly)?,
        })
    }

    /// `other` carries every condition of `self` (and possibly more).
    fn implies(&self, other: &Ob) -> bool {
        self.merge(other).as_ref() == Some(other)
    }

    /// Conditions as seen through a read of `(x+1, y)`: start-anchored
    /// distances shrink by one.  `None` if a condition cannot move — the
    /// exact position `x = 1` and letters at distance zero pin the fact to
    /// its column.
    fn shift_left(&self) -> Option<Ob> {
        let ex = match self.ex {
            Some(1) => return None,
            Some(a) => Some(a - 1),
            None => None,
        };
        let mut lx = Vec::with_capacity(self.lx.len());
        for &(d, s) in &self.lx {
            if d == 0 {
                return None;
            }
            lx.push((d - 1, s));
        }
        Some(Ob {
            ex,
            ey: self.ey,
            lx,
            ly: self.ly.clone(),
        })
    }

    /// Conditions as seen through a read of `(x, y-1)`.
    fn shift_down(&self) -> Option<Ob> {
        let ey = match self.ey {
            Some(0) => return None,
            Some(b) => Some(b - 1),
            None => None,
        };
        let mut ly = Vec::with_capacity(self.ly.len());
        for &(d, s) in &self.ly {
            if d == 0 {
                return None;
            }
            ly.push((d - 1, s));
        }
        Some(Ob {
            ex: self.ex,
            ey,
            lx: self.lx.clone(),
            ly,
        })
    }

    /// Name fragment, e.g. `x1.yn0.lx2a`.
    fn suffix(&self, f: &Formula) -> String {
        let mut parts = Vec::new();
        if let Some(a) = self.ex {
            parts.push(format!("x{a}"));
        }
        if let Some(b) = self.ey {
            parts.push(format!("yn{b}"));
        }
        for &(d, s) in &self.lx {
            parts.push(format!("lx{}{}", d, f.alphabet.letter(s)));
        }
        for &(d, s) in &self.ly {
            parts.push(format!("ly{}{}", d, f.alphabet.letter(s)));
        }
        parts.join(".")
    }
}

/// Formula under construction plus the clause roles the steps depend on.
struct Staged {
    f: Formula,
    tags: Vec<Tag>,
    /// The funnel predicate the contradiction reads.
    bot: PredId,
    /// Letter carriers by (coordinate, offset, letter).
    w: BTreeMap<(Var, i32, LetterId), PredId>,
    /// Position predicates.
    cst: BTreeMap<(Var, Pos), PredId>,
    /// Shift predicates by (base, x-offset, y-offset magnitude).
    shifts: BTreeMap<(PredId, u32, u32), PredId>,
}

impl Staged {
    fn new(f: Formula) -> Staged {
        Staged {
            f,
            tags: Vec::new(),
            bot: 0,
            w: BTreeMap::new(),
            cst: BTreeMap::new(),
            shifts: BTreeMap::new(),
        }
    }

    fn push(&mut self, hyps: Vec<Hypothesis>, concl: Conclusion, tag: Tag) {
        self.f.clauses.push(Clause::new(hyps, concl));
        self.tags.push(tag);
    }

    fn push_clause(&mut self, cl: Clause, tag: Tag) {
        self.f.clauses.push(cl);
        self.tags.push(tag);
    }

    fn take(&mut self) -> Vec<(Clause, Tag)> {
        let clauses = std::mem::take(&mut self.f.clauses);
        let tags = std::mem::take(&mut self.tags);
        clauses.into_iter().zip(tags).collect()
    }

    /// Carrier predicate for `Qs(v + off)`, seeded on the diagonal and
    /// transported along the coordinate it ignores.  For `off != 0` the
    /// carrier also asserts that the tested position exists.
    fn ensure_w(&mut self, v: Var, off: i32, s: LetterId) -> PredId {
        if let Some(&p) = self.w.get(&(v, off, s)) {
            return p;
        }
        let axis = match v {
            Var::X => "x",
            Var::Y => "y",
        };
        let ch = self.f.alphabet.letter(s);
        let name = match off {
            0 => format!("W{axis}0.{ch}"),
            o if o < 0 => format!("W{axis}m{}.{ch}", -o),
            o => format!("W{axis}p{o}.{ch}"),
        };
        let p = self.f.fresh_pred(&name);
        self.w.insert((v, off, s), p);
        // diagonal definition — on the diagonal the coordinates agree, so the
        // condition can be stated through either; `x` low, `y` high
        if off == 0 {
            self.push(vec![heq(), lletter(s, Var::X, 0)], Conclusion::Pred(p), Tag::Input);
        } else if off < 0 {
            let a = (-off) as u32;
            self.push(
                vec![
                    heq(),
                    lletter(s, Var::X, off),
                    cbound(Var::X, CmpOp::Gt, ConstRhs::Const(a)),
                ],
                Conclusion::Pred(p),
                Tag::Def(Cond::Low(a, s)),
            );
        } else {
            let b = off as u32;
            // `v <= n-b` written as `v < n-(b-1)`
            self.push(
                vec![
                    heq(),
                    lletter(s, Var::Y, off),
                    cbound(Var::Y, CmpOp::Lt, ConstRhs::NMinus(b - 1)),
                ],
                Conclusion::Pred(p),
                Tag::Def(Cond::High(b, s)),
            );
        }
        // transport along the free coordinate
        let read = match v {
            Var::X => at(p, 0, -1),
            Var::Y => at(p, 1, 0),
        };
        self.push(vec![hlt(), read], Conclusion::Pred(p), Tag::Comp);
        p
    }

    /// Position predicate for a constant comparison on `v`.
    fn ensure_cst(&mut self, v: Var, pos: Pos) -> PredId {
        if let Some(&p) = self.cst.get(&(v, pos)) {
            return p;
        }
        let axis = match v {
            Var::X => "X",
            Var::Y => "Y",
        };
        let name = match pos {
            Pos::Is(a) => format!("{axis}eq{a}"),
            Pos::After(a) => format!("{axis}gt{a}"),
            Pos::IsEnd(b) => format!("{axis}eqn{b}"),
            Pos::Short(b) => format!("{axis}ltn{b}"),
        };
        let p = self.f.fresh_pred(&name);
        self.cst.insert((v, pos), p);
        let alphabet = self.f.alphabet.clone();
        match pos {
            Pos::Is(a) => {
                debug_assert!(a >= 1);
                self.push(
                    vec![heq(), cbound(Var::X, CmpOp::Eq, ConstRhs::Const(a))],
                    Conclusion::Pred(p),
                    Tag::Def(Cond::At(a)),
                );
            }
            Pos::IsEnd(b) => {
                self.push(
                    vec![heq(), cbound(Var::Y, CmpOp::Eq, ConstRhs::NMinus(b))],
                    Conclusion::Pred(p),
                    Tag::Def(Cond::End(b)),
                );
            }
            Pos::After(a) => {
                // `v > a` iff some letter sits `a` positions below `v`
                debug_assert!(a >= 1);
                for (s, _) in alphabet.iter() {
                    self.push(
                        vec![
                            heq(),
                            lletter(s, Var::X, -(a as i32)),
                            cbound(Var::X, CmpOp::Gt, ConstRhs::Const(a)),
                        ],
                        Conclusion::Pred(p),
                        Tag::Def(Cond::Low(a, s)),
                    );
                }
            }
            Pos::Short(b) => {
                // `v < n-b` iff some letter sits `b+1` positions above `v`
                for (s, _) in alphabet.iter() {
                    self.push(
                        vec![
                            heq(),
                            lletter(s, Var::Y, (b + 1) as i32),
                            cbound(Var::Y, CmpOp::Lt, ConstRhs::NMinus(b)),
                        ],
                        Conclusion::Pred(p),
                        Tag::Def(Cond::High(b + 1, s)),
                    );
                }
            }
        }
        // the condition constrains one coordinate; transport along the other
        let read = match v {
            Var::X => at(p, 0, -1),
            Var::Y => at(p, 1, 0),
        };
        self.push(vec![hlt(), read], Conclusion::Pred(p), Tag::Comp);
        p
    }

    /// Shift predicate: holds at `(x, y)` iff the base holds at
    /// `(x+a, y-b)` and that is still a valid interval.  Built as a chain of
    /// single-step reads.
    fn ensure_shift(&mut self, base: PredId, a: u32, b: u32) -> PredId {
        if a == 0 && b == 0 {
            return base;
        }
        if let Some(&p) = self.shifts.get(&(base, a, b)) {
            return p;
        }
        let (prev, read_dy) = if b > 0 {
            (self.ensure_shift(base, a, b - 1), true)
        } else {
            (self.ensure_shift(base, a - 1, 0), false)
        };
        let stem = self.f.pred_name(base).to_string();
        let name = match (a, b) {
            (a, 0) => format!("{stem}.x{a}"),
            (0, b) => format!("{stem}.y{b}"),
            (a, b) => format!("{stem}.x{a}y{b}"),
        };
        let p = self.f.fresh_pred(&name);
        self.shifts.insert((base, a, b), p);
        let read = if read_dy { at(prev, 0, -1) } else { at(prev, 1, 0) };
        self.push(vec![hlt(), read], Conclusion::Pred(p), Tag::Comp);
        p
    }

    /// Drop duplicate clauses (first tag wins; duplicates only arise among
    /// equal roles).
    fn dedup(&mut self) {
        let mut seen: BTreeSet<(Vec<Hypothesis>, Conclusion)> = BTreeSet::new();
        for (cl, tag) in self.take() {
            let mut key = cl.hyps.clone();
            key.sort();
            key.dedup();
            if seen.insert((key, cl.concl)) {
                self.push_clause(cl, tag);
            }
        }
    }
}

/// Funnel all contradictions into a single travelling `Bot` predicate and
/// give every clause exactly one interval guard.
fn step_bottom(st: &mut Staged) {
    let clauses = std::mem::take(&mut st.f.clauses);
    debug_assert!(st.tags.is_empty());
    let bot = st.f.fresh_pred("Bot");
    st.bot = bot;
    st.f.bottom = Some(bot);
    for cl in clauses {
        let mut eq = false;
        let mut lt = false;
        let mut any = false;
        for h in &cl.hyps {
            if let Hypothesis::Arith(ArithAtom::VarCmp(op)) = h {
                any = true;
                match op {
                    CmpOp::Eq => eq = true,
                    CmpOp::Lt => lt = true,
                    CmpOp::Le => {}
                    _ => debug_assert!(false, "validation admits only =, <, <= guards"),
                }
            }
        }
        debug_assert!(any, "every validated inclusion clause has an interval guard");
        if eq && lt {
            continue; // contradictory guards: the clause never fires
        }
        let g = if eq {
            CmpOp::Eq
        } else if lt {
            CmpOp::Lt
        } else {
            CmpOp::Le
        };
        let mut hyps = vec![guard(g)];
        hyps.extend(
            cl.hyps
                .iter()
                .filter(|h| !matches!(h, Hypothesis::Arith(ArithAtom::VarCmp(_))))
                .cloned(),
        );
        let concl = match cl.concl {
            Conclusion::False => Conclusion::Pred(bot),
            c => c,
        };
        st.push(hyps, concl, Tag::Comp);
    }
    st.push(vec![hlt(), at(bot, 1, 0)], Conclusion::Pred(bot), Tag::Comp);
    st.push(vec![hlt(), at(bot, 0, -1)], Conclusion::Pred(bot), Tag::Comp);
    st.push(
        vec![lmin(Var::X), lmax(Var::Y), at(bot, 0, 0)],
        Conclusion::False,
        Tag::Contra,
    );
}

/// Replace every letter test in an ordinary clause by its carrier read at
/// the current interval.  Margin guards that accompanied an offset letter
/// stay behind; the next step picks them up.
fn step_letters(st: &mut Staged) {
    for (mut cl, tag) in st.take() {
        if tag == Tag::Comp {
            for h in &mut cl.hyps {
                if let Hypothesis::Input(l) = h {
                    let InputPred::Letter(s) = l.pred else {
                        unreachable!("min/max literals are canonicalized away")
                    };
                    debug_assert!(l.positive, "inclusion letter tests are positive");
                    let p = st.ensure_w(l.term.var, l.term.offset, s);
                    *h = at(p, 0, 0);
                }
            }
        }
        st.push_clause(cl, tag);
    }
}

/// Replace every constant comparison in an ordinary clause by its position
/// predicate read at the current interval.
fn step_positions(st: &mut Staged) {
    for (mut cl, tag) in st.take() {
        if tag == Tag::Comp {
            for h in &mut cl.hyps {
                if let Hypothesis::Arith(ArithAtom::Const(c)) = h {
                    let pos = match (c.op, c.rhs) {
                        (CmpOp::Eq, ConstRhs::Const(a)) => Pos::Is(a),
                        (CmpOp::Gt, ConstRhs::Const(a)) => Pos::After(a),
                        (CmpOp::Eq, ConstRhs::NMinus(b)) => Pos::IsEnd(b),
                        (CmpOp::Lt, ConstRhs::NMinus(b)) => Pos::Short(b),
                        _ => unreachable!("canonical constants are =a, >a, =n-b, <n-b"),
                    };
                    let p = st.ensure_cst(c.var, pos);
                    *h = at(p, 0, 0);
                }
            }
        }
        st.push_clause(cl, tag);
    }
}

/// Replace every off-interval read by a shift predicate at the current
/// interval, then split `x<=y` guards into their two cases.  Afterwards all
/// ordinary clauses either combine facts at the current interval or read a
/// single inner neighbour.
fn step_shifts(st: &mut Staged) {
    for (mut cl, tag) in st.take() {
        if tag == Tag::Comp {
            for h in &mut cl.hyps {
                if let Hypothesis::Comp(c) = h {
                    debug_assert!(c.is_straight(), "validated inclusion reads are straight");
                    let (dx, dy) = c.var_offsets();
                    debug_assert!(dx >= 0 && dy <= 0);
                    if (dx, dy) != (0, 0) {
                        let p = st.ensure_shift(c.pred, dx as u32, (-dy) as u32);
                        *h = at(p, 0, 0);
                    }
                }
            }
        }
        st.push_clause(cl, tag);
    }
    for (cl, tag) in st.take() {
        if tag == Tag::Comp && cl.has_hyp(&guard(CmpOp::Le)) {
            for g in [CmpOp::Eq, CmpOp::Lt] {
                let mut copy = cl.clone();
                for h in &mut copy.hyps {
                    if matches!(h, Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Le))) {
                        *h = guard(g);
                    }
                }
                st.push_clause(copy, tag);
            }
        } else {
            st.push_clause(cl, tag);
        }
    }
}

/// Clause shapes the final step distinguishes.  By now every ordinary
/// clause is one of these.
enum Shape {
    /// `x<y & S(x+1,y) -> R`.
    Left(PredId),
    /// `x<y & S(x,y-1) -> R`.
    Down(PredId),
    /// Guard plus zero or more reads at the current interval.
    Local(CmpOp, Vec<PredId>),
}

/// Replace the diagonal definitions of carriers and position predicates by
/// conditioned variants and re-anchor the contradiction to them.
fn step_obligations(st: &mut Staged) {
    let mut seeds: Vec<(PredId, Ob)> = Vec::new();
    let mut kept: Vec<(Clause, Tag)> = Vec::new();
    for (cl, tag) in st.take() {
        match tag {
            Tag::Def(c) => {
                let Conclusion::Pred(p) = cl.concl else {
                    unreachable!("definitions conclude their predicate")
                };
                seeds.push((p, Ob::seed(c)));
            }
            Tag::Contra => {}
            _ => kept.push((cl, tag)),
        }
    }

    let mut comp: Vec<(Shape, PredId)> = Vec::new();
    for (cl, tag) in &kept {
        if *tag != Tag::Comp {
            continue;
        }
        let Conclusion::Pred(concl) = cl.concl else {
            unreachable!("only the contradiction concludes FALSE")
        };
        let mut op = None;
        let mut local = Vec::new();
        let mut read = None;
        for h in &cl.hyps {
            match h {
                Hypothesis::Arith(ArithAtom::VarCmp(o)) => op = Some(*o),
                Hypothesis::Comp(c) => match (c.arg1.offset, c.arg2.offset) {
                    (0, 0) => local.push(c.pred),
                    (1, 0) => read = Some(Shape::Left(c.pred)),
                    (0, -1) => read = Some(Shape::Down(c.pred)),
                    _ => unreachable!("staged clauses read inner neighbours only"),
                },
                _ => unreachable!("ordinary staged clauses carry no other hypotheses"),
            }
        }
        let op = op.expect("staged clauses keep their guard");
        let shape = match read {
            Some(s) => {
                debug_assert!(local.is_empty() && op == CmpOp::Lt);
                s
            }
            None => Shape::Local(op, local),
        };
        comp.push((shape, concl));
    }

    // All condition sets a derivation can carry.  The corner set `x=1, y=n`
    // is forced so the contradiction always has its variant to read.
    let corner = Ob {
        ex: Some(1),
        ey: Some(0),
        lx: Vec::new(),
        ly: Vec::new(),
    };
    let mut live: BTreeSet<(PredId, Ob)> = seeds.iter().cloned().collect();
    live.insert((st.bot, corner.clone()));
    loop {
        let mut fresh: Vec<(PredId, Ob)> = Vec::new();
        for (shape, concl) in &comp {
            match shape {
                Shape::Left(src) => {
                    for (p, v) in &live {
                        if p == src {
                            if let Some(moved) = v.shift_left() {
                                fresh.push((*concl, moved));
                            }
                        }
                    }
                }
                Shape::Down(src) => {
                    for (p, v) in &live {
                        if p == src {
                            if let Some(moved) = v.shift_down() {
                                fresh.push((*concl, moved));
                            }
                        }
                    }
                }
                Shape::Local(_, atoms) => {
                    // every compatible way to condition some of the reads
                    let mut partials = vec![Ob::default()];
                    for a in atoms {
                        let mut next = Vec::new();
                        for part in &partials {
                            next.push(part.clone());
                            for (p, v) in &live {
                                if p == a {
                                    if let Some(m) = part.merge(v) {
                                        next.push(m);
                                    }
                                }
                            }
                        }
                        next.sort();
                        next.dedup();
                        partials = next;
                    }
                    for u in partials {
                        if !u.is_empty() {
                            fresh.push((*concl, u));
                        }
                    }
                }
            }
        }
        // a condition whose distance reached zero can be checked in place
        for (p, v) in &live {
            if v.lx.first().is_some_and(|&(d, _)| d == 0) {
                let mut rest = v.clone();
                rest.lx.remove(0);
                if !rest.is_empty() {
                    fresh.push((*p, rest));
                }
            }
            if v.ly.first().is_some_and(|&(d, _)| d == 0) {
                let mut rest = v.clone();
                rest.ly.remove(0);
                if !rest.is_empty() {
                    fresh.push((*p, rest));
                }
            }
        }
        let before = live.len();
        live.extend(fresh.into_iter().filter(|(_, v)| !v.is_empty()));
        if live.len() == before {
            break;
        }
    }

    let mut vp: BTreeMap<(PredId, Ob), PredId> = BTreeMap::new();
    for (p, v) in &live {
        let name = format!("{}.o{}", st.f.pred_name(*p), v.suffix(&st.f));
        let id = st.f.fresh_pred(&name);
        vp.insert((*p, v.clone()), id);
    }
    let of = |p: PredId, v: &Ob| -> PredId {
        if v.is_empty() {
            p
        } else {
            vp[&(p, v.clone())]
        }
    };

    for (cl, tag) in kept.iter().cloned() {
        st.push_clause(cl, tag);
    }

    // every conditioned variant of a definition holds on the whole diagonal
    let alphabet = st.f.alphabet.clone();
    let init: BTreeSet<(PredId, Ob)> = seeds.into_iter().collect();
    for (p, v) in &init {
        for (s, _) in alphabet.iter() {
            st.push(
                vec![heq(), lletter(s, Var::X, 0)],
                Conclusion::Pred(of(*p, v)),
                Tag::Input,
            );
        }
    }

    // variants follow the clauses of their base with re-anchored conditions
    for (shape, concl) in &comp {
        match shape {
            Shape::Left(src) => {
                for (p, v) in &live {
                    if p == src {
                        if let Some(moved) = v.shift_left() {
                            st.push(
                                vec![hlt(), at(of(*src, v), 1, 0)],
                                Conclusion::Pred(of(*concl, &moved)),
                                Tag::Comp,
                            );
                        }
                    }
                }
            }
            Shape::Down(src) => {
                for (p, v) in &live {
                    if p == src {
                        if let Some(moved) = v.shift_down() {
                            st.push(
                                vec![hlt(), at(of(*src, v), 0, -1)],
                                Conclusion::Pred(of(*concl, &moved)),
                                Tag::Comp,
                            );
                        }
                    }
                }
            }
            Shape::Local(op, atoms) => {
                let mut partials: Vec<(Vec<PredId>, Ob)> = vec![(Vec::new(), Ob::default())];
                for a in atoms {
                    let mut next = Vec::new();
                    for (chosen, part) in &partials {
                        let mut plain = chosen.clone();
                        plain.push(*a);
                        next.push((plain, part.clone()));
                        for (p, v) in &live {
                            if p == a {
                                if let Some(m) = part.merge(v) {
                                    let mut c = chosen.clone();
                                    c.push(of(*a, v));
                                    next.push((c, m));
                                }
                            }
                        }
                    }
                    next.sort();
                    next.dedup();
                    partials = next;
                }
                for (chosen, u) in partials {
                    if u.is_empty() {
                        continue; // the unconditioned original is already kept
                    }
                    let mut hyps = vec![guard(*op)];
                    hyps.extend(chosen.into_iter().map(|p| at(p, 0, 0)));
                    st.push(hyps, Conclusion::Pred(of(*concl, &u)), Tag::Comp);
                }
            }
        }
    }

    // letter conditions at distance zero are discharged against the carriers
    for (p, v) in &live {
        if let Some(&(0, s)) = v.lx.first() {
            let mut rest = v.clone();
            rest.lx.remove(0);
            let w = st.ensure_w(Var::X, 0, s);
            st.push(
                vec![hlt(), at(of(*p, v), 0, 0), at(w, 0, 0)],
                Conclusion::Pred(of(*p, &rest)),
                Tag::Comp,
            );
        }
        if let Some(&(0, s)) = v.ly.first() {
            let mut rest = v.clone();
            rest.ly.remove(0);
            let w = st.ensure_w(Var::Y, 0, s);
            st.push(
                vec![hlt(), at(of(*p, v), 0, 0), at(w, 0, 0)],
                Conclusion::Pred(of(*p, &rest)),
                Tag::Comp,
            );
        }
    }

    // adding a pending condition only weakens a fact: from the base, and
    // from any variant whose conditions the target includes
    for (p, v) in &live {
        let t = of(*p, v);
        for g in [heq(), hlt()] {
            st.push(vec![g, at(*p, 0, 0)], Conclusion::Pred(t), Tag::Comp);
        }
        for (q, w) in &live {
            if q == p && w != v && w.implies(v) {
                for g in [heq(), hlt()] {
                    st.push(vec![g, at(of(*q, w), 0, 0)], Conclusion::Pred(t), Tag::Comp);
                }
            }
        }
    }

    // the corner variant's conditions hold exactly at (1, n)
    let nb = of(st.bot, &corner);
    st.push(
        vec![lmin(Var::X), lmax(Var::Y), at(nb, 0, 0)],
        Conclusion::False,
        Tag::Contra,
    );
    st.bot = nb;
    st.f.bottom = Some(nb);
}

pub(super) fn run(formula: &Formula, trace: &mut super::NormalizationTrace) -> Formula {
    debug_assert_eq!(formula.kind, FragmentKind::Incl);
    let mut st = Staged::new(formula.clone());
    step_bottom(&mut st);
    trace.push("bottom", &st.f);
    step_letters(&mut st);
    trace.push("letters", &st.f);
    step_positions(&mut st);
    trace.push("positions", &st.f);
    step_shifts(&mut st);
    trace.push("shifts", &st.f);
    step_obligations(&mut st);
    st.dedup();
    trace.push("obligations", &st.f);
    st.f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixpoint::accepts;
    use crate::logic::validate::{validate, ValidateOpts};
    use crate::normalize::shape;
    use crate::normalize::NormalizationTrace;
    use crate::parse::parse_formula;

    fn prepared(src: &str) -> Formula {
        let parsed = parse_formula(src).unwrap();
        let validated = validate(&parsed, &ValidateOpts::default()).unwrap();
        let canon = shape::canonicalize(&validated.formula);
        shape::check_guards(&canon).unwrap();
        canon
    }

    /// Every stage must preserve acceptance of every word up to `max_len`.
    fn assert_stages_preserve(src: &str, max_len: usize) {
        let f = prepared(src);
        let mut trace = NormalizationTrace::default();
        let _ = run(&f, &mut trace);
        for w in f.alphabet.words_up_to(max_len).collect::<Vec<_>>() {
            let expected = accepts(&f, &w).unwrap();
            for (name, g) in &trace.steps {
                let got = accepts(g, &w).unwrap();
                assert_eq!(
                    expected,
                    got,
                    "stage '{name}' changed the verdict on {:?}",
                    f.alphabet.render(&w)
                );
            }
        }
    }

    const PALINDROME: &str = "logic incl\nalphabet ab\n\
        x<y & Qa(x) & Qb(y) -> NotPal(x,y)\n\
        x<y & Qb(x) & Qa(y) -> NotPal(x,y)\n\
        x<y & NotPal(x+1,y-1) -> NotPal(x,y)\n\
        x<=y & min(x) & max(y) & NotPal(x,y) -> FALSE\n";

    const NOT_PALINDROME: &str = "logic incl\nalphabet ab\n\
        x=y -> Equal(x,y)\n\
        x<y & Equal(x+1,y) -> Successor(x,y)\n\
        x=y -> Pal(x,y)\n\
        x<=y & Successor(x,y) & Qa(x) & Qa(y) -> Pal(x,y)\n\
        x<=y & Successor(x,y) & Qb(x) & Qb(y) -> Pal(x,y)\n\
        x<y & Pal(x+1,y-1) & Qa(x) & Qa(y) -> Pal(x,y)\n\
        x<y & Pal(x+1,y-1) & Qb(x) & Qb(y) -> Pal(x,y)\n\
        x<=y & min(x) & max(y) & Pal(x,y) -> FALSE\n";

    #[test]
    fn stages_preserve_palindrome() {
        assert_stages_preserve(PALINDROME, 5);
    }

    #[test]
    fn stages_preserve_not_palindrome() {
        assert_stages_preserve(NOT_PALINDROME, 5);
    }

    #[test]
    fn stages_preserve_position_condition() {
        // rejects every word of length at least two
        assert_stages_preserve(
            "logic incl\nalphabet ab\n\
             x=y & x=2 -> P(x,y)\n\
             x<y & P(x+1,y) -> P(x,y)\n\
             x<y & P(x,y-1) -> P(x,y)\n\
             x<=y & min(x) & max(y) & P(x,y) -> FALSE\n",
            4,
        );
    }

    #[test]
    fn stages_preserve_low_letter_condition() {
        // rejects words with an `a` anywhere but the last position
        assert_stages_preserve(
            "logic incl\nalphabet ab\n\
             x=y & x>1 & Qa(x-1) -> P(x,y)\n\
             x<y & P(x+1,y) -> P(x,y)\n\
             x<y & P(x,y-1) -> P(x,y)\n\
             x<=y & min(x) & max(y) & P(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_high_letter_condition() {
        // rejects words with a `b` anywhere but the first position
        assert_stages_preserve(
            "logic incl\nalphabet ab\n\
             x=y & y<=n-1 & Qb(y+1) -> P(x,y)\n\
             x<y & P(x+1,y) -> P(x,y)\n\
             x<y & P(x,y-1) -> P(x,y)\n\
             x<=y & min(x) & max(y) & P(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_bare_diagonal_init() {
        // rejects words containing an `a`
        assert_stages_preserve(
            "logic incl\nalphabet ab\n\
             x=y -> E(x,y)\n\
             x<=y & E(x,y) & Qa(x) -> P(x,y)\n\
             x<y & P(x+1,y) -> P(x,y)\n\
             x<y & P(x,y-1) -> P(x,y)\n\
             x<=y & min(x) & max(y) & P(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_deep_shift() {
        // rejects words of length at least three whose first letter is `a`
        assert_stages_preserve(
            "logic incl\nalphabet ab\n\
             x=y & Qa(x) -> A(x,y)\n\
             x<y & y>2 & A(x+2,y-1) -> R(x,y)\n\
             x<y & R(x+1,y) -> R(x,y)\n\
             x<y & R(x,y-1) -> R(x,y)\n\
             x<=y & min(x) & max(y) & R(x,y) -> FALSE\n",
            5,
        );
    }

    /// The staged output only contains the shapes the elimination step
    /// handles: diagonal inputs, single inner-neighbour reads, local
    /// combinations, and one final contradiction.
    #[test]
    fn staged_output_shapes() {
        for src in [PALINDROME, NOT_PALINDROME] {
            let f = prepared(src);
            let mut trace = NormalizationTrace::default();
            let out = run(&f, &mut trace);
            let mut contras = 0;
            for cl in &out.clauses {
                if cl.concl == Conclusion::False {
                    contras += 1;
                    assert_eq!(
                        cl.hyps,
                        vec![
                            lmin(Var::X),
                            lmax(Var::Y),
                            at(out.bottom.unwrap(), 0, 0)
                        ]
                    );
                    continue;
                }
                let guards: Vec<_> = cl
                    .hyps
                    .iter()
                    .filter_map(|h| match h {
                        Hypothesis::Arith(ArithAtom::VarCmp(op)) => Some(*op),
                        _ => None,
                    })
                    .collect();
                assert_eq!(guards.len(), 1, "one guard in {cl:?}");
                let mut reads = 0;
                for h in &cl.hyps {
                    match h {
                        Hypothesis::Arith(_) => {}
                        Hypothesis::Input(l) => {
                            assert_eq!(guards[0], CmpOp::Eq);
                            assert!(matches!(l.pred, InputPred::Letter(_)));
                            assert!(l.positive && l.term == Term::x(0));
                        }
                        Hypothesis::Comp(c) => {
                            let off = c.var_offsets();
                            assert!(matches!(off, (0, 0) | (1, 0) | (0, -1)), "read {off:?}");
                            if off != (0, 0) {
                                reads += 1;
                                assert_eq!(guards[0], CmpOp::Lt);
                            }
                        }
                    }
                }
                assert!(reads <= 1, "at most one inner-neighbour read in {cl:?}");
            }
            assert_eq!(contras, 1);
        }
    }

    #[test]
    fn condition_sets_merge_and_shift() {
        let a = Ob::seed(Cond::At(2));
        let b = Ob::seed(Cond::End(0));
        let ab = a.merge(&b).unwrap();
        assert_eq!(ab.ex, Some(2));
        assert_eq!(ab.ey, Some(0));
        assert!(a.implies(&ab) && !ab.implies(&a));
        assert!(a.merge(&Ob::seed(Cond::At(3))).is_none());

        let moved = ab.shift_left().unwrap();
        assert_eq!(moved.ex, Some(1));
        assert!(moved.shift_left().is_none());
        assert!(ab.shift_down().is_none());

        let low = Ob::seed(Cond::Low(1, 0));
        let m = low.shift_left().unwrap();
        assert_eq!(m.lx, vec![(0, 0)]);
        assert!(m.shift_left().is_none());
        assert!(m.shift_down().is_some());
        assert!(low.merge(&Ob::seed(Cond::Low(1, 1))).is_none());
        assert!(low.merge(&Ob::seed(Cond::High(1, 1))).is_some());
    }
}
