//! Stepwise rewriting of the two predecessor fragments toward normal form.
//!
//! The pipeline turns an arbitrary (validated, canonicalized) formula into
//! one whose clauses read only immediate-predecessor sites, with all input
//! access concentrated in border clauses.  Stages, each preserving the
//! language site by site:
//!
//! * `bottom` — funnel every contradiction through one transported predicate;
//! * `letters` — replace letter atoms by carrier predicates threaded from
//!   the borders;
//! * `shifts` — contract far reads into chains of distance-one predicates;
//! * `positions` — turn `v>a` / `v=a` comparisons into threaded predicates;
//! * `borders` — turn remaining `min`/`max` literals into atoms, keeping
//!   exactly the `~min` guards that accompany a predecessor read;
//! * `fold` — restrict to sites `x <= y`, representing a fact at `(y,x)` by
//!   a mirror predicate at `(x,y)`;
//! * `tracks` — resolve `max(y)` dependence by splitting affected predicates
//!   into a "y is the last position" track and its complement;
//! * `inputs` — expand every border clause into the strict input shapes
//!   (one clause per letter and `min`-status).
//!
//! The result is consumed by the clause-elimination pass, which rebuilds the
//! computation clauses from scratch; nothing here needs to survive it.

use crate::letters::LetterId;
use crate::logic::{
    ArithAtom, Clause, CmpOp, CompAtom, Conclusion, ConstAtom, ConstRhs, Formula, FragmentKind,
    Hypothesis, InputLiteral, InputPred, PredId, Term, Var,
};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Tag {
    /// Border clause; its literals are kept readable for the input expansion.
    Init,
    /// Ordinary clause; all rewriting applies.
    Comp,
    /// Diagonal/order infrastructure; exempt from folding.
    Order,
    /// The unique final contradiction clause.
    Contra,
}

fn lmin(v: Var, positive: bool) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Min,
        positive,
        term: Term::new(v, 0),
    })
}

fn lmax(v: Var, positive: bool) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Max,
        positive,
        term: Term::new(v, 0),
    })
}

fn lletter(s: LetterId, v: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Letter(s),
        positive: true,
        term: Term::new(v, 0),
    })
}

/// Straight atom `P(x+dx, y+dy)`.
fn at(p: PredId, dx: i32, dy: i32) -> Hypothesis {
    Hypothesis::Comp(CompAtom::xy(p, dx, dy))
}

/// Transposed atom `P(y, x)`.
fn at_t(p: PredId) -> Hypothesis {
    Hypothesis::Comp(CompAtom::yx(p, 0, 0))
}

fn heq() -> Hypothesis {
    Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Eq))
}

/// `v > k` in canonical form: the `~min` literal for distance one, a
/// comparison atom beyond.
fn hyp_gt(v: Var, k: u32) -> Hypothesis {
    if k == 1 {
        lmin(v, false)
    } else {
        Hypothesis::Arith(ArithAtom::Const(ConstAtom {
            var: v,
            op: CmpOp::Gt,
            rhs: ConstRhs::Const(k),
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Eta {
    Min,
    NotMin,
    Max,
    NotMax,
}

impl Eta {
    fn of(l: &InputLiteral) -> Option<Eta> {
        match (l.pred, l.positive) {
            (InputPred::Min, true) => Some(Eta::Min),
            (InputPred::Min, false) => Some(Eta::NotMin),
            (InputPred::Max, true) => Some(Eta::Max),
            (InputPred::Max, false) => Some(Eta::NotMax),
            (InputPred::Letter(_), _) => None,
        }
    }

    fn literal(self, v: Var) -> Hypothesis {
        match self {
            Eta::Min => lmin(v, true),
            Eta::NotMin => lmin(v, false),
            Eta::Max => lmax(v, true),
            Eta::NotMax => lmax(v, false),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Eta::Min => "Min",
            Eta::NotMin => "NotMin",
            Eta::Max => "Max",
            Eta::NotMax => "NotMax",
        }
    }
}

fn var_name(v: Var) -> &'static str {
    match v {
        Var::X => "x",
        Var::Y => "y",
    }
}

/// Formula under construction plus the clause roles the steps depend on.
pub(super) struct Staged {
    pub f: Formula,
    pub tags: Vec<Tag>,
    pub bot: PredId,
    /// Letter carriers: `(v, s)` holds where the letter at coordinate `v`'s
    /// position is `s`.
    w: BTreeMap<(Var, LetterId), PredId>,
    /// Border-literal carriers.
    eta: BTreeMap<(Var, Eta), PredId>,
    /// Position comparisons `(v, is_eq, k)`.
    cst: BTreeMap<(Var, bool, u32), PredId>,
    /// Far-read contractions `(base, a, b)` = base read at `(x-a, y-b)`.
    shifts: BTreeMap<(PredId, u32, u32), PredId>,
    /// `x = y`, `x = y+1` and `x < y` site predicates.
    diag: Option<PredId>,
    below: Option<PredId>,
    above: Option<PredId>,
    /// Set once the borders step has run: ordinary clauses created from then
    /// on must carry border atoms instead of `min`/`max` literals.
    borders_done: bool,
}

impl Staged {
    fn new(f: Formula) -> Staged {
        let tags = vec![Tag::Comp; f.clauses.len()];
        Staged {
            f,
            tags,
            bot: usize::MAX,
            w: BTreeMap::new(),
            eta: BTreeMap::new(),
            cst: BTreeMap::new(),
            shifts: BTreeMap::new(),
            diag: None,
            below: None,
            above: None,
            borders_done: false,
        }
    }

    fn push(&mut self, hyps: Vec<Hypothesis>, concl: Conclusion, tag: Tag) {
        self.f.clauses.push(Clause::new(hyps, concl));
        self.tags.push(tag);
    }

    fn dio(&self) -> bool {
        self.f.kind == FragmentKind::PredDio
    }

    fn ensure_w(&mut self, v: Var, s: LetterId) -> PredId {
        if let Some(&id) = self.w.get(&(v, s)) {
            return id;
        }
        let name = format!("W{}.{}", var_name(v), self.f.alphabet.letter(s));
        let id = self.f.fresh_pred(&name);
        self.w.insert((v, s), id);
        if self.dio() {
            self.push(vec![heq(), lletter(s, v)], Conclusion::Pred(id), Tag::Init);
        } else {
            let border = v.other();
            self.push(
                vec![lletter(s, v), lmin(border, true)],
                Conclusion::Pred(id),
                Tag::Init,
            );
        }
        // thread along the coordinate the carrier does not depend on
        match v {
            Var::X => self.push(
                vec![at(id, 0, -1), lmin(Var::Y, false)],
                Conclusion::Pred(id),
                Tag::Comp,
            ),
            Var::Y => self.push(
                vec![at(id, -1, 0), lmin(Var::X, false)],
                Conclusion::Pred(id),
                Tag::Comp,
            ),
        }
        id
    }

    fn ensure_eta(&mut self, v: Var, e: Eta) -> PredId {
        if let Some(&id) = self.eta.get(&(v, e)) {
            return id;
        }
        let name = format!("{}.{}", e.name(), var_name(v));
        let id = self.f.fresh_pred(&name);
        self.eta.insert((v, e), id);
        let border = v.other();
        self.push(
            vec![e.literal(v), lmin(border, true)],
            Conclusion::Pred(id),
            Tag::Init,
        );
        match v {
            Var::X => self.push(
                vec![at(id, 0, -1), lmin(Var::Y, false)],
                Conclusion::Pred(id),
                Tag::Comp,
            ),
            Var::Y => self.push(
                vec![at(id, -1, 0), lmin(Var::X, false)],
                Conclusion::Pred(id),
                Tag::Comp,
            ),
        }
        id
    }

    fn ensure_cst(&mut self, v: Var, is_eq: bool, k: u32) -> PredId {
        debug_assert!(k >= 1);
        if let Some(&id) = self.cst.get(&(v, is_eq, k)) {
            return id;
        }
        let name = format!(
            "{}{}{}",
            if v == Var::X { "X" } else { "Y" },
            if is_eq { "eq" } else { "gt" },
            k
        );
        let id = self.f.fresh_pred(&name);
        self.cst.insert((v, is_eq, k), id);
        if k == 1 {
            let base = if self.borders_done {
                let e = if is_eq { Eta::Min } else { Eta::NotMin };
                at(self.ensure_eta(v, e), 0, 0)
            } else {
                lmin(v, is_eq)
            };
            self.push(vec![base], Conclusion::Pred(id), Tag::Comp);
        } else {
            let prev = self.ensure_cst(v, is_eq, k - 1);
            let read = match v {
                Var::X => at(prev, -1, 0),
                Var::Y => at(prev, 0, -1),
            };
            self.push(vec![read, lmin(v, false)], Conclusion::Pred(id), Tag::Comp);
        }
        id
    }

    /// The contraction of `base` read `a` back in x and `b` back in y:
    /// holds at `(x,y)` iff `x>a`, `y>b` and `base(x-a, y-b)`.
    fn ensure_shift(&mut self, base: PredId, a: u32, b: u32) -> PredId {
        if (a, b) == (0, 0) {
            return base;
        }
        if let Some(&id) = self.shifts.get(&(base, a, b)) {
            return id;
        }
        let id = if b == 0 {
            let prev = self.ensure_shift(base, a - 1, 0);
            let name = format!("{}.x{}", self.f.pred_name(base), a);
            let id = self.f.fresh_pred(&name);
            self.push(
                vec![hyp_gt(Var::X, a), at(prev, -1, 0)],
                Conclusion::Pred(id),
                Tag::Comp,
            );
            id
        } else {
            let prev = self.ensure_shift(base, a, b - 1);
            let name = if a == 0 {
                format!("{}.y{}", self.f.pred_name(base), b)
            } else {
                format!("{}.x{}y{}", self.f.pred_name(base), a, b)
            };
            let id = self.f.fresh_pred(&name);
            let mut hyps = Vec::new();
            if a > 0 {
                hyps.push(hyp_gt(Var::X, a));
            }
            hyps.push(hyp_gt(Var::Y, b));
            hyps.push(at(prev, 0, -1));
            self.push(hyps, Conclusion::Pred(id), Tag::Comp);
            id
        };
        self.shifts.insert((base, a, b), id);
        id
    }

    fn ensure_order(&mut self) -> (PredId, PredId) {
        if let (Some(d), Some(a)) = (self.diag, self.above) {
            return (d, a);
        }
        let diag = self.f.fresh_pred("Diag");
        let below = self.f.fresh_pred("BelowDiag");
        let above = self.f.fresh_pred("AboveDiag");
        self.diag = Some(diag);
        self.below = Some(below);
        self.above = Some(above);
        self.push(
            vec![lmin(Var::X, true), lmin(Var::Y, true)],
            Conclusion::Pred(diag),
            Tag::Init,
        );
        // x = y+1, threaded off the diagonal and back onto it
        self.push(
            vec![lmin(Var::X, false), at(diag, -1, 0)],
            Conclusion::Pred(below),
            Tag::Order,
        );
        self.push(
            vec![lmin(Var::Y, false), at(below, 0, -1)],
            Conclusion::Pred(diag),
            Tag::Order,
        );
        self.push(
            vec![lmin(Var::Y, false), at(diag, 0, -1)],
            Conclusion::Pred(above),
            Tag::Order,
        );
        self.push(
            vec![lmin(Var::Y, false), at(above, 0, -1)],
            Conclusion::Pred(above),
            Tag::Order,
        );
        (diag, above)
    }

    /// Drops duplicate clauses, keeping first occurrences and their tags.
    fn dedup(&mut self) {
        let mut seen: BTreeSet<(Vec<Hypothesis>, Conclusion)> = BTreeSet::new();
        let mut clauses = Vec::with_capacity(self.f.clauses.len());
        let mut tags = Vec::with_capacity(self.tags.len());
        for (cl, tag) in self.f.clauses.drain(..).zip(self.tags.drain(..)) {
            let mut key = cl.hyps.clone();
            key.sort();
            key.dedup();
            if seen.insert((key, cl.concl)) {
                clauses.push(cl);
                tags.push(tag);
            }
        }
        self.f.clauses = clauses;
        self.tags = tags;
    }
}

/// Funnels every contradiction through one transported bottom predicate and
/// installs the unique final contradiction clause.
fn step_bottom(st: &mut Staged) {
    let bot = st.f.fresh_pred("Bot");
    st.bot = bot;
    st.f.bottom = Some(bot);
    for cl in &mut st.f.clauses {
        if cl.concl == Conclusion::False {
            cl.concl = Conclusion::Pred(bot);
        }
    }
    st.push(
        vec![lmin(Var::X, false), at(bot, -1, 0)],
        Conclusion::Pred(bot),
        Tag::Comp,
    );
    st.push(
        vec![lmin(Var::Y, false), at(bot, 0, -1)],
        Conclusion::Pred(bot),
        Tag::Comp,
    );
    st.push(
        vec![lmax(Var::X, true), lmax(Var::Y, true), at(bot, 0, 0)],
        Conclusion::False,
        Tag::Contra,
    );
}

/// Replaces every letter atom in an ordinary clause by its carrier read at
/// the same position.
fn step_letters(st: &mut Staged) {
    let len = st.f.clauses.len();
    for ci in 0..len {
        if st.tags[ci] != Tag::Comp {
            continue;
        }
        for hi in 0..st.f.clauses[ci].hyps.len() {
            let lit = match &st.f.clauses[ci].hyps[hi] {
                Hypothesis::Input(l) if matches!(l.pred, InputPred::Letter(_)) => *l,
                _ => continue,
            };
            let s = match lit.pred {
                InputPred::Letter(s) => s,
                _ => unreachable!(),
            };
            let id = st.ensure_w(lit.term.var, s);
            let replacement = match lit.term.var {
                Var::X => at(id, lit.term.offset, 0),
                Var::Y => at(id, 0, lit.term.offset),
            };
            st.f.clauses[ci].hyps[hi] = replacement;
        }
    }
}

/// Contracts every far read into a distance-one read of a shift predicate.
/// A straight read lands on a neighbouring site; a transposed read becomes
/// a transposed zero-offset read, which the fold resolves.
fn step_shifts(st: &mut Staged) {
    let len = st.f.clauses.len();
    for ci in 0..len {
        if st.tags[ci] != Tag::Comp {
            continue;
        }
        for hi in 0..st.f.clauses[ci].hyps.len() {
            let c = match &st.f.clauses[ci].hyps[hi] {
                Hypothesis::Comp(c) => *c,
                _ => continue,
            };
            let replacement = if c.is_straight() {
                let (a, b) = (-c.arg1.offset, -c.arg2.offset);
                debug_assert!(a >= 0 && b >= 0, "forward offsets were rejected earlier");
                let (a, b) = (a as u32, b as u32);
                match (a, b) {
                    (0, 0) | (1, 0) | (0, 1) => continue,
                    _ if b >= 1 => at(st.ensure_shift(c.pred, a, b - 1), 0, -1),
                    _ => at(st.ensure_shift(c.pred, a - 1, 0), -1, 0),
                }
            } else {
                // P(y-b, x-a): contract both offsets, leaving a pure P'(y,x)
                let (b, a) = (-c.arg1.offset, -c.arg2.offset);
                debug_assert!(a >= 0 && b >= 0);
                if (a, b) == (0, 0) {
                    continue;
                }
                at_t(st.ensure_shift(c.pred, b as u32, a as u32))
            };
            st.f.clauses[ci].hyps[hi] = replacement;
        }
    }
}

/// Replaces position comparisons by reads of threaded comparison predicates.
fn step_positions(st: &mut Staged) {
    let len = st.f.clauses.len();
    for ci in 0..len {
        if st.tags[ci] != Tag::Comp {
            continue;
        }
        for hi in 0..st.f.clauses[ci].hyps.len() {
            let c = match &st.f.clauses[ci].hyps[hi] {
                Hypothesis::Arith(ArithAtom::Const(c)) => *c,
                _ => continue,
            };
            let k = match c.rhs {
                ConstRhs::Const(k) => k,
                ConstRhs::NMinus(_) => unreachable!("n-relative atoms were canonicalized away"),
            };
            debug_assert!(k >= 2, "distance-one forms were canonicalized to literals");
            let is_eq = match c.op {
                CmpOp::Eq => true,
                CmpOp::Gt => false,
                _ => unreachable!("canonical comparisons are = or >"),
            };
            let id = st.ensure_cst(c.var, is_eq, k);
            st.f.clauses[ci].hyps[hi] = at(id, 0, 0);
        }
    }
}

/// Turns the remaining `min`/`max` literals of ordinary clauses into atoms.
/// A `~min` literal guarding a predecessor read in the same direction stays
/// a literal; every predecessor read gets such a guard if it lacks one.
fn step_borders(st: &mut Staged) {
    let len = st.f.clauses.len();
    for ci in 0..len {
        if st.tags[ci] != Tag::Comp {
            continue;
        }
        let (mut reads_x, mut reads_y) = (false, false);
        for c in st.f.clauses[ci].comp_hyps() {
            if c.is_straight() {
                match (c.arg1.offset, c.arg2.offset) {
                    (-1, 0) => reads_x = true,
                    (0, -1) => reads_y = true,
                    _ => {}
                }
            }
        }
        let hyps = std::mem::take(&mut st.f.clauses[ci].hyps);
        let mut out: Vec<Hypothesis> = Vec::with_capacity(hyps.len());
        let push = |h: Hypothesis, out: &mut Vec<Hypothesis>| {
            if !out.contains(&h) {
                out.push(h);
            }
        };
        for h in hyps {
            match &h {
                Hypothesis::Input(l) => {
                    let e = Eta::of(l).expect("letters were replaced in an earlier step");
                    debug_assert_eq!(l.term.offset, 0, "offset extrema were canonicalized away");
                    let keeps_guard = e == Eta::NotMin
                        && ((l.term.var == Var::X && reads_x) || (l.term.var == Var::Y && reads_y));
                    if keeps_guard {
                        push(h, &mut out);
                    } else {
                        let id = st.ensure_eta(l.term.var, e);
                        push(at(id, 0, 0), &mut out);
                    }
                }
                _ => push(h, &mut out),
            }
        }
        if reads_x {
            push(lmin(Var::X, false), &mut out);
        }
        if reads_y {
            push(lmin(Var::Y, false), &mut out);
        }
        st.f.clauses[ci].hyps = out;
    }
    st.borders_done = true;
}

/// Restricts the formula to the half grid `x <= y`.  A fact of `P` at a site
/// `(u,v)` with `u > v` is represented by the mirror predicate `inv(P)` at
/// `(v,u)`; letter/border/position carriers mirror onto their coordinate
/// twins, and the bottom predicate absorbs its own mirror (sound because it
/// has transports in both directions, and only its diagonal corner value is
/// ever read).
fn step_fold(mut st: Staged) -> Staged {
    let (diag, above) = st.ensure_order();

    // close the carrier registries under coordinate exchange so every carrier
    // has a twin to mirror onto
    for (v, s) in st.w.keys().copied().collect::<Vec<_>>() {
        st.ensure_w(v.other(), s);
    }
    for (v, e) in st.eta.keys().copied().collect::<Vec<_>>() {
        st.ensure_eta(v.other(), e);
    }
    for (v, q, k) in st.cst.keys().copied().collect::<Vec<_>>() {
        st.ensure_cst(v.other(), q, k);
    }

    let snapshot = st.f.preds.len();
    let mut inv: Vec<Option<PredId>> = vec![None; snapshot];
    inv[st.bot] = Some(st.bot);
    inv[diag] = Some(diag);
    for ((v, s), &id) in &st.w {
        inv[id] = Some(st.w[&(v.other(), *s)]);
    }
    for ((v, e), &id) in &st.eta {
        inv[id] = Some(st.eta[&(v.other(), *e)]);
    }
    for ((v, q, k), &id) in &st.cst {
        inv[id] = Some(st.cst[&(v.other(), *q, *k)]);
    }
    let below = st.below.expect("order infrastructure was just created");
    let mut fresh_pairs: Vec<(PredId, PredId)> = Vec::new();
    for p in 0..snapshot {
        if inv[p].is_none() && p != below && p != above {
            let name = format!("{}.inv", st.f.pred_name(p));
            let m = st.f.fresh_pred(&name);
            inv.push(Some(p)); // the mirror's mirror
            inv[p] = Some(m);
            fresh_pairs.push((p, m));
        }
    }
    let inv = |p: PredId| inv[p].expect("order predicates never appear in folded clauses");

    let mut out: Vec<(Clause, Tag)> = Vec::new();
    let clauses = std::mem::take(&mut st.f.clauses);
    let tags = std::mem::take(&mut st.tags);

    for (cl, tag) in clauses.iter().zip(&tags) {
        match tag {
            Tag::Contra | Tag::Order => out.push((cl.clone(), *tag)),
            Tag::Init => {
                let has_min_x = cl.has_hyp(&lmin(Var::X, true));
                let has_min_y = cl.has_hyp(&lmin(Var::Y, true));
                if has_min_y && !has_min_x {
                    // border clause along y=1: its sites fall outside the half
                    // grid, so re-anchor it on the x=1 border as a mirror fact
                    let hyps = cl
                        .hyps
                        .iter()
                        .map(|h| match h {
                            Hypothesis::Input(l) => Hypothesis::Input(InputLiteral {
                                term: Term::new(l.term.var.other(), l.term.offset),
                                ..*l
                            }),
                            _ => unreachable!("border clauses carry only literals"),
                        })
                        .collect();
                    let concl = match cl.concl {
                        Conclusion::Pred(p) => Conclusion::Pred(inv(p)),
                        Conclusion::False => unreachable!(),
                    };
                    out.push((Clause::new(hyps, concl), Tag::Init));
                } else {
                    out.push((cl.clone(), Tag::Init));
                }
            }
            Tag::Comp => {
                let concl = match cl.concl {
                    Conclusion::Pred(p) => p,
                    Conclusion::False => unreachable!("contradictions were funneled earlier"),
                };
                let on_diagonal = cl.hyps.iter().any(|h| matches!(h, Hypothesis::Arith(_)));

                // diagonal variant: reads below the diagonal flip into mirror
                // reads to its left
                {
                    let mut hyps = vec![at(diag, 0, 0)];
                    let mut needs_x_guard = false;
                    for h in &cl.hyps {
                        match h {
                            Hypothesis::Comp(c) if c.is_straight() => {
                                match (c.arg1.offset, c.arg2.offset) {
                                    (0, -1) => {
                                        push_dedup(&mut hyps, at(inv(c.pred), -1, 0));
                                        needs_x_guard = true;
                                    }
                                    (-1, 0) => {
                                        push_dedup(&mut hyps, at(c.pred, -1, 0));
                                        needs_x_guard = true;
                                    }
                                    _ => push_dedup(&mut hyps, *h),
                                }
                            }
                            Hypothesis::Comp(c) => push_dedup(&mut hyps, at(c.pred, 0, 0)),
                            Hypothesis::Input(l) => {
                                debug_assert!(l.pred == InputPred::Min && !l.positive);
                                // on the diagonal the two guard coordinates
                                // coincide; canonicalize to the x guard
                                if l.term.var == Var::X {
                                    push_dedup(&mut hyps, *h);
                                }
                            }
                            Hypothesis::Arith(_) => {} // x=y, subsumed by the guard atom
                        }
                    }
                    if needs_x_guard {
                        push_dedup(&mut hyps, lmin(Var::X, false));
                    }
                    out.push((Clause::new(hyps, Conclusion::Pred(concl)), Tag::Comp));
                }

                if !on_diagonal {
                    // strict upper variant: everything stays in place
                    let mut hyps = vec![at(above, 0, 0)];
                    for h in &cl.hyps {
                        match h {
                            Hypothesis::Comp(c) if c.is_transposed() => {
                                push_dedup(&mut hyps, at(inv(c.pred), 0, 0))
                            }
                            _ => push_dedup(&mut hyps, *h),
                        }
                    }
                    out.push((Clause::new(hyps, Conclusion::Pred(concl)), Tag::Comp));

                    // mirrored variant: the clause as seen from the other
                    // orientation; coordinates, guards and read directions swap
                    let mut hyps = vec![at(above, 0, 0)];
                    for h in &cl.hyps {
                        match h {
                            Hypothesis::Comp(c) if c.is_straight() => {
                                let m = inv(c.pred);
                                match (c.arg1.offset, c.arg2.offset) {
                                    (0, 0) => push_dedup(&mut hyps, at(m, 0, 0)),
                                    (-1, 0) => push_dedup(&mut hyps, at(m, 0, -1)),
                                    (0, -1) => push_dedup(&mut hyps, at(m, -1, 0)),
                                    _ => unreachable!("far reads were contracted earlier"),
                                }
                            }
                            Hypothesis::Comp(c) => push_dedup(&mut hyps, at(c.pred, 0, 0)),
                            Hypothesis::Input(l) => push_dedup(
                                &mut hyps,
                                Hypothesis::Input(InputLiteral {
                                    term: Term::new(l.term.var.other(), l.term.offset),
                                    ..*l
                                }),
                            ),
                            Hypothesis::Arith(_) => unreachable!(),
                        }
                    }
                    out.push((Clause::new(hyps, Conclusion::Pred(inv(concl))), Tag::Comp));
                }
            }
        }
    }

    // a fact and its mirror agree on the diagonal
    for (p, m) in fresh_pairs
        .iter()
        .copied()
        .chain(pair_list(&st.w))
        .chain(pair_list(&st.eta))
        .chain(cst_pairs(&st.cst))
    {
        out.push((
            Clause::new(vec![at(diag, 0, 0), at(p, 0, 0)], Conclusion::Pred(m)),
            Tag::Comp,
        ));
        out.push((
            Clause::new(vec![at(diag, 0, 0), at(m, 0, 0)], Conclusion::Pred(p)),
            Tag::Comp,
        ));
    }

    let (clauses, tags): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    st.f.clauses = clauses;
    st.tags = tags;
    st.dedup();
    st
}

fn push_dedup(hyps: &mut Vec<Hypothesis>, h: Hypothesis) {
    if !hyps.contains(&h) {
        hyps.push(h);
    }
}

/// Each x-side carrier paired with its y-side twin, once per pair.
fn pair_list<K: Ord + Copy>(
    m: &BTreeMap<(Var, K), PredId>,
) -> impl Iterator<Item = (PredId, PredId)> + '_ {
    m.iter().filter_map(|((v, k), &id)| match v {
        Var::X => Some((id, m[&(Var::Y, *k)])),
        Var::Y => None,
    })
}

fn cst_pairs(
    m: &BTreeMap<(Var, bool, u32), PredId>,
) -> impl Iterator<Item = (PredId, PredId)> + '_ {
    m.iter().filter_map(|((v, q, k), &id)| match v {
        Var::X => Some((id, m[&(Var::Y, *q, *k)])),
        Var::Y => None,
    })
}

/// Splits every predicate whose value depends on whether `y` is the last
/// position into a `.end` track (assume it is) and a `.mid` track (assume it
/// is not).  Reads one column to the left always come from the `.mid` track;
/// the final contradiction reads the `.end` track at the corner, where the
/// assumption is true.
fn step_tracks(mut st: Staged) -> Staged {
    let n = st.f.preds.len();
    let mut dep = vec![false; n];
    for (cl, tag) in st.f.clauses.iter().zip(&st.tags) {
        if *tag != Tag::Init {
            continue;
        }
        let max_content = cl.hyps.iter().any(|h| {
            matches!(h, Hypothesis::Input(l) if l.pred == InputPred::Max)
        });
        if max_content {
            if let Conclusion::Pred(p) = cl.concl {
                dep[p] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for (cl, tag) in st.f.clauses.iter().zip(&st.tags) {
            if *tag != Tag::Comp && *tag != Tag::Order {
                continue;
            }
            if let Conclusion::Pred(p) = cl.concl {
                if dep[p] {
                    continue;
                }
                // same-column reads propagate the dependence; reads of the
                // previous column resolve to the definite .mid value
                let reads_dep = cl.comp_hyps().any(|c| {
                    debug_assert!(c.is_straight(), "the fold left only straight reads");
                    dep[c.pred] && matches!((c.arg1.offset, c.arg2.offset), (0, 0) | (-1, 0))
                });
                if reads_dep {
                    dep[p] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut end = vec![None; n];
    let mut mid = vec![None; n];
    for p in 0..n {
        if dep[p] {
            end[p] = Some(st.f.fresh_pred(&format!("{}.end", st.f.pred_name(p))));
            mid[p] = Some(st.f.fresh_pred(&format!("{}.mid", st.f.pred_name(p))));
        }
    }

    let track = |p: PredId, last: bool| -> PredId {
        if !dep[p] {
            p
        } else if last {
            end[p].unwrap()
        } else {
            mid[p].unwrap()
        }
    };
    let map_read = |c: &CompAtom, last: bool| -> Hypothesis {
        match (c.arg1.offset, c.arg2.offset) {
            (0, -1) => at(track(c.pred, false), 0, -1),
            (dx, dy) => at(track(c.pred, last), dx, dy),
        }
    };

    let clauses = std::mem::take(&mut st.f.clauses);
    let tags = std::mem::take(&mut st.tags);
    let mut out: Vec<(Clause, Tag)> = Vec::new();
    for (cl, tag) in clauses.iter().zip(&tags) {
        match tag {
            Tag::Contra => {
                let b = track(st.bot, true);
                out.push((
                    Clause::new(
                        vec![lmax(Var::X, true), lmax(Var::Y, true), at(b, 0, 0)],
                        Conclusion::False,
                    ),
                    Tag::Contra,
                ));
            }
            Tag::Init => {
                let p = match cl.concl {
                    Conclusion::Pred(p) => p,
                    Conclusion::False => unreachable!(),
                };
                if !dep[p] {
                    out.push((cl.clone(), Tag::Init));
                    continue;
                }
                for last in [true, false] {
                    let mut hyps = Vec::new();
                    let mut admissible = true;
                    for h in &cl.hyps {
                        match h {
                            Hypothesis::Input(l) if l.pred == InputPred::Max => {
                                // the literal is decided by the track's assumption
                                if l.positive != last {
                                    admissible = false;
                                }
                            }
                            _ => hyps.push(*h),
                        }
                    }
                    if admissible {
                        out.push((Clause::new(hyps, Conclusion::Pred(track(p, last))), Tag::Init));
                    }
                }
            }
            Tag::Comp | Tag::Order => {
                let p = match cl.concl {
                    Conclusion::Pred(p) => p,
                    Conclusion::False => unreachable!(),
                };
                let variants: &[bool] = if dep[p] { &[true, false] } else { &[true] };
                for &last in variants {
                    let hyps = cl
                        .hyps
                        .iter()
                        .map(|h| match h {
                            Hypothesis::Comp(c) => map_read(c, last),
                            other => *other,
                        })
                        .collect();
                    out.push((Clause::new(hyps, Conclusion::Pred(track(p, last))), *tag));
                }
            }
        }
    }
    let bot = track(st.bot, true);
    st.bot = bot;
    st.f.bottom = Some(bot);
    let (clauses, tags): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    st.f.clauses = clauses;
    st.tags = tags;
    st.dedup();
    st
}

/// Expands every border clause into the strict input shapes: one clause per
/// letter and `min`-status of the read coordinate.  In the diagonal fragment,
/// border clauses that fire away from the diagonal are re-expressed through
/// threaded position markers instead.
fn step_inputs(st: &mut Staged) {
    let dio = st.dio();
    let clauses = std::mem::take(&mut st.f.clauses);
    let tags = std::mem::take(&mut st.tags);
    let mut out: Vec<(Clause, Tag)> = Vec::new();

    // diagonal-fragment markers, created on first use
    let mut markers: Option<(PredId, PredId)> = None; // (x=1 carrier, y>1 carrier)
    let letters: Vec<LetterId> = st.f.alphabet.iter().map(|(s, _)| s).collect();

    let mut ensure_markers = |st: &mut Staged, out: &mut Vec<(Clause, Tag)>| -> (PredId, PredId) {
        if let Some(m) = markers {
            return m;
        }
        let row1 = st.f.fresh_pred("Row1");
        let origin = st.f.fresh_pred("Origin");
        let colgt1 = st.f.fresh_pred("ColGt1");
        for &s in &letters {
            out.push((
                Clause::new(
                    vec![heq(), lmin(Var::X, true), lletter(s, Var::X)],
                    Conclusion::Pred(row1),
                ),
                Tag::Init,
            ));
            out.push((
                Clause::new(
                    vec![heq(), lmin(Var::X, true), lletter(s, Var::X)],
                    Conclusion::Pred(origin),
                ),
                Tag::Init,
            ));
        }
        out.push((
            Clause::new(
                vec![lmin(Var::Y, false), at(row1, 0, -1)],
                Conclusion::Pred(row1),
            ),
            Tag::Comp,
        ));
        out.push((
            Clause::new(
                vec![lmin(Var::Y, false), at(origin, 0, -1)],
                Conclusion::Pred(colgt1),
            ),
            Tag::Comp,
        ));
        out.push((
            Clause::new(
                vec![lmin(Var::Y, false), at(colgt1, 0, -1)],
                Conclusion::Pred(colgt1),
            ),
            Tag::Comp,
        ));
        markers = Some((row1, colgt1));
        (row1, colgt1)
    };

    for (cl, tag) in clauses.iter().zip(&tags) {
        if *tag != Tag::Init {
            out.push((cl.clone(), *tag));
            continue;
        }
        let concl = cl.concl;
        // classify the border clause by its literal content
        let mut letter: Option<LetterId> = None;
        let mut min_y: Option<bool> = None;
        let mut has_min_x = false;
        let mut has_eq = false;
        for h in &cl.hyps {
            match h {
                Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Eq)) => has_eq = true,
                Hypothesis::Input(l) => match l.pred {
                    InputPred::Letter(s) => letter = Some(s),
                    InputPred::Min if l.term.var == Var::X && l.positive => has_min_x = true,
                    InputPred::Min if l.term.var == Var::Y => min_y = Some(l.positive),
                    _ => unreachable!("max literals were resolved by the track split"),
                },
                _ => unreachable!("border clauses carry only literals"),
            }
        }

        if dio {
            if has_eq || (has_min_x && min_y == Some(true)) {
                // fires on the diagonal only: for min&min the site is (1,1)
                let statuses: &[bool] = if has_min_x || min_y == Some(true) {
                    &[true]
                } else {
                    &[false, true]
                };
                let ss: Vec<LetterId> = match letter {
                    Some(s) => vec![s],
                    None => letters.clone(),
                };
                for &status in statuses {
                    for &s in &ss {
                        out.push((
                            Clause::new(
                                vec![heq(), lmin(Var::X, status), lletter(s, Var::X)],
                                concl,
                            ),
                            Tag::Init,
                        ));
                    }
                }
            } else {
                // fires on the x=1 column: reach it from the diagonal corner
                debug_assert!(has_min_x && letter.is_none());
                let (row1, colgt1) = ensure_markers(st, &mut out);
                let mut hyps = vec![at(row1, 0, 0)];
                match min_y {
                    None => {}
                    Some(false) => hyps.push(at(colgt1, 0, 0)),
                    Some(true) => {
                        // min(x) & min(y) was handled above
                        unreachable!()
                    }
                }
                out.push((Clause::new(hyps, concl), Tag::Comp));
            }
            continue;
        }

        debug_assert!(has_min_x, "all border clauses were re-anchored on x=1");
        let ss: Vec<LetterId> = match letter {
            Some(s) => vec![s],
            None => letters.clone(),
        };
        let statuses: &[bool] = match min_y {
            Some(true) => &[true],
            Some(false) => &[false],
            None => &[true, false],
        };
        for &s in &ss {
            for &status in statuses {
                out.push((
                    Clause::new(
                        vec![lmin(Var::X, true), lmin(Var::Y, status), lletter(s, Var::Y)],
                        concl,
                    ),
                    Tag::Init,
                ));
            }
        }
    }

    let (clauses, tags): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    st.f.clauses = clauses;
    st.tags = tags;
    st.dedup();
}

/// Runs the whole predecessor pipeline on a canonicalized, guard-complete
/// formula, recording the formula after each stage.
pub(super) fn run(formula: &Formula, trace: &mut super::NormalizationTrace) -> Formula {
    let mut st = Staged::new(formula.clone());
    step_bottom(&mut st);
    trace.push("bottom", &st.f);
    step_letters(&mut st);
    trace.push("letters", &st.f);
    step_shifts(&mut st);
    trace.push("shifts", &st.f);
    step_positions(&mut st);
    trace.push("positions", &st.f);
    step_borders(&mut st);
    trace.push("borders", &st.f);
    let st = step_fold(st);
    trace.push("fold", &st.f);
    let mut st = step_tracks(st);
    trace.push("tracks", &st.f);
    step_inputs(&mut st);
    trace.push("inputs", &st.f);
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

    #[test]
    fn stages_preserve_simple_transport() {
        assert_stages_preserve(
            "logic pred\nalphabet ab\n\
             min(x) & min(y) & Qa(y) -> R(x,y)\n\
             ~min(x) & R(x-1,y) -> R(x,y)\n\
             max(x) & max(y) & R(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_transposed_reads() {
        // rejects words whose first and last letters differ (via a mirror read)
        assert_stages_preserve(
            "logic pred\nalphabet ab\n\
             min(x) & Qa(y) -> A(x,y)\n\
             min(x) & Qb(y) -> B(x,y)\n\
             ~min(x) & A(x-1,y) -> A(x,y)\n\
             ~min(x) & B(x-1,y) -> B(x,y)\n\
             A(y,x) & B(x,y) & max(x) & max(y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_far_reads_and_positions() {
        assert_stages_preserve(
            "logic pred\nalphabet ab\n\
             min(x) & min(y) -> R(x,y)\n\
             ~min(x) & ~min(y) & R(x-1,y-1) -> R(x,y)\n\
             x=3 & Qa(y-2) & R(x,y) -> S(x,y)\n\
             max(x) & max(y) & S(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_max_dependence() {
        // rejects words ending in a, via a max-guarded border clause
        assert_stages_preserve(
            "logic pred\nalphabet ab\n\
             min(x) & max(y) & Qa(y) -> R(x,y)\n\
             ~min(x) & R(x-1,y) -> R(x,y)\n\
             max(x) & max(y) & R(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn stages_preserve_diagonal_fragment() {
        assert_stages_preserve(
            "logic pred-dio\nalphabet ab\n\
             x=y & Qa(x) -> R(x,y)\n\
             ~min(x) & R(x-1,y) -> R(x,y)\n\
             ~min(y) & R(x,y-1) -> R(x,y)\n\
             max(x) & max(y) & R(x,y) -> FALSE\n",
            5,
        );
    }

    #[test]
    fn final_stage_has_strict_border_clauses() {
        let f = prepared(
            "logic pred\nalphabet ab\n\
             min(x) & min(y) & Qa(y) -> R(x,y)\n\
             ~min(x) & R(x-1,y) -> R(x,y)\n\
             max(x) & max(y) & R(x,y) -> FALSE\n",
        );
        let mut trace = NormalizationTrace::default();
        let out = run(&f, &mut trace);
        let mut contras = 0;
        for cl in &out.clauses {
            if cl.concl == Conclusion::False {
                contras += 1;
                continue;
            }
            let literals: Vec<_> = cl
                .hyps
                .iter()
                .filter_map(|h| match h {
                    Hypothesis::Input(l) => Some(l),
                    _ => None,
                })
                .collect();
            // computation clauses keep only negative min guards, so any
            // positive literal marks a border clause
            let is_border = literals.iter().any(|l| l.positive);
            if is_border {
                // strict input shape: min(x), (~)min(y), letter on y
                assert_eq!(cl.hyps.len(), 3, "border clause has exactly three hypotheses");
                assert!(cl.has_hyp(&lmin(Var::X, true)));
                assert!(literals.iter().any(|l| matches!(l.pred, InputPred::Letter(_)) && l.term.var == Var::Y));
            } else {
                // computation shape: atoms plus matching guards only
                for h in &cl.hyps {
                    match h {
                        Hypothesis::Comp(c) => {
                            assert!(c.is_straight());
                            assert!(matches!(
                                (c.arg1.offset, c.arg2.offset),
                                (0, 0) | (-1, 0) | (0, -1)
                            ));
                        }
                        Hypothesis::Input(l) => {
                            assert!(l.pred == InputPred::Min && !l.positive);
                        }
                        Hypothesis::Arith(_) => panic!("arithmetic left in computation clause"),
                    }
                }
            }
        }
        assert_eq!(contras, 1);
    }
}
