//! Final clause-elimination step.
//!
//! After the stage pipeline, every clause is an input clause (reading one
//! letter at a border site), a computation clause reading immediate
//! neighbours, or the final contradiction.  Because the computation clauses
//! apply uniformly across the grid, what a site can derive is a function of
//! two things only: the site's input class (which letter it reads, and
//! whether it is the first) and which neighbour-read patterns can fire
//! there.  This step computes that function once, propositionally, and
//! rebuilds the formula from it:
//!
//! * a *marker* predicate per input class, true exactly at that class's
//!   sites;
//! * a *flag* predicate per neighbour-read pattern, true exactly where the
//!   pattern fires, derived by reading markers and flags at the neighbours;
//! * bottom clauses, one per minimal assumption set that derives the old
//!   bottom predicate.
//!
//! The minimal-support analysis of [`crate::prophorn`] provides the
//! assumption sets; class markers are pairwise exclusive there because a
//! site has at most one class.
//!
//! The inclusion fragment ([`eliminate_incl`]) splits along its own
//! geometry instead.  Diagonal sites read exactly one letter and no
//! neighbours, so a propositional closure per letter decides everything
//! there; sites above the diagonal read no letters at all, so their truth is
//! a function of which inner-neighbour read patterns fire, analyzed with
//! the same minimal-support machinery.  No marker or flag vocabulary is
//! needed: the sets of predicates holding at a site are written out
//! directly.

use super::{NormalizeError, NormalizeOpts};
use crate::letters::LetterId;
use crate::logic::{
    ArithAtom, Clause, CmpOp, CompAtom, Conclusion, Formula, FragmentKind, Hypothesis,
    InputLiteral, InputPred, PredId, Term, Var,
};
use crate::prophorn::{minimal_supports, HornSystem, SupportError, SupportOpts};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    XDec,
    YDec,
}

impl Dir {
    fn offsets(self) -> (i32, i32) {
        match self {
            Dir::XDec => (-1, 0),
            Dir::YDec => (0, -1),
        }
    }

    fn guard(self) -> Hypothesis {
        let v = match self {
            Dir::XDec => Var::X,
            Dir::YDec => Var::Y,
        };
        Hypothesis::Input(InputLiteral {
            pred: InputPred::Min,
            positive: false,
            term: Term::new(v, 0),
        })
    }
}

fn lmin(v: Var, positive: bool) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Min,
        positive,
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

fn lletter(s: LetterId, v: Var) -> Hypothesis {
    Hypothesis::Input(InputLiteral {
        pred: InputPred::Letter(s),
        positive: true,
        term: Term::new(v, 0),
    })
}

fn at(p: PredId, dx: i32, dy: i32) -> Hypothesis {
    Hypothesis::Comp(CompAtom::xy(p, dx, dy))
}

/// The strict input clause of the fragment: class `(is_min, s)` concluding
/// `p`.
fn input_clause(kind: FragmentKind, is_min: bool, s: LetterId, p: PredId) -> Clause {
    let hyps = match kind {
        FragmentKind::PredDio => vec![
            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Eq)),
            lmin(Var::X, is_min),
            lletter(s, Var::X),
        ],
        _ => vec![lmin(Var::X, true), lmin(Var::Y, is_min), lletter(s, Var::Y)],
    };
    Clause::new(hyps, Conclusion::Pred(p))
}

/// Antichain insertion for hypothesis sets: keep only set-minimal bodies.
fn insert_minimal_body(bodies: &mut Vec<BTreeSet<Hypothesis>>, b: BTreeSet<Hypothesis>) {
    if bodies.iter().any(|e| e.is_subset(&b)) {
        return;
    }
    bodies.retain(|e| !b.is_subset(e));
    bodies.push(b);
}

struct Analysis {
    /// `(is_min, letter)` in a fixed order.
    classes: Vec<(bool, LetterId)>,
    /// Distinct neighbour-read patterns, sorted.
    alphas: Vec<Vec<(PredId, Dir)>>,
    /// Minimal assumption sets per old predicate; bits index classes first,
    /// then patterns.
    supports: Vec<Vec<u128>>,
}

impl Analysis {
    fn nclasses(&self) -> usize {
        self.classes.len()
    }
}

/// Classifies the post-pipeline clauses and runs the propositional
/// support analysis.
fn analyze(f: &Formula, opts: &NormalizeOpts) -> Result<Analysis, NormalizeError> {
    let classes: Vec<(bool, LetterId)> = [true, false]
        .into_iter()
        .flat_map(|m| f.alphabet.iter().map(move |(s, _)| (m, s)))
        .collect();
    let class_idx: BTreeMap<(bool, LetterId), usize> =
        classes.iter().copied().enumerate().map(|(i, c)| (c, i)).collect();
    let status_var = match f.kind {
        FragmentKind::PredDio => Var::X,
        _ => Var::Y,
    };

    let mut seeds: Vec<(usize, PredId)> = Vec::new();
    let mut comps: Vec<(Vec<(PredId, Dir)>, Vec<PredId>, PredId)> = Vec::new();
    for cl in &f.clauses {
        let concl = match cl.concl {
            Conclusion::Pred(p) => p,
            Conclusion::False => continue,
        };
        let letter = cl.hyps.iter().find_map(|h| match h {
            Hypothesis::Input(l) => match l.pred {
                InputPred::Letter(s) => Some(s),
                _ => None,
            },
            _ => None,
        });
        if let Some(s) = letter {
            let is_min = cl
                .hyps
                .iter()
                .find_map(|h| match h {
                    Hypothesis::Input(l) if l.pred == InputPred::Min && l.term.var == status_var => {
                        Some(l.positive)
                    }
                    _ => None,
                })
                .expect("input clause carries the status literal");
            seeds.push((class_idx[&(is_min, s)], concl));
        } else {
            let mut alpha: Vec<(PredId, Dir)> = Vec::new();
            let mut theta: Vec<PredId> = Vec::new();
            for h in &cl.hyps {
                match h {
                    Hypothesis::Comp(c) => match (c.arg1.offset, c.arg2.offset) {
                        (0, 0) => theta.push(c.pred),
                        (-1, 0) => alpha.push((c.pred, Dir::XDec)),
                        (0, -1) => alpha.push((c.pred, Dir::YDec)),
                        _ => unreachable!("pipeline output reads immediate neighbours only"),
                    },
                    Hypothesis::Input(l) => {
                        debug_assert!(l.pred == InputPred::Min && !l.positive);
                    }
                    Hypothesis::Arith(_) => unreachable!("pipeline output has no arithmetic"),
                }
            }
            alpha.sort_unstable();
            alpha.dedup();
            comps.push((alpha, theta, concl));
        }
    }

    let alphas: Vec<Vec<(PredId, Dir)>> = comps
        .iter()
        .filter(|(a, _, _)| !a.is_empty())
        .map(|(a, _, _)| a.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let alpha_idx: BTreeMap<&Vec<(PredId, Dir)>, usize> =
        alphas.iter().enumerate().map(|(i, a)| (a, i)).collect();

    let npreds = f.preds.len();
    let nclasses = classes.len();
    let mut sys = HornSystem::new(npreds + nclasses + alphas.len());
    for &(k, p) in &seeds {
        sys.add(vec![npreds + k], p);
    }
    for (alpha, theta, concl) in &comps {
        let mut hyps = theta.clone();
        if !alpha.is_empty() {
            hyps.push(npreds + nclasses + alpha_idx[alpha]);
        }
        sys.add(hyps, *concl);
    }
    let assumptions: Vec<usize> = (npreds..npreds + nclasses + alphas.len()).collect();
    let exclusive = if nclasses == 128 {
        u128::MAX
    } else {
        (1u128 << nclasses) - 1
    };
    let analysis = minimal_supports(
        &sys,
        &assumptions,
        &SupportOpts {
            cap: opts.support_cap,
            exclusive,
        },
    )?;
    let mut supports = analysis.supports;
    supports.truncate(npreds);
    for masks in &mut supports {
        masks.sort_unstable();
    }
    Ok(Analysis {
        classes,
        alphas,
        supports,
    })
}

/// Truth of a fact at one of the corner's predecessor sites, uniform over
/// all word lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CornerTruth {
    Always,
    Never,
    Varies,
}

impl CornerTruth {
    /// Conjunction: a dead conjunct kills the pattern outright, an unstable
    /// one makes the whole pattern unstable.
    fn and(self, other: CornerTruth) -> CornerTruth {
        use CornerTruth::*;
        match (self, other) {
            (Never, _) | (_, Never) => Never,
            (Varies, _) | (_, Varies) => Varies,
            _ => Always,
        }
    }
}

/// What the corner's two predecessor sites satisfy, for predicates whose
/// truth does not depend on the word's letters.
///
/// A predicate is letter-independent when its input clauses come in families
/// covering the whole alphabet (so which letter a site reads never matters)
/// and its computation clauses read only letter-independent predicates.  The
/// truth of such a predicate at a site is then a function of the site and
/// the grid size alone, so evaluating a range of grid sizes decides it.  The
/// sampled range covers every threshold and cycle the pipeline's carrier
/// predicates can exhibit: their conditions advance one site per clause, so
/// a first flip beyond the range would need a longer chain of distinct
/// letter-independent predicates than the formula has.
struct CornerEval {
    dependent: Vec<bool>,
    /// Truth at `(n-1, n)`, the site a corner `(x-1, y)` read sees.
    at_left: Vec<CornerTruth>,
    /// Truth at `(n, n-1)`, the site a corner `(x, y-1)` read sees.
    at_below: Vec<CornerTruth>,
}

impl CornerEval {
    fn new(f: &Formula) -> CornerEval {
        let npreds = f.preds.len();
        let status_var = match f.kind {
            FragmentKind::PredDio => Var::X,
            _ => Var::Y,
        };
        let nletters = f.alphabet.iter().count();

        // split the clauses as in `analyze`, grouping input clauses by
        // conclusion and min-status to detect whole-alphabet families
        let mut families: BTreeMap<(PredId, bool), BTreeSet<LetterId>> = BTreeMap::new();
        let mut comps: Vec<(bool, bool, Vec<(PredId, i32, i32)>, PredId)> = Vec::new();
        for cl in &f.clauses {
            let concl = match cl.concl {
                Conclusion::Pred(p) => p,
                Conclusion::False => continue,
            };
            let letter = cl.hyps.iter().find_map(|h| match h {
                Hypothesis::Input(l) => match l.pred {
                    InputPred::Letter(s) => Some(s),
                    _ => None,
                },
                _ => None,
            });
            if let Some(s) = letter {
                let is_min = cl
                    .hyps
                    .iter()
                    .find_map(|h| match h {
                        Hypothesis::Input(l)
                            if l.pred == InputPred::Min && l.term.var == status_var =>
                        {
                            Some(l.positive)
                        }
                        _ => None,
                    })
                    .expect("input clause carries the status literal");
                families.entry((concl, is_min)).or_default().insert(s);
            } else {
                let mut guard_x = false;
                let mut guard_y = false;
                let mut atoms: Vec<(PredId, i32, i32)> = Vec::new();
                for h in &cl.hyps {
                    match h {
                        Hypothesis::Comp(c) => {
                            atoms.push((c.pred, c.arg1.offset, c.arg2.offset));
                        }
                        Hypothesis::Input(l) => match l.term.var {
                            Var::X => guard_x = true,
                            Var::Y => guard_y = true,
                        },
                        Hypothesis::Arith(_) => {
                            unreachable!("pipeline output has no arithmetic")
                        }
                    }
                }
                comps.push((guard_x, guard_y, atoms, concl));
            }
        }

        // letter dependence: seeded by partial families, closed under reads
        let mut dependent = vec![false; npreds];
        for (&(p, _), letters) in &families {
            if letters.len() < nletters {
                dependent[p] = true;
            }
        }
        loop {
            let mut changed = false;
            for (_, _, atoms, concl) in &comps {
                if !dependent[*concl] && atoms.iter().any(|&(p, _, _)| dependent[p]) {
                    dependent[*concl] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        // sample enough grid sizes to expose every threshold and cycle
        let nfree = dependent.iter().filter(|d| !**d).count();
        let horizon = (2 * nfree + 8).min(240) as u32;
        let mut at_left: Vec<Option<CornerTruth>> = vec![None; npreds];
        let mut at_below: Vec<Option<CornerTruth>> = vec![None; npreds];
        for n in 2..=horizon {
            let nn = n as usize;
            let idx = |p: PredId, x: u32, y: u32| -> usize {
                p * nn * nn + (x as usize - 1) * nn + (y as usize - 1)
            };
            let mut facts = vec![false; npreds * nn * nn];
            loop {
                let mut changed = false;
                for (&(p, is_min), letters) in &families {
                    if dependent[p] || letters.len() < nletters {
                        continue;
                    }
                    let sites: Vec<(u32, u32)> = match f.kind {
                        FragmentKind::PredDio => (1..=n).map(|d| (d, d)).collect(),
                        _ => (1..=n).map(|y| (1, y)).collect(),
                    };
                    for (x, y) in sites {
                        let pos = match f.kind {
                            FragmentKind::PredDio => x,
                            _ => y,
                        };
                        if (pos == 1) == is_min && !facts[idx(p, x, y)] {
                            facts[idx(p, x, y)] = true;
                            changed = true;
                        }
                    }
                }
                for (guard_x, guard_y, atoms, concl) in &comps {
                    if dependent[*concl] || atoms.iter().any(|&(p, _, _)| dependent[p]) {
                        continue;
                    }
                    for x in 1..=n {
                        if *guard_x && x == 1 {
                            continue;
                        }
                        for y in 1..=n {
                            if *guard_y && y == 1 {
                                continue;
                            }
                            if facts[idx(*concl, x, y)] {
                                continue;
                            }
                            let fire = atoms.iter().all(|&(p, dx, dy)| {
                                let (rx, ry) = (x as i64 + dx as i64, y as i64 + dy as i64);
                                rx >= 1
                                    && ry >= 1
                                    && rx <= n as i64
                                    && ry <= n as i64
                                    && facts[idx(p, rx as u32, ry as u32)]
                            });
                            if fire {
                                facts[idx(*concl, x, y)] = true;
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            for p in 0..npreds {
                if dependent[p] {
                    continue;
                }
                for (slot, site) in [
                    (&mut at_left[p], facts[idx(p, n - 1, n)]),
                    (&mut at_below[p], facts[idx(p, n, n - 1)]),
                ] {
                    let now = if site {
                        CornerTruth::Always
                    } else {
                        CornerTruth::Never
                    };
                    *slot = Some(match *slot {
                        None => now,
                        Some(prev) if prev == now => prev,
                        Some(_) => CornerTruth::Varies,
                    });
                }
            }
        }

        CornerEval {
            dependent,
            at_left: at_left
                .into_iter()
                .map(|s| s.unwrap_or(CornerTruth::Varies))
                .collect(),
            at_below: at_below
                .into_iter()
                .map(|s| s.unwrap_or(CornerTruth::Varies))
                .collect(),
        }
    }

    /// Corner status of a support's pattern part: the conjunction of its
    /// atoms' statuses at the sites the corner reads.
    fn mask_status(&self, an: &Analysis, mask: u128) -> CornerTruth {
        let nclasses = an.nclasses();
        let mut st = CornerTruth::Always;
        for bit in nclasses..128 {
            if mask >> bit & 1 == 0 {
                continue;
            }
            for &(p, d) in &an.alphas[bit - nclasses] {
                let t = if self.dependent[p] {
                    CornerTruth::Varies
                } else {
                    match d {
                        Dir::XDec => self.at_left[p],
                        Dir::YDec => self.at_below[p],
                    }
                };
                st = st.and(t);
            }
        }
        st
    }
}

/// Rebuilds the formula from the support analysis.  See the module
/// documentation for the vocabulary of the output.
pub(super) fn eliminate(f: &Formula, opts: &NormalizeOpts) -> Result<Formula, NormalizeError> {
    let bot = f.bottom.expect("the pipeline designates a bottom predicate");
    let an = analyze(f, opts)?;
    let nclasses = an.nclasses();
    let body_cap = opts.support_cap * 8;

    // transitively used assumptions, starting from the bottom supports
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut todo: Vec<usize> = Vec::new();
    let note = |mask: u128, used: &mut BTreeSet<usize>, todo: &mut Vec<usize>| {
        for a in 0..128 {
            if mask >> a & 1 == 1 && used.insert(a) {
                todo.push(a);
            }
        }
    };
    for &mask in &an.supports[bot] {
        note(mask, &mut used, &mut todo);
    }
    while let Some(a) = todo.pop() {
        if a >= nclasses {
            for &(h, _) in &an.alphas[a - nclasses] {
                for &mask in &an.supports[h] {
                    note(mask, &mut used, &mut todo);
                }
            }
        }
    }

    let mut out = Formula::new(f.kind, f.alphabet.clone());
    let bot_out = out.fresh_pred("Bot");
    out.bottom = Some(bot_out);

    let mut marker: BTreeMap<usize, PredId> = BTreeMap::new();
    for &a in used.iter().filter(|&&a| a < nclasses) {
        let (is_min, s) = an.classes[a];
        let name = format!(
            "{}.{}",
            if is_min { "First" } else { "Next" },
            f.alphabet.letter(s)
        );
        marker.insert(a, out.fresh_pred(&name));
    }
    let mut flag: BTreeMap<usize, PredId> = BTreeMap::new();
    for (n, &a) in used.iter().filter(|&&a| a >= nclasses).enumerate() {
        flag.insert(a, out.fresh_pred(&format!("F{}", n + 1)));
    }
    let mut any: Option<PredId> = None;

    // marker input clauses
    for (&a, &mk) in &marker {
        let (is_min, s) = an.classes[a];
        out.clauses.push(input_clause(f.kind, is_min, s, mk));
    }

    // the predicate that holds at every site, for guard reads with no
    // supporting atom
    let mut ensure_any = |out: &mut Formula| -> PredId {
        if let Some(id) = any {
            return id;
        }
        let id = out.fresh_pred("Any");
        for (s, _) in f.alphabet.iter() {
            for is_min in [true, false] {
                out.clauses.push(input_clause(f.kind, is_min, s, id));
            }
        }
        for d in [Dir::XDec, Dir::YDec] {
            let (dx, dy) = d.offsets();
            out.clauses
                .push(Clause::new(vec![d.guard(), at(id, dx, dy)], Conclusion::Pred(id)));
        }
        any = Some(id);
        id
    };

    // an assumption read at a neighbour, as a final-formula atom
    let assumption_atom = |a: usize, d: Dir| -> Hypothesis {
        let (dx, dy) = d.offsets();
        let p = if a < nclasses { marker[&a] } else { flag[&a] };
        at(p, dx, dy)
    };

    // flag clauses: one body per choice of support for each pattern atom
    let mut flag_bodies: BTreeMap<usize, Vec<BTreeSet<Hypothesis>>> = BTreeMap::new();
    for (&a, &fp) in &flag {
        let alpha = &an.alphas[a - nclasses];
        let mut bodies: Vec<BTreeSet<Hypothesis>> = vec![BTreeSet::new()];
        for &(h, d) in alpha {
            let options = &an.supports[h];
            if options.is_empty() {
                bodies.clear();
                break;
            }
            let mut next: Vec<BTreeSet<Hypothesis>> = Vec::new();
            for body in &bodies {
                for &mask in options {
                    let mut nb = body.clone();
                    for bit in 0..128 {
                        if mask >> bit & 1 == 1 {
                            nb.insert(assumption_atom(bit, d));
                        }
                    }
                    insert_minimal_body(&mut next, nb);
                }
                if next.len() > body_cap {
                    return Err(NormalizeError::Support(SupportError::Blowup {
                        var: h,
                        cap: opts.support_cap,
                    }));
                }
            }
            bodies = next;
        }
        // every pattern direction needs its border guard, and every guard
        // needs an atom actually read in that direction
        let dirs: BTreeSet<Dir> = alpha.iter().map(|&(_, d)| d).collect();
        for body in &mut bodies {
            for &d in &dirs {
                let (dx, dy) = d.offsets();
                let has_read = body.iter().any(|h| match h {
                    Hypothesis::Comp(c) => (c.arg1.offset, c.arg2.offset) == (dx, dy),
                    _ => false,
                });
                if !has_read {
                    let id = ensure_any(&mut out);
                    body.insert(at(id, dx, dy));
                }
                body.insert(d.guard());
            }
        }
        for body in &bodies {
            out.clauses.push(Clause::new(
                body.iter().copied().collect(),
                Conclusion::Pred(fp),
            ));
        }
        flag_bodies.insert(a, bodies);
    }

    // bottom clauses, one batch per minimal support
    let mut corners: Option<CornerEval> = None;
    for &mask in &an.supports[bot] {
        let class_bits: Vec<usize> = (0..nclasses).filter(|&a| mask >> a & 1 == 1).collect();
        let flag_bits: Vec<usize> = (nclasses..128).filter(|&a| mask >> a & 1 == 1).collect();
        debug_assert!(class_bits.len() <= 1, "class markers are exclusive");

        if class_bits.is_empty() && flag_bits.is_empty() {
            // derivable unconditionally: seed every input site and transport
            for (s, _) in f.alphabet.iter() {
                for is_min in [true, false] {
                    out.clauses.push(input_clause(f.kind, is_min, s, bot_out));
                }
            }
            for d in [Dir::XDec, Dir::YDec] {
                let (dx, dy) = d.offsets();
                out.clauses.push(Clause::new(
                    vec![d.guard(), at(bot_out, dx, dy)],
                    Conclusion::Pred(bot_out),
                ));
            }
            continue;
        }

        if flag_bits.is_empty() {
            // class alone: the corner is such a site only for realizable
            // combinations of fragment and class
            let (is_min, s) = an.classes[class_bits[0]];
            let relevant = match f.kind {
                FragmentKind::PredDio => true,
                // the corner (n,n) is an input site only for n = 1, where it
                // is the min-class site
                _ => is_min,
            };
            if relevant {
                out.clauses.push(input_clause(f.kind, is_min, s, bot_out));
            }
            continue;
        }

        if let Some(&k) = class_bits.first() {
            // a support mixing the corner's own input class with neighbour
            // patterns
            let (is_min, s) = an.classes[k];
            match f.kind {
                // input sites sit in the first column, so the corner carries
                // a class only for n = 1 — where no pattern can fire: the
                // support never applies at the corner
                FragmentKind::Pred => continue,
                FragmentKind::PredDio => {
                    if is_min {
                        // min-classed means the corner is (1,1), where no
                        // pattern can fire either
                        continue;
                    }
                    // The corner is always an input site, but no clause shape
                    // of the target form can test the corner's letter and a
                    // neighbour pattern together: input clauses cannot read
                    // neighbours, computation clauses cannot read the input.
                    // The support is still fine if its patterns are corner
                    // certificates — facts that hold at the corner's
                    // predecessors for every word — because then the class
                    // alone decides the corner, and the final clause's own
                    // `max` literals supply the corner test.  Patterns that
                    // can never hold there drop the support instead.
                    let eval = corners.get_or_insert_with(|| CornerEval::new(f));
                    match eval.mask_status(&an, mask) {
                        CornerTruth::Never => continue,
                        CornerTruth::Always => {
                            out.clauses.push(input_clause(f.kind, false, s, bot_out));
                            continue;
                        }
                        CornerTruth::Varies => {
                            return Err(NormalizeError::Unrealizable(format!(
                                "deriving the contradiction requires combining the \
                                 final site's letter ({}) with its neighbours' \
                                 facts, which no clause of the target form can \
                                 express",
                                f.alphabet.letter(s),
                            )));
                        }
                    }
                }
                FragmentKind::Incl => unreachable!("the inclusion fragment has its own final step"),
            }
        }

        // patterns alone: inline the flags' bodies (the flag predicates hold
        // one site too far to be read at distance zero)
        let mut combos: Vec<BTreeSet<Hypothesis>> = vec![BTreeSet::new()];
        for &a in &flag_bits {
            let bodies = &flag_bodies[&a];
            let mut next: Vec<BTreeSet<Hypothesis>> = Vec::new();
            for combo in &combos {
                for body in bodies {
                    let mut nb = combo.clone();
                    nb.extend(body.iter().copied());
                    insert_minimal_body(&mut next, nb);
                }
                if next.len() > body_cap {
                    return Err(NormalizeError::Support(SupportError::Blowup {
                        var: bot,
                        cap: opts.support_cap,
                    }));
                }
            }
            combos = next;
        }
        for combo in combos {
            out.clauses.push(Clause::new(
                combo.into_iter().collect(),
                Conclusion::Pred(bot_out),
            ));
        }
    }

    let corner = match f.kind {
        FragmentKind::Incl => unreachable!("the inclusion fragment has its own final step"),
        _ => vec![lmax(Var::X), lmax(Var::Y), at(bot_out, 0, 0)],
    };
    out.clauses.push(Clause::new(corner, Conclusion::False));
    Ok(out)
}

/// The two inner-neighbour reads of the inclusion fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Inner {
    Left,
    Below,
}

impl Inner {
    fn offsets(self) -> (i32, i32) {
        match self {
            Inner::Left => (1, 0),
            Inner::Below => (0, -1),
        }
    }
}

fn hcmp(op: CmpOp) -> Hypothesis {
    Hypothesis::Arith(ArithAtom::VarCmp(op))
}

/// Rebuilds an inclusion formula from two propositional analyses: one
/// closure per letter for the diagonal, minimal supports over the
/// inner-neighbour read patterns for the sites above it.
pub(super) fn eliminate_incl(f: &Formula, opts: &NormalizeOpts) -> Result<Formula, NormalizeError> {
    let bot = f.bottom.expect("the pipeline designates a bottom predicate");
    let npreds = f.preds.len();

    let mut diag_seeds: Vec<(LetterId, PredId)> = Vec::new();
    let mut diag_rules: Vec<(Vec<PredId>, PredId)> = Vec::new();
    let mut off_rules: Vec<(Vec<PredId>, PredId)> = Vec::new();
    let mut read_rules: Vec<((PredId, Inner), PredId)> = Vec::new();
    for cl in &f.clauses {
        let concl = match cl.concl {
            Conclusion::Pred(p) => p,
            Conclusion::False => continue,
        };
        let guard = cl.hyps.iter().find_map(|h| match h {
            Hypothesis::Arith(ArithAtom::VarCmp(op)) => Some(*op),
            _ => None,
        });
        let letter = cl.hyps.iter().find_map(|h| match h {
            Hypothesis::Input(l) => match l.pred {
                InputPred::Letter(s) => Some(s),
                _ => None,
            },
            _ => None,
        });
        if let Some(s) = letter {
            debug_assert_eq!(guard, Some(CmpOp::Eq));
            diag_seeds.push((s, concl));
            continue;
        }
        let mut theta: Vec<PredId> = Vec::new();
        let mut read: Option<(PredId, Inner)> = None;
        for h in &cl.hyps {
            match h {
                Hypothesis::Comp(c) => match (c.arg1.offset, c.arg2.offset) {
                    (0, 0) => theta.push(c.pred),
                    (1, 0) => read = Some((c.pred, Inner::Left)),
                    (0, -1) => read = Some((c.pred, Inner::Below)),
                    _ => unreachable!("pipeline output reads inner neighbours only"),
                },
                Hypothesis::Arith(ArithAtom::VarCmp(_)) => {}
                _ => unreachable!("pipeline output has no other hypotheses"),
            }
        }
        match guard.expect("pipeline clauses keep their guard") {
            CmpOp::Eq => {
                debug_assert!(read.is_none(), "diagonal clauses read nothing");
                diag_rules.push((theta, concl));
            }
            CmpOp::Lt => match read {
                Some(r) => {
                    debug_assert!(theta.is_empty(), "read clauses carry only their read");
                    read_rules.push((r, concl));
                }
                None => off_rules.push((theta, concl)),
            },
            _ => unreachable!("pipeline guards are = or <"),
        }
    }

    let mut out = Formula::new(f.kind, f.alphabet.clone());
    out.preds = f.preds.clone();
    out.bottom = Some(bot);

    // a diagonal site derives exactly the closure of its letter's seeds
    for (s, _) in f.alphabet.iter() {
        let mut sys = HornSystem::new(npreds);
        for (theta, concl) in &diag_rules {
            sys.add(theta.clone(), *concl);
        }
        let seeds = diag_seeds.iter().filter(|&&(t, _)| t == s).map(|&(_, p)| p);
        let truth = sys.closure(seeds);
        for (h, &holds) in truth.iter().enumerate() {
            if holds {
                out.clauses.push(Clause::new(
                    vec![hcmp(CmpOp::Eq), lletter(s, Var::X)],
                    Conclusion::Pred(h),
                ));
            }
        }
    }

    let patterns: Vec<(PredId, Inner)> = read_rules
        .iter()
        .map(|&(r, _)| r)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pat_idx: BTreeMap<(PredId, Inner), usize> =
        patterns.iter().copied().enumerate().map(|(i, r)| (r, i)).collect();
    let mut sys = HornSystem::new(npreds + patterns.len());
    for (theta, concl) in &off_rules {
        sys.add(theta.clone(), *concl);
    }
    for &(r, concl) in &read_rules {
        sys.add(vec![npreds + pat_idx[&r]], concl);
    }
    let assumptions: Vec<usize> = (npreds..npreds + patterns.len()).collect();
    let analysis = minimal_supports(
        &sys,
        &assumptions,
        &SupportOpts {
            cap: opts.support_cap,
            exclusive: 0,
        },
    )?;

    // the predicate that holds at every site, for predicates derivable with
    // no neighbour support at all (those still only hold above the diagonal:
    // the diagonal is governed by the per-letter closures alone)
    let mut any: Option<PredId> = None;
    let mut ensure_any = |out: &mut Formula| -> PredId {
        if let Some(id) = any {
            return id;
        }
        let id = out.fresh_pred("Any");
        for (s, _) in f.alphabet.iter() {
            out.clauses.push(Clause::new(
                vec![hcmp(CmpOp::Eq), lletter(s, Var::X)],
                Conclusion::Pred(id),
            ));
        }
        out.clauses
            .push(Clause::new(vec![hcmp(CmpOp::Lt), at(id, 1, 0)], Conclusion::Pred(id)));
        any = Some(id);
        id
    };

    for h in 0..npreds {
        let mut masks = analysis.supports[h].clone();
        masks.sort_unstable();
        for mask in masks {
            let mut hyps = vec![hcmp(CmpOp::Lt)];
            if mask == 0 {
                let id = ensure_any(&mut out);
                hyps.push(at(id, 1, 0));
            } else {
                for (i, &(p, d)) in patterns.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        let (dx, dy) = d.offsets();
                        hyps.push(at(p, dx, dy));
                    }
                }
            }
            out.clauses.push(Clause::new(hyps, Conclusion::Pred(h)));
        }
    }

    out.clauses.push(Clause::new(
        vec![lmin(Var::X, true), lmax(Var::Y), at(bot, 0, 0)],
        Conclusion::False,
    ));
    Ok(out)
}

