//! Bundled example formulas with independent reference deciders.
//!
//! Each entry pairs a `.horn` source with a plain combinatorial decision
//! procedure for the same language, written without any of the logic
//! machinery.  Tests cross-check the minimal-model verdicts against these
//! deciders over all short words; the copies under `formulas/` at the
//! repository root are kept byte-identical to the embedded sources by a test.

use crate::letters::Word;
use crate::logic::Formula;
use crate::parse::parse_formula;

/// Words without a proper border: no strict prefix equals a suffix.
///
/// `Border(x,y)` holds iff `x < y` and the prefix of length `x` equals the
/// length-`x` factor ending at `y`; a `Border(·, n)` fact is a border.
pub const NOT_BORDERED: &str = "\
# words whose every strict prefix differs from the suffix of equal length
logic pred
alphabet ab

min(x) & ~min(y) & Qa(x) & Qa(y) -> Border(x,y)
min(x) & ~min(y) & Qb(x) & Qb(y) -> Border(x,y)
~min(x) & ~min(y) & Border(x-1,y-1) & Qa(x) & Qa(y) -> Border(x,y)
~min(x) & ~min(y) & Border(x-1,y-1) & Qb(x) & Qb(y) -> Border(x,y)
max(y) & Border(x,y) -> FALSE
";

/// Palindromes: `NotPal(x,y)` spreads outward from any mismatched pair.
pub const PALINDROME: &str = "\
# words equal to their own reversal
logic incl
alphabet ab

x<y & Qa(x) & Qb(y) -> NotPal(x,y)
x<y & Qb(x) & Qa(y) -> NotPal(x,y)
x<y & NotPal(x+1,y-1) -> NotPal(x,y)
x<=y & min(x) & max(y) & NotPal(x,y) -> FALSE
";

/// Non-palindromes: `Pal(x,y)` asserts the factor `[x,y]` *is* a palindrome,
/// grown from single letters and adjacent equal pairs.
pub const NOT_PALINDROME: &str = "\
# words different from their own reversal
logic incl
alphabet ab

x=y -> Equal(x,y)
x<y & Equal(x+1,y) -> Successor(x,y)
x=y -> Pal(x,y)
x<=y & Successor(x,y) & Qa(x) & Qa(y) -> Pal(x,y)
x<=y & Successor(x,y) & Qb(x) & Qb(y) -> Pal(x,y)
x<y & Pal(x+1,y-1) & Qa(x) & Qa(y) -> Pal(x,y)
x<y & Pal(x+1,y-1) & Qb(x) & Qb(y) -> Pal(x,y)
x<=y & min(x) & max(y) & Pal(x,y) -> FALSE
";

/// Words of even length: a parity token walks the diagonal through the cell
/// below it, flipping at each step.
pub const EVEN_LENGTH: &str = "\
# words of even length
logic pred-dio
alphabet ab

min(x) & min(y) -> Odd(x,y)
~min(x) & Odd(x-1,y) -> OddStep(x,y)
~min(x) & Even(x-1,y) -> EvenStep(x,y)
~min(y) & OddStep(x,y-1) -> Even(x,y)
~min(y) & EvenStep(x,y-1) -> Odd(x,y)
max(x) & max(y) & Odd(x,y) -> FALSE
";

/// Words ending in `a` — the minimal use of diagonal letter input.
pub const ENDS_IN_A: &str = "\
# words whose last letter is a
logic pred-dio
alphabet ab

x=y & Qb(x) -> LastB(x,y)
max(x) & max(y) & LastB(x,y) -> FALSE
";

/// Linear conjunctive grammar for palindromes over {a, b}.
pub const PALINDROME_LCG: &str = "\
# palindromes over {a, b}
start S
S -> a P_a | b P_b | a | b
P_a -> S a | a
P_b -> S b | b
";

/// One bundled formula plus its independent decider.
pub struct CorpusEntry {
    pub name: &'static str,
    pub file: &'static str,
    pub source: &'static str,
    pub reference: fn(&Word) -> bool,
}

/// All bundled `.horn` entries, in a fixed order.
pub fn entries() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry {
            name: "notBordered",
            file: "not_bordered.horn",
            source: NOT_BORDERED,
            reference: |w| !has_border(w),
        },
        CorpusEntry {
            name: "palindrome",
            file: "palindrome.horn",
            source: PALINDROME,
            reference: is_palindrome,
        },
        CorpusEntry {
            name: "notPalindrome",
            file: "not_palindrome.horn",
            source: NOT_PALINDROME,
            reference: |w| !is_palindrome(w),
        },
        CorpusEntry {
            name: "evenLength",
            file: "even_length.horn",
            source: EVEN_LENGTH,
            reference: |w| w.len() % 2 == 0,
        },
        CorpusEntry {
            name: "endsInA",
            file: "ends_in_a.horn",
            source: ENDS_IN_A,
            reference: |w| *w.0.last().unwrap() == 0,
        },
    ]
}

pub fn parse_entry(e: &CorpusEntry) -> Formula {
    parse_formula(e.source).expect("bundled formula parses")
}

/// Does some strict prefix of `w` equal the suffix of the same length?
pub fn has_border(w: &Word) -> bool {
    let n = w.len();
    (1..n).any(|k| w.0[..k] == w.0[n - k..])
}

pub fn is_palindrome(w: &Word) -> bool {
    let r: Vec<_> = w.0.iter().rev().copied().collect();
    w.0 == r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixpoint::{accepts, eval};
    use crate::logic::validate::{validate, ValidateOpts};
    use crate::parse::print_formula;

    #[test]
    fn all_entries_validate_without_changes_or_warnings() {
        for e in entries() {
            let f = parse_entry(e_ref(&e));
            let v = validate(&f, &ValidateOpts::default())
                .unwrap_or_else(|r| panic!("{}: {r}", e.name));
            assert_eq!(v.formula, f, "{}: guard insertion altered the formula", e.name);
            assert!(v.warnings.is_empty(), "{}: {:?}", e.name, v.warnings);
        }
    }

    fn e_ref(e: &CorpusEntry) -> &CorpusEntry {
        e
    }

    #[test]
    fn formulas_match_their_reference_deciders_on_short_words() {
        for e in entries() {
            let f = parse_entry(&e);
            for w in f.alphabet.words_up_to(6) {
                assert_eq!(
                    accepts(&f, &w).unwrap(),
                    (e.reference)(&w),
                    "{} on '{}'",
                    e.name,
                    f.alphabet.render(&w)
                );
            }
        }
    }

    #[test]
    fn border_facts_on_abbaabb() {
        let f = parse_entry(&entries()[0]);
        let w = f.alphabet.word("abbaabb").unwrap();
        let m = eval(&f, &w).unwrap();
        let border = f.pred_id("Border").unwrap();
        assert_eq!(m.facts_of(border), vec![(1, 4), (1, 5), (2, 6), (3, 7)]);
        assert!(m.bottom, "abbaabb has the border 'abb'");
    }

    #[test]
    fn corpus_files_stay_in_sync() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../formulas");
        for e in entries() {
            let path = format!("{root}/{}", e.file);
            let on_disk = std::fs::read_to_string(&path)
                .unwrap_or_else(|err| panic!("{path}: {err}"));
            assert_eq!(on_disk, e.source, "{} drifted from {}", e.name, path);
        }
        let lcg = std::fs::read_to_string(format!("{root}/palindrome.lcg")).unwrap();
        assert_eq!(lcg, PALINDROME_LCG);
    }

    #[test]
    fn printed_corpus_roundtrips() {
        for e in entries() {
            let f = parse_entry(&e);
            let printed = print_formula(&f);
            assert_eq!(crate::parse::parse_formula(&printed).unwrap(), f, "{}", e.name);
        }
    }
}
