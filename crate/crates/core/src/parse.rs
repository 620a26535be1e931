//! Reading and writing the line-oriented `.horn` formula format.
//!
//! ```text
//! # accepts words in which no proper prefix equals a suffix
//! logic pred
//! alphabet ab
//!
//! min(x) & ~min(y) & Qa(x) & Qa(y) -> Border(x,y)
//! ~min(x) & ~min(y) & Border(x-1,y-1) & Qa(x) & Qa(y) -> Border(x,y)
//! max(y) & Border(x,y) -> FALSE
//! ```
//!
//! One clause per line, hypotheses joined by `&`, conclusion after `->`
//! (either `Name(x,y)` or `FALSE`).  `#` starts a comment.  The `logic` and
//! `alphabet` headers must precede the first clause; an optional
//! `false <Name>` header designates the contradiction-carrier predicate.
//!
//! Unary atoms are `min`, `max`, and `Q<letter>` for letters of the declared
//! alphabet; `~` negates `min`/`max`.  Binary atoms `Name(t1,t2)` introduce
//! computation predicates implicitly at their first use as a conclusion or
//! hypothesis.  Terms are `x`, `y`, `x-2`, `y+1`.  Arithmetic hypotheses
//! compare the two variables (`x=y`, `x<y`, `x<=y`) or a variable against a
//! constant (`x>2`, `y=n-1`, `x<=n-2`).

use crate::letters::Alphabet;
use crate::logic::{
    ArithAtom, Clause, CmpOp, CompAtom, Conclusion, ConstAtom, ConstRhs, Formula, FragmentKind,
    Hypothesis, InputLiteral, InputPred, Term, Var,
};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Names that can never be predicate identifiers.
const RESERVED: &[&str] = &["min", "max", "FALSE", "n", "x", "y", "logic", "alphabet", "false"];

pub fn parse_formula(src: &str) -> Result<Formula, Vec<ParseError>> {
    let mut kind: Option<FragmentKind> = None;
    let mut alphabet: Option<Alphabet> = None;
    let mut bottom_name: Option<(String, usize)> = None;
    let mut clause_lines: Vec<(usize, String)> = Vec::new();
    let mut errors: Vec<ParseError> = Vec::new();

    for (idx, raw) in src.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ParseError { line: lineno, message };
        if let Some(rest) = line.strip_prefix("logic ") {
            match FragmentKind::from_name(rest.trim()) {
                Some(k) if kind.is_none() => kind = Some(k),
                Some(_) => errors.push(err("duplicate 'logic' header".into())),
                None => errors.push(err(format!(
                    "unknown logic '{}' (expected pred, pred-dio, or incl)",
                    rest.trim()
                ))),
            }
        } else if let Some(rest) = line
            .strip_prefix("alphabet ")
            .or(if line == "alphabet" { Some("") } else { None })
        {
            if alphabet.is_some() {
                errors.push(err("duplicate 'alphabet' header".into()));
                continue;
            }
            let letters: Vec<char> = rest.chars().filter(|c| !c.is_whitespace()).collect();
            match Alphabet::new(letters) {
                Ok(a) => alphabet = Some(a),
                Err(e) => errors.push(err(e.to_string())),
            }
        } else if let Some(rest) = line.strip_prefix("false ") {
            let name = rest.trim().to_string();
            if bottom_name.is_some() {
                errors.push(err("duplicate 'false' header".into()));
            } else {
                bottom_name = Some((name, lineno));
            }
        } else {
            clause_lines.push((lineno, line.to_string()));
        }
    }

    let kind = match kind {
        Some(k) => k,
        None => {
            errors.push(ParseError {
                line: 1,
                message: "missing 'logic' header".into(),
            });
            FragmentKind::Pred
        }
    };
    let alphabet = match alphabet {
        Some(a) => a,
        None => {
            errors.push(ParseError {
                line: 1,
                message: "missing 'alphabet' header".into(),
            });
            Alphabet::new(['a']).unwrap()
        }
    };

    let mut formula = Formula::new(kind, alphabet);
    for (lineno, line) in clause_lines {
        match parse_clause_line(&mut formula, &line) {
            Ok(cl) => formula.clauses.push(cl),
            Err(message) => errors.push(ParseError { line: lineno, message }),
        }
    }
    if let Some((name, lineno)) = bottom_name {
        if let Err(message) = check_ident(&name) {
            errors.push(ParseError { line: lineno, message });
        } else {
            let id = formula.ensure_pred(&name);
            formula.bottom = Some(id);
        }
    }

    if errors.is_empty() {
        Ok(formula)
    } else {
        Err(errors)
    }
}

fn check_ident(s: &str) -> Result<(), String> {
    let mut chars = s.chars();
    let ok_head = chars
        .next()
        .map(|c| c.is_ascii_alphabetic() || c == '_')
        .unwrap_or(false);
    let ok_tail = s
        .chars()
        .skip(1)
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    if !ok_head || !ok_tail {
        return Err(format!("invalid identifier '{s}'"));
    }
    if RESERVED.contains(&s) {
        return Err(format!("'{s}' is reserved and cannot name a predicate"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u32),
    LParen,
    RParen,
    Comma,
    Amp,
    Tilde,
    Arrow,
    Plus,
    Minus,
    Cmp(CmpOp),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Num(k) => write!(f, "'{k}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Comma => write!(f, "','"),
            Tok::Amp => write!(f, "'&'"),
            Tok::Tilde => write!(f, "'~'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Cmp(op) => write!(f, "'{op}'"),
        }
    }
}

fn tokenize(line: &str) -> Result<Vec<Tok>, String> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '&' => {
                toks.push(Tok::Amp);
                i += 1;
            }
            '~' => {
                toks.push(Tok::Tilde);
                i += 1;
            }
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    toks.push(Tok::Arrow);
                    i += 2;
                } else {
                    toks.push(Tok::Minus);
                    i += 1;
                }
            }
            '=' => {
                toks.push(Tok::Cmp(CmpOp::Eq));
                i += 1;
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    toks.push(Tok::Cmp(CmpOp::Le));
                    i += 2;
                } else {
                    toks.push(Tok::Cmp(CmpOp::Lt));
                    i += 1;
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    toks.push(Tok::Cmp(CmpOp::Ge));
                    i += 2;
                } else {
                    toks.push(Tok::Cmp(CmpOp::Gt));
                    i += 1;
                }
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let num = text
                    .parse::<u32>()
                    .map_err(|_| format!("number '{text}' is too large"))?;
                toks.push(Tok::Num(num));
            }
            _ if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                toks.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected character '{c}'")),
        }
    }
    Ok(toks)
}

struct ClauseParser<'a> {
    formula: &'a mut Formula,
    toks: Vec<Tok>,
    pos: usize,
}

impl<'a> ClauseParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), String> {
        match self.next() {
            Some(ref t) if t == want => Ok(()),
            Some(t) => Err(format!("expected {want}, found {t}")),
            None => Err(format!("expected {want}, found end of line")),
        }
    }

    fn parse_clause(&mut self) -> Result<Clause, String> {
        let mut hyps = Vec::new();
        if self.peek() == Some(&Tok::Arrow) {
            // clause with no hypotheses: "-> R(x,y)"
            self.next();
        } else {
            loop {
                hyps.push(self.parse_hypothesis()?);
                match self.next() {
                    Some(Tok::Amp) => continue,
                    Some(Tok::Arrow) => break,
                    Some(t) => return Err(format!("expected '&' or '->', found {t}")),
                    None => return Err("expected '&' or '->', found end of line".into()),
                }
            }
        }
        let concl = self.parse_conclusion()?;
        if let Some(t) = self.next() {
            return Err(format!("trailing {t} after conclusion"));
        }
        Ok(Clause::new(hyps, concl))
    }

    fn parse_conclusion(&mut self) -> Result<Conclusion, String> {
        match self.next() {
            Some(Tok::Ident(name)) if name == "FALSE" => Ok(Conclusion::False),
            Some(Tok::Ident(name)) => {
                self.expect(&Tok::LParen)?;
                let t1 = self.parse_term()?;
                self.expect(&Tok::Comma)?;
                let t2 = self.parse_term()?;
                self.expect(&Tok::RParen)?;
                if t1 != Term::x(0) || t2 != Term::y(0) {
                    return Err(format!("conclusion must be {name}(x,y) or FALSE"));
                }
                check_ident(&name)?;
                let id = self.formula.ensure_pred(&name);
                Ok(Conclusion::Pred(id))
            }
            Some(t) => Err(format!("expected conclusion, found {t}")),
            None => Err("expected conclusion after '->'".into()),
        }
    }

    fn parse_hypothesis(&mut self) -> Result<Hypothesis, String> {
        let negated = if self.peek() == Some(&Tok::Tilde) {
            self.next();
            true
        } else {
            false
        };
        match self.next() {
            Some(Tok::Ident(name)) => {
                if name == "x" || name == "y" {
                    if negated {
                        return Err("negation is only allowed on min/max/letter atoms".into());
                    }
                    let var = if name == "x" { Var::X } else { Var::Y };
                    return self.parse_arith(var);
                }
                if name == "min" || name == "max" {
                    let pred = if name == "min" { InputPred::Min } else { InputPred::Max };
                    self.expect(&Tok::LParen)?;
                    let term = self.parse_term()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Hypothesis::Input(InputLiteral {
                        pred,
                        positive: !negated,
                        term,
                    }));
                }
                // unary letter atom or binary computation atom, decided by arity
                self.expect(&Tok::LParen)?;
                let t1 = self.parse_term()?;
                match self.next() {
                    Some(Tok::RParen) => {
                        let mut cs = name.chars();
                        let letter = match (cs.next(), cs.next(), cs.next()) {
                            (Some('Q'), Some(l), None) => self.formula.alphabet.id_of(l),
                            _ => None,
                        };
                        match letter {
                            Some(id) => Ok(Hypothesis::Input(InputLiteral {
                                pred: InputPred::Letter(id),
                                positive: !negated,
                                term: t1,
                            })),
                            None => Err(format!(
                                "unknown unary atom '{name}' (unary atoms are min, max, and Q<letter>)"
                            )),
                        }
                    }
                    Some(Tok::Comma) => {
                        if negated {
                            return Err("negation is only allowed on min/max/letter atoms".into());
                        }
                        let t2 = self.parse_term()?;
                        self.expect(&Tok::RParen)?;
                        check_ident(&name)?;
                        let id = self.formula.ensure_pred(&name);
                        Ok(Hypothesis::Comp(CompAtom {
                            pred: id,
                            arg1: t1,
                            arg2: t2,
                        }))
                    }
                    Some(t) => Err(format!("expected ',' or ')', found {t}")),
                    None => Err("unterminated atom".into()),
                }
            }
            Some(t) => Err(format!("expected a hypothesis atom, found {t}")),
            None => Err("expected a hypothesis atom".into()),
        }
    }

    /// Arithmetic comparison whose left side (`var`) has been consumed.
    fn parse_arith(&mut self, var: Var) -> Result<Hypothesis, String> {
        let op = match self.next() {
            Some(Tok::Cmp(op)) => op,
            Some(t) => return Err(format!("expected a comparison operator, found {t}")),
            None => return Err("expected a comparison operator".into()),
        };
        match self.next() {
            Some(Tok::Ident(name)) if name == "x" || name == "y" => {
                let rvar = if name == "x" { Var::X } else { Var::Y };
                if rvar == var {
                    return Err(format!("comparison '{var}{op}{rvar}' relates a variable to itself"));
                }
                // normalize to x-op-y order
                let op = if var == Var::X { op } else { op.flip() };
                Ok(Hypothesis::Arith(ArithAtom::VarCmp(op)))
            }
            Some(Tok::Ident(name)) if name == "n" => {
                let k = if self.peek() == Some(&Tok::Minus) {
                    self.next();
                    match self.next() {
                        Some(Tok::Num(k)) => k,
                        Some(t) => return Err(format!("expected a number after 'n-', found {t}")),
                        None => return Err("expected a number after 'n-'".into()),
                    }
                } else {
                    0
                };
                Ok(Hypothesis::Arith(ArithAtom::Const(ConstAtom {
                    var,
                    op,
                    rhs: ConstRhs::NMinus(k),
                })))
            }
            Some(Tok::Num(k)) => Ok(Hypothesis::Arith(ArithAtom::Const(ConstAtom {
                var,
                op,
                rhs: ConstRhs::Const(k),
            }))),
            Some(t) => Err(format!("expected 'x', 'y', 'n', or a number, found {t}")),
            None => Err("expected a right-hand side for the comparison".into()),
        }
    }

    fn parse_term(&mut self) -> Result<Term, String> {
        let var = match self.next() {
            Some(Tok::Ident(name)) if name == "x" => Var::X,
            Some(Tok::Ident(name)) if name == "y" => Var::Y,
            Some(t) => return Err(format!("expected a term ('x' or 'y' with optional offset), found {t}")),
            None => return Err("expected a term".into()),
        };
        let sign = match self.peek() {
            Some(Tok::Plus) => 1,
            Some(Tok::Minus) => -1,
            _ => return Ok(Term::new(var, 0)),
        };
        self.next();
        match self.next() {
            Some(Tok::Num(k)) => {
                let k = i32::try_from(k).map_err(|_| format!("offset '{k}' is too large"))?;
                Ok(Term::new(var, sign * k))
            }
            Some(t) => Err(format!("expected a number in the offset, found {t}")),
            None => Err("expected a number in the offset".into()),
        }
    }
}

fn parse_clause_line(formula: &mut Formula, line: &str) -> Result<Clause, String> {
    let toks = tokenize(line)?;
    let mut p = ClauseParser {
        formula,
        toks,
        pos: 0,
    };
    p.parse_clause()
}

/// Parses a single clause against an existing formula's alphabet/predicates
/// (used by tests and the normalizer's golden fixtures).
pub fn parse_clause(formula: &mut Formula, line: &str) -> Result<Clause, String> {
    parse_clause_line(formula, line)
}

// ---------------------------------------------------------------------------
// printing

pub fn print_term(t: &Term) -> String {
    t.to_string()
}

pub fn print_hypothesis(f: &Formula, h: &Hypothesis) -> String {
    match h {
        Hypothesis::Input(l) => {
            let neg = if l.positive { "" } else { "~" };
            let name = match l.pred {
                InputPred::Min => "min".to_string(),
                InputPred::Max => "max".to_string(),
                InputPred::Letter(id) => format!("Q{}", f.alphabet.letter(id)),
            };
            format!("{neg}{name}({})", l.term)
        }
        Hypothesis::Arith(a) => a.to_string(),
        Hypothesis::Comp(c) => format!("{}({},{})", f.pred_name(c.pred), c.arg1, c.arg2),
    }
}

pub fn print_clause(f: &Formula, cl: &Clause) -> String {
    let concl = match cl.concl {
        Conclusion::False => "FALSE".to_string(),
        Conclusion::Pred(id) => format!("{}(x,y)", f.pred_name(id)),
    };
    if cl.hyps.is_empty() {
        format!("-> {concl}")
    } else {
        let hyps: Vec<String> = cl.hyps.iter().map(|h| print_hypothesis(f, h)).collect();
        format!("{} -> {concl}", hyps.join(" & "))
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    out.push_str(&format!("logic {}\n", f.kind.name()));
    let letters: String = f.alphabet.iter().map(|(_, c)| c).collect();
    out.push_str(&format!("alphabet {letters}\n"));
    if let Some(b) = f.bottom {
        out.push_str(&format!("false {}\n", f.pred_name(b)));
    }
    out.push('\n');
    for cl in &f.clauses {
        out.push_str(&print_clause(f, cl));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOT_BORDERED: &str = "\
# no proper border
logic pred
alphabet ab

min(x) & ~min(y) & Qa(x) & Qa(y) -> Border(x,y)
min(x) & ~min(y) & Qb(x) & Qb(y) -> Border(x,y)
~min(x) & ~min(y) & Border(x-1,y-1) & Qa(x) & Qa(y) -> Border(x,y)
~min(x) & ~min(y) & Border(x-1,y-1) & Qb(x) & Qb(y) -> Border(x,y)
max(y) & Border(x,y) -> FALSE
";

    #[test]
    fn parses_and_reprints() {
        let f = parse_formula(NOT_BORDERED).unwrap();
        assert_eq!(f.kind, FragmentKind::Pred);
        assert_eq!(f.alphabet.len(), 2);
        assert_eq!(f.preds, vec!["Border".to_string()]);
        assert_eq!(f.clauses.len(), 5);
        let printed = print_formula(&f);
        let f2 = parse_formula(&printed).unwrap();
        assert_eq!(f, f2);
    }

    #[test]
    fn parses_arithmetic_forms() {
        let src = "logic incl\nalphabet ab\nx<=y & x=2 & y>=n-1 & S(x+1,y-2) -> T(x,y)\n";
        let f = parse_formula(src).unwrap();
        let cl = &f.clauses[0];
        assert_eq!(
            cl.hyps[0],
            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Le))
        );
        assert_eq!(
            cl.hyps[1],
            Hypothesis::Arith(ArithAtom::Const(ConstAtom {
                var: Var::X,
                op: CmpOp::Eq,
                rhs: ConstRhs::Const(2)
            }))
        );
        assert_eq!(
            cl.hyps[2],
            Hypothesis::Arith(ArithAtom::Const(ConstAtom {
                var: Var::Y,
                op: CmpOp::Ge,
                rhs: ConstRhs::NMinus(1)
            }))
        );
        let c = cl.hyps[3].comp().unwrap();
        assert_eq!((c.arg1, c.arg2), (Term::x(1), Term::y(-2)));
        let printed = print_formula(&f);
        assert!(printed.contains("x<=y & x=2 & y>=n-1 & S(x+1,y-2) -> T(x,y)"));
    }

    #[test]
    fn flips_reversed_variable_comparisons() {
        let src = "logic incl\nalphabet a\ny>=x & R(x,y-1) -> R(x,y)\n";
        let f = parse_formula(src).unwrap();
        assert_eq!(
            f.clauses[0].hyps[0],
            Hypothesis::Arith(ArithAtom::VarCmp(CmpOp::Le))
        );
    }

    #[test]
    fn distinguishes_letter_atoms_from_predicates_by_arity() {
        let src = "logic pred\nalphabet ab\nQa(x) & Qa(x-1,y) -> R(x,y)\n";
        let f = parse_formula(src).unwrap();
        assert!(matches!(
            f.clauses[0].hyps[0],
            Hypothesis::Input(InputLiteral {
                pred: InputPred::Letter(0),
                ..
            })
        ));
        assert!(f.clauses[0].hyps[1].comp().is_some());
        assert_eq!(f.preds, vec!["Qa".to_string(), "R".to_string()]);
    }

    #[test]
    fn reports_errors_with_line_numbers() {
        let src = "logic pred\nalphabet ab\nQa(x) -> R(x,y)\nQc(x) -> R(x,y)\nmin(x) -> R(y,x)\n";
        let errs = parse_formula(src).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].line, 4);
        assert!(errs[0].message.contains("Qc"));
        assert_eq!(errs[1].line, 5);
        assert!(errs[1].message.contains("conclusion"));
    }

    #[test]
    fn rejects_reserved_predicate_names() {
        let src = "logic pred\nalphabet ab\nlogic(x,y) -> R(x,y)\n";
        assert!(parse_formula(src).is_err());
        let src2 = "logic pred\nalphabet ab\nmin(x,y) -> R(x,y)\n";
        assert!(parse_formula(src2).is_err());
    }

    #[test]
    fn empty_formula_is_legal() {
        let f = parse_formula("logic pred\nalphabet ab\n").unwrap();
        assert!(f.clauses.is_empty());
        let printed = print_formula(&f);
        assert_eq!(parse_formula(&printed).unwrap(), f);
    }
}
