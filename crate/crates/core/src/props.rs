//! Atomic propositions, input symbols and propositional input guards.
//!
//! An input symbol is a set of atomic propositions, stored as a bitset over
//! the machine's declared proposition list. Guards are propositional formulas
//! over the same list; a guard matches a symbol when the symbol, read as a
//! truth assignment, satisfies the formula.

use std::fmt;

use thiserror::Error;

/// Largest proposition vocabulary for which exhaustive determinism checking is
/// performed (2^20 input symbols).
pub const MAX_PROPS: usize = 20;

/// A set of atomic propositions, i.e. one input symbol of `2^AP`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropSet(pub u64);

impl PropSet {
    pub const EMPTY: PropSet = PropSet(0);

    pub fn singleton(prop: usize) -> Self {
        PropSet(1 << prop)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(props: I) -> Self {
        props.into_iter().fold(PropSet::EMPTY, |acc, p| acc.with(p))
    }

    pub fn with(self, prop: usize) -> Self {
        PropSet(self.0 | (1 << prop))
    }

    pub fn contains(self, prop: usize) -> bool {
        self.0 & (1 << prop) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// Resolves proposition names against `vocab`.
    pub fn from_names<S: AsRef<str>>(names: &[S], vocab: &[String]) -> Result<Self, GuardError> {
        let mut set = PropSet::EMPTY;
        for n in names {
            let n = n.as_ref();
            let idx = vocab
                .iter()
                .position(|p| p == n)
                .ok_or_else(|| GuardError::UnknownProp(n.to_string()))?;
            set = set.with(idx);
        }
        Ok(set)
    }

    /// Renders as `{a, b}` using the vocabulary names.
    pub fn display<'a>(&self, vocab: &'a [String]) -> PropSetDisplay<'a> {
        PropSetDisplay { set: *self, vocab }
    }
}

pub struct PropSetDisplay<'a> {
    set: PropSet,
    vocab: &'a [String],
}

impl fmt::Display for PropSetDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.set.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match self.vocab.get(p) {
                Some(name) => write!(f, "{name}")?,
                None => write!(f, "#{p}")?,
            }
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuardError {
    #[error("unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("malformed guard `{text}`: {reason}")]
    Syntax { text: String, reason: String },
}

/// Propositional formula over proposition indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    Atom(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, sigma: PropSet) -> bool {
        match self {
            Guard::True => true,
            Guard::Atom(p) => sigma.contains(*p),
            Guard::Not(g) => !g.eval(sigma),
            Guard::And(a, b) => a.eval(sigma) && b.eval(sigma),
            Guard::Or(a, b) => a.eval(sigma) || b.eval(sigma),
        }
    }

    /// The formula satisfied exactly by `set` over a vocabulary of `n_props`
    /// propositions: positive literals for members, negated literals otherwise.
    pub fn exactly(set: PropSet, n_props: usize) -> Guard {
        let mut lits = (0..n_props).map(|p| {
            if set.contains(p) {
                Guard::Atom(p)
            } else {
                Guard::Not(Box::new(Guard::Atom(p)))
            }
        });
        match lits.next() {
            None => Guard::True,
            Some(first) => lits.fold(first, |acc, l| Guard::And(Box::new(acc), Box::new(l))),
        }
    }

    pub fn and(self, other: Guard) -> Guard {
        Guard::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Guard) -> Guard {
        Guard::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Guard {
        Guard::Not(Box::new(self))
    }

    /// Highest proposition index mentioned, if any.
    pub fn max_atom(&self) -> Option<usize> {
        match self {
            Guard::True => None,
            Guard::Atom(p) => Some(*p),
            Guard::Not(g) => g.max_atom(),
            Guard::And(a, b) | Guard::Or(a, b) => match (a.max_atom(), b.max_atom()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Parses the guard grammar: atoms are declared proposition names,
    /// operators `!`, `&`, `|`, parentheses, and `true`.
    pub fn parse(text: &str, vocab: &[String]) -> Result<Guard, GuardError> {
        let tokens = tokenize(text)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            vocab,
            text,
        };
        let g = p.parse_or()?;
        if p.pos != tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(g)
    }

    pub fn display<'a>(&'a self, vocab: &'a [String]) -> GuardDisplay<'a> {
        GuardDisplay { guard: self, vocab }
    }

    fn precedence(&self) -> u8 {
        match self {
            Guard::Or(..) => 1,
            Guard::And(..) => 2,
            Guard::Not(..) => 3,
            Guard::True | Guard::Atom(_) => 4,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, vocab: &[String]) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, g: &Guard, min: u8| -> fmt::Result {
            if g.precedence() < min {
                write!(f, "(")?;
                g.write(f, vocab)?;
                write!(f, ")")
            } else {
                g.write(f, vocab)
            }
        };
        match self {
            Guard::True => write!(f, "true"),
            Guard::Atom(p) => match vocab.get(*p) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "#{p}"),
            },
            Guard::Not(g) => {
                write!(f, "!")?;
                child(f, g, 3)
            }
            // Both operators associate to the left when parsed, so a right
            // operand of equal precedence needs parentheses to round-trip.
            Guard::And(a, b) => {
                child(f, a, 2)?;
                write!(f, " & ")?;
                child(f, b, 3)
            }
            Guard::Or(a, b) => {
                child(f, a, 1)?;
                write!(f, " | ")?;
                child(f, b, 2)
            }
        }
    }
}

pub struct GuardDisplay<'a> {
    guard: &'a Guard,
    vocab: &'a [String],
}

impl fmt::Display for GuardDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.guard.write(f, self.vocab)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Token>, GuardError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '!' => {
                chars.next();
                out.push(Token::Not);
            }
            '&' => {
                chars.next();
                out.push(Token::And);
            }
            '|' => {
                chars.next();
                out.push(Token::Or);
            }
            '(' => {
                chars.next();
                out.push(Token::LParen);
            }
            ')' => {
                chars.next();
                out.push(Token::RParen);
            }
            _ => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || "!&|()".contains(c) {
                        break;
                    }
                    ident.push(c);
                    chars.next();
                }
                out.push(Token::Ident(ident));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vocab: &'a [String],
    text: &'a str,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> GuardError {
        GuardError::Syntax {
            text: self.text.to_string(),
            reason: reason.to_string(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn parse_or(&mut self) -> Result<Guard, GuardError> {
        let mut g = self.parse_and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.parse_and()?;
            g = g.or(rhs);
        }
        Ok(g)
    }

    fn parse_and(&mut self) -> Result<Guard, GuardError> {
        let mut g = self.parse_unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            g = g.and(rhs);
        }
        Ok(g)
    }

    fn parse_unary(&mut self) -> Result<Guard, GuardError> {
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(self.parse_unary()?.negate())
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let g = self.parse_or()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.err("missing `)`"));
                }
                self.pos += 1;
                Ok(g)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if name == "true" {
                    return Ok(Guard::True);
                }
                self.vocab
                    .iter()
                    .position(|p| *p == name)
                    .map(Guard::Atom)
                    .ok_or(GuardError::UnknownProp(name))
            }
            Some(_) => Err(self.err("unexpected operator")),
            None => Err(self.err("unexpected end of guard")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence_and_binds_tighter() {
        let v = vocab();
        let g = Guard::parse("a | b & !c", &v).unwrap();
        assert!(g.eval(PropSet::from_indices([0])));
        assert!(g.eval(PropSet::from_indices([1])));
        assert!(!g.eval(PropSet::from_indices([1, 2])));
    }

    #[test]
    fn true_matches_everything() {
        let g = Guard::parse("true", &vocab()).unwrap();
        assert!((0..8).all(|s| g.eval(PropSet(s))));
    }

    #[test]
    fn unknown_atom_rejected() {
        assert_eq!(
            Guard::parse("a & zz", &vocab()),
            Err(GuardError::UnknownProp("zz".into()))
        );
        assert!(Guard::parse("a &", &vocab()).is_err());
        assert!(Guard::parse("(a", &vocab()).is_err());
    }

    #[test]
    fn exactly_is_satisfied_only_by_its_set() {
        let s = PropSet::from_indices([0, 2]);
        let g = Guard::exactly(s, 3);
        for x in 0..8 {
            assert_eq!(g.eval(PropSet(x)), PropSet(x) == s);
        }
    }

    fn arb_guard() -> impl Strategy<Value = Guard> {
        let leaf = prop_oneof![Just(Guard::True), (0usize..3).prop_map(Guard::Atom)];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Guard::negate),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
                (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(g in arb_guard()) {
            let v = vocab();
            let text = g.display(&v).to_string();
            prop_assert_eq!(Guard::parse(&text, &v).unwrap(), g);
        }
    }
}
