//! Interned alphabets and words over them.
//!
//! A formula's alphabet is a fixed, ordered set of distinct letters; words
//! are sequences of indices into that set.  Keeping letters interned makes
//! every hot loop (fixpoint evaluation, CA simulation) work on small integers
//! while parsing/printing stays in terms of the user's characters.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a letter within its [`Alphabet`].
pub type LetterId = usize;

/// An ordered set of distinct letters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    letters: Vec<char>,
}

impl Alphabet {
    /// Builds an alphabet from the given letters, rejecting duplicates and
    /// empty sets.
    pub fn new(letters: impl IntoIterator<Item = char>) -> Result<Self, AlphabetError> {
        let letters: Vec<char> = letters.into_iter().collect();
        if letters.is_empty() {
            return Err(AlphabetError::Empty);
        }
        for (i, &c) in letters.iter().enumerate() {
            if letters[..i].contains(&c) {
                return Err(AlphabetError::Duplicate(c));
            }
        }
        Ok(Alphabet { letters })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letter(&self, id: LetterId) -> char {
        self.letters[id]
    }

    pub fn id_of(&self, c: char) -> Option<LetterId> {
        self.letters.iter().position(|&l| l == c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (LetterId, char)> + '_ {
        self.letters.iter().copied().enumerate()
    }

    /// Interns a string as a word, failing on the first foreign character.
    pub fn word(&self, s: &str) -> Result<Word, AlphabetError> {
        s.chars()
            .map(|c| self.id_of(c).ok_or(AlphabetError::UnknownLetter(c)))
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }

    pub fn render(&self, w: &Word) -> String {
        w.0.iter().map(|&id| self.letter(id)).collect()
    }

    /// All words of length exactly `len`, in lexicographic order of letter ids.
    pub fn words_of_len(&self, len: usize) -> WordsOfLen<'_> {
        WordsOfLen {
            alphabet: self,
            next: Some(vec![0; len]),
        }
    }

    /// All nonempty words of length `1..=max_len`, shortest first
    /// (shortlex order).
    pub fn words_up_to(&self, max_len: usize) -> impl Iterator<Item = Word> + '_ {
        (1..=max_len).flat_map(move |len| self.words_of_len(len))
    }
}

/// A word as a sequence of letter ids; positions are 1-based in the logic
/// layer, so `Word::letter_at` takes a 1-based index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<LetterId>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letter at 1-based position `pos` (callers guarantee `1 <= pos <= len`).
    pub fn letter_at(&self, pos: usize) -> LetterId {
        self.0[pos - 1]
    }
}

pub struct WordsOfLen<'a> {
    alphabet: &'a Alphabet,
    next: Option<Vec<LetterId>>,
}

impl<'a> Iterator for WordsOfLen<'a> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let current = self.next.take()?;
        if current.is_empty() {
            // the single empty word of length 0
            return Some(Word(current));
        }
        let mut succ = current.clone();
        let base = self.alphabet.len();
        let mut i = succ.len();
        loop {
            if i == 0 {
                self.next = None;
                break;
            }
            i -= 1;
            if succ[i] + 1 < base {
                succ[i] += 1;
                for v in &mut succ[i + 1..] {
                    *v = 0;
                }
                self.next = Some(succ);
                break;
            }
        }
        Some(Word(current))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphabetError {
    Empty,
    Duplicate(char),
    UnknownLetter(char),
}

impl fmt::Display for AlphabetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphabetError::Empty => write!(f, "alphabet must contain at least one letter"),
            AlphabetError::Duplicate(c) => write!(f, "duplicate alphabet letter '{c}'"),
            AlphabetError::UnknownLetter(c) => write!(f, "letter '{c}' is not in the alphabet"),
        }
    }
}

impl std::error::Error for AlphabetError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_roundtrip() {
        let ab = Alphabet::new(['a', 'b']).unwrap();
        let w = ab.word("abba").unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(ab.render(&w), "abba");
        assert_eq!(w.letter_at(1), 0);
        assert_eq!(w.letter_at(4), 0);
    }

    #[test]
    fn rejects_bad_alphabets() {
        assert_eq!(Alphabet::new([]), Err(AlphabetError::Empty));
        assert_eq!(
            Alphabet::new(['a', 'a']),
            Err(AlphabetError::Duplicate('a'))
        );
        let ab = Alphabet::new(['a', 'b']).unwrap();
        assert_eq!(ab.word("abc"), Err(AlphabetError::UnknownLetter('c')));
    }

    #[test]
    fn shortlex_enumeration() {
        let ab = Alphabet::new(['a', 'b']).unwrap();
        let all: Vec<String> = ab.words_up_to(2).map(|w| ab.render(&w)).collect();
        assert_eq!(all, ["a", "b", "aa", "ab", "ba", "bb"]);
        // 2^1 + ... + 2^10 = 2046
        assert_eq!(ab.words_up_to(10).count(), 2046);
    }
}
