use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Token;
use crate::dataset::{END, START};

pub const PAD: Token = 0;
pub const START_TOKEN: Token = 1;
pub const END_TOKEN: Token = 2;
pub const UNKNOWN: Token = 3;

const SPECIALS: [&str; 4] = ["<|pad|>", START, END, "<|unk|>"];

/// Character vocabulary with the dataset delimiters as single tokens.
///
/// Always contains printable ASCII; extra characters seen in training text
/// are appended in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct CharVocab {
    tokens: Vec<String>,
    index: HashMap<char, Token>,
}

impl From<Vec<String>> for CharVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(SPECIALS.len())
            .filter_map(|(i, t)| t.chars().next().map(|c| (c, i as Token)))
            .collect();
        CharVocab { tokens, index }
    }
}

impl From<CharVocab> for Vec<String> {
    fn from(v: CharVocab) -> Self {
        v.tokens
    }
}

impl CharVocab {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = (0x20u8..=0x7e).map(char::from).collect();
        for text in texts {
            for c in text.chars() {
                if !c.is_control() {
                    chars.push(c);
                }
            }
        }
        chars.sort_unstable();
        chars.dedup();
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(chars.into_iter().map(String::from))
            .collect::<Vec<_>>();
        CharVocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn encode(&self, text: &str) -> Vec<Token> {
        let mut out = Vec::with_capacity(text.len());
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            if let Some(tail) = rest.strip_prefix(START) {
                out.push(START_TOKEN);
                rest = tail;
            } else if let Some(tail) = rest.strip_prefix(END) {
                out.push(END_TOKEN);
                rest = tail;
            } else {
                out.push(*self.index.get(&c).unwrap_or(&UNKNOWN));
                rest = &rest[c.len_utf8()..];
            }
        }
        out
    }

    /// Padding and unknown tokens decode to nothing.
    pub fn decode(&self, tokens: &[Token]) -> String {
        tokens
            .iter()
            .filter(|&&t| t != PAD && t != UNKNOWN)
            .filter_map(|&t| self.tokens.get(t as usize))
            .map(String::as_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters_are_single_tokens() {
        let v = CharVocab::from_texts(["é"]);
        let ids = v.encode("<|s|>air gun => Rolling toy é<|e|>");
        assert_eq!(ids[0], START_TOKEN);
        assert_eq!(*ids.last().unwrap(), END_TOKEN);
        assert_eq!(v.decode(&ids), "<|s|>air gun => Rolling toy é<|e|>");
        assert_eq!(v.encode("ü"), vec![UNKNOWN]);
        assert_eq!(v.decode(&[UNKNOWN, PAD]), "");
    }

    #[test]
    fn serde_roundtrip() {
        let v = CharVocab::from_texts(["xyzé"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: CharVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.encode("é"), v.encode("é"));
    }
}
