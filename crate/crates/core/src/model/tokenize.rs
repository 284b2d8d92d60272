//! Rule-based tokenizer with exact round-trip reconstruction.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub kind: TokenKind,
    /// Whitespace between the previous token (or start of text) and this one.
    pub leading: String,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

/// A tokenized text. Rendering reproduces the source byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    tokens: Vec<Token>,
    trailing: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Splits text into maximal runs of letters, digits and apostrophes (words)
/// and single-character punctuation tokens. Whitespace is kept as separators.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut leading = String::new();
    let mut word = String::new();

    let flush = |word: &mut String, leading: &mut String, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            let surface = std::mem::take(word);
            tokens.push(Token {
                lower: surface.to_lowercase(),
                surface,
                kind: TokenKind::Word,
                leading: std::mem::take(leading),
            });
        }
    };

    for c in text.chars() {
        if is_word_char(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut leading, &mut tokens);
            if c.is_whitespace() {
                leading.push(c);
            } else {
                let surface = c.to_string();
                tokens.push(Token {
                    lower: surface.to_lowercase(),
                    surface,
                    kind: TokenKind::Punct,
                    leading: std::mem::take(&mut leading),
                });
            }
        }
    }
    flush(&mut word, &mut leading, &mut tokens);

    TokenStream {
        tokens,
        trailing: leading,
    }
}

impl TokenStream {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Token> {
        self.tokens.get(index)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&t.leading);
            out.push_str(&t.surface);
        }
        out.push_str(&self.trailing);
        out
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word())
    }

    pub fn word_lowers(&self) -> Vec<String> {
        self.words().map(|t| t.lower.clone()).collect()
    }

    /// Stream indices of the word tokens, in order.
    pub fn word_indices(&self) -> Vec<usize> {
        (0..self.tokens.len())
            .filter(|&i| self.tokens[i].is_word())
            .collect()
    }

    /// A token at `index` starts a sentence if no token precedes it or the
    /// closest preceding token is terminal punctuation.
    pub fn is_sentence_start(&self, index: usize) -> bool {
        match index.checked_sub(1).and_then(|i| self.tokens.get(i)) {
            None => true,
            Some(prev) => matches!(prev.surface.as_str(), "." | "!" | "?"),
        }
    }

    /// Returns a copy with a token inserted before `index`.
    ///
    /// The new token takes over the whitespace that preceded the token at
    /// `index`, and that token is then separated by a single space.
    pub fn with_inserted(&self, index: usize, surface: &str, kind: TokenKind) -> TokenStream {
        assert!(index <= self.tokens.len(), "insert index out of range");
        let mut out = self.clone();
        let token = if index < out.tokens.len() {
            let leading = std::mem::replace(&mut out.tokens[index].leading, " ".to_string());
            Token {
                surface: surface.to_string(),
                lower: surface.to_lowercase(),
                kind,
                leading,
            }
        } else {
            Token {
                surface: surface.to_string(),
                lower: surface.to_lowercase(),
                kind,
                leading: if out.tokens.is_empty() { String::new() } else { " ".to_string() },
            }
        };
        out.tokens.insert(index, token);
        out
    }

    /// Returns a copy with the token at `index` removed. When the first token
    /// goes, the next one inherits its leading whitespace.
    pub fn without(&self, index: usize) -> TokenStream {
        let mut out = self.clone();
        let removed = out.tokens.remove(index);
        if index == 0 {
            if let Some(next) = out.tokens.first_mut() {
                next.leading = removed.leading;
            }
        }
        out
    }

    /// Replaces the surface of a word token in place.
    pub fn replace_surface(&mut self, index: usize, surface: &str) {
        let t = &mut self.tokens[index];
        t.surface = surface.to_string();
        t.lower = surface.to_lowercase();
    }

    pub fn swap_surfaces(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (left, right) = self.tokens.split_at_mut(hi);
        std::mem::swap(&mut left[lo].surface, &mut right[0].surface);
        std::mem::swap(&mut left[lo].lower, &mut right[0].lower);
    }
}
