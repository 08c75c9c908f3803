use std::collections::{HashMap, HashSet};

/// Categorical slot filled by a tagger; the default tagger stores the
/// dictionary semantic type here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Tag(pub u8);

impl Tag {
    pub const OTHER: Tag = Tag(0);
    pub const PAD: Tag = Tag(6);
    /// Number of distinct tag ids, including `PAD`.
    pub const COUNT: usize = 7;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Word as written, delimiters stripped.
    pub surface: String,
    /// Lowercase ASCII form used for every lookup.
    pub normalized: String,
    pub index: usize,
    pub tag: Tag,
    /// Set when an ambiguous abbreviation could not be resolved.
    pub ambiguous: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, normalized: impl Into<String>, index: usize) -> Self {
        Token {
            surface: surface.into(),
            normalized: normalized.into(),
            index,
            tag: Tag::OTHER,
            ambiguous: false,
        }
    }
}

/// One sentence after preprocessing. `breaks` holds the token indices that
/// directly follow a `,` or `;` delimiter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub breaks: Vec<usize>,
}

impl Sentence {
    pub fn from_words(words: &[&str]) -> Self {
        Sentence {
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| Token::new(*w, *w, i))
                .collect(),
            breaks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn normalized(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.normalized.as_str()).collect()
    }

    /// Clause number of every token; tokens share a clause iff no delimiter
    /// separates them.
    pub fn clauses(&self) -> Vec<usize> {
        let mut clause = 0;
        let mut out = Vec::with_capacity(self.tokens.len());
        let mut breaks = self.breaks.iter().peekable();
        for i in 0..self.tokens.len() {
            while breaks.peek().is_some_and(|&&b| b <= i) {
                breaks.next();
                clause += 1;
            }
            out.push(clause);
        }
        out
    }

    /// Renumbers token indices after tokens were inserted or removed.
    pub(crate) fn reindex(&mut self) {
        for (i, t) in self.tokens.iter_mut().enumerate() {
            t.index = i;
        }
    }
}

/// Lowercases, transliterates German umlauts and drops everything that is
/// not an ASCII letter or digit.
pub fn normalize_word(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    for ch in word.chars() {
        match ch {
            'ä' | 'Ä' => out.push_str("ae"),
            'ö' | 'Ö' => out.push_str("oe"),
            'ü' | 'Ü' => out.push_str("ue"),
            'ß' | 'ẞ' => out.push_str("ss"),
            c if c.is_ascii_alphanumeric() => out.push(c.to_ascii_lowercase()),
            _ => {}
        }
    }
    out
}

fn is_delimiter(ch: char) -> bool {
    matches!(ch, ',' | ';' | '.')
}

#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub stopwords: HashSet<String>,
    /// Static misspelling table, applied to normalized words.
    pub corrections: HashMap<String, String>,
}

impl Preprocessor {
    pub fn new(stopwords: HashSet<String>, corrections: HashMap<String, String>) -> Self {
        Preprocessor {
            stopwords,
            corrections,
        }
    }

    /// Normalized form of a single word, or `None` when it is dropped.
    pub fn normalize(&self, raw: &str) -> Option<String> {
        let mut norm = normalize_word(raw);
        if norm.is_empty() {
            return None;
        }
        if let Some(fixed) = self.corrections.get(&norm) {
            norm = fixed.clone();
        }
        if self.stopwords.contains(&norm) {
            return None;
        }
        Some(norm)
    }

    /// Normalized token sequence of a short phrase such as a dictionary
    /// synonym; delimiters are ignored.
    pub fn normalize_phrase(&self, phrase: &str) -> Vec<String> {
        phrase
            .split(|c: char| c.is_whitespace() || is_delimiter(c))
            .filter_map(|w| self.normalize(w))
            .collect()
    }

    pub fn preprocess(&self, text: &str) -> Vec<Sentence> {
        let mut sentences = Vec::new();
        let mut current = Sentence::default();
        let mut word = String::new();
        let mut pending_break = false;

        let flush = |word: &mut String, current: &mut Sentence, pending_break: &mut bool| {
            if word.is_empty() {
                return;
            }
            if let Some(norm) = self.normalize(word) {
                let index = current.tokens.len();
                if *pending_break && index > 0 {
                    current.breaks.push(index);
                }
                *pending_break = false;
                current.tokens.push(Token::new(word.as_str(), norm, index));
            }
            word.clear();
        };

        for ch in text.chars() {
            if ch.is_whitespace() {
                flush(&mut word, &mut current, &mut pending_break);
            } else if ch == ',' || ch == ';' {
                flush(&mut word, &mut current, &mut pending_break);
                pending_break = true;
            } else if ch == '.' {
                flush(&mut word, &mut current, &mut pending_break);
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
                pending_break = false;
            } else {
                word.push(ch);
            }
        }
        flush(&mut word, &mut current, &mut pending_break);
        if !current.is_empty() {
            sentences.push(current);
        }
        sentences
    }
}

/// Plain-text form of preprocessed sentences; feeding it back through
/// [`Preprocessor::preprocess`] yields the same tokens.
pub fn render(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for (i, tok) in sentence.tokens.iter().enumerate() {
            if i > 0 {
                if sentence.breaks.contains(&i) {
                    out.push_str(", ");
                } else {
                    out.push(' ');
                }
            }
            out.push_str(&tok.normalized);
        }
        out.push_str(". ");
    }
    out
}
