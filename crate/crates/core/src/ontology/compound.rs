use std::collections::BTreeSet;

use crate::resources::Lexicon;

pub const DEFAULT_LINKING: [char; 3] = ['s', 'n', 'e'];

/// Splits a normalized compound into simple entities, preferring the longest
/// lexicon segment at each position. Linking characters may sit between two
/// segments. Returns an empty list when no full decomposition exists.
pub fn split_compound(term: &str, lexicon: &Lexicon) -> Vec<String> {
    split_with(term, lexicon, &DEFAULT_LINKING)
}

pub fn split_with(term: &str, lexicon: &Lexicon, linking: &[char]) -> Vec<String> {
    if !term.is_ascii() || term.len() < Lexicon::MIN_LEN {
        return Vec::new();
    }
    let mut out = Vec::new();
    if descend(term.as_bytes(), 0, lexicon, linking, &mut out) {
        out
    } else {
        Vec::new()
    }
}

fn descend(
    term: &[u8],
    pos: usize,
    lexicon: &Lexicon,
    linking: &[char],
    out: &mut Vec<String>,
) -> bool {
    if pos == term.len() {
        return !out.is_empty();
    }
    let remaining = term.len() - pos;
    let longest = remaining.min(lexicon.max_len());
    for len in (Lexicon::MIN_LEN..=longest).rev() {
        // ASCII-only input, so any byte offset is a char boundary.
        let segment = std::str::from_utf8(&term[pos..pos + len]).unwrap();
        let Some(rep) = lexicon.representative(segment) else {
            continue;
        };
        out.push(rep.to_string());
        let next = pos + len;
        if descend(term, next, lexicon, linking, out) {
            return true;
        }
        if next < term.len() - 1
            && linking.contains(&(term[next] as char))
            && descend(term, next + 1, lexicon, linking, out)
        {
            return true;
        }
        out.pop();
    }
    false
}

/// Sorted, deduplicated semantic blocks of a normalized token sequence.
/// Tokens that cannot be decomposed stay atomic.
pub fn semantic_blocks<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<String> {
    let mut blocks = BTreeSet::new();
    for tok in tokens {
        let tok = tok.as_ref();
        let parts = split_compound(tok, lexicon);
        if parts.is_empty() {
            blocks.insert(tok.to_string());
        } else {
            blocks.extend(parts);
        }
    }
    blocks.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::Resources;

    fn lex() -> Lexicon {
        Resources::builtin().lexicon
    }

    #[test]
    fn eye_pressure_pain() {
        assert_eq!(split_compound("augendruckschmerz", &lex()), vec!["auge", "druck", "schmerz"]);
    }

    #[test]
    fn single_hit_and_atomic() {
        assert_eq!(split_compound("auge", &lex()), vec!["auge"]);
        assert!(split_compound("xyzzy", &lex()).is_empty());
    }

    #[test]
    fn linking_characters() {
        let l = lex();
        assert_eq!(split_compound("blasenentzuendung", &l), vec!["blase", "entzuendung"]);
        assert_eq!(
            split_compound("menstruationsbeschwerden", &l),
            vec!["menstruation", "beschwerden"]
        );
        assert!(split_with("menstruationsbeschwerden", &l, &[]).is_empty());
    }

    #[test]
    fn synonyms_map_to_representatives() {
        let l = lex();
        assert_eq!(split_compound("bauchweh", &l), vec!["bauch", "schmerz"]);
        assert_eq!(split_compound("abdominalschmerz", &l), vec!["bauch", "schmerz"]);
    }

    #[test]
    fn backtracks_when_longest_segment_dead_ends() {
        let mut l = Lexicon::default();
        for w in ["abcd", "abc", "def"] {
            l.insert(w, w);
        }
        assert_eq!(split_compound("abcdef", &l), vec!["abc", "def"]);
    }

    #[test]
    fn blocks_ignore_order() {
        let l = lex();
        let a = semantic_blocks(&["druckschmerz", "am", "auge"].map(String::from)[..], &l);
        let b = semantic_blocks(&["augendruckschmerz"], &l);
        // connectives are not part of the lexicon and stay atomic, so callers
        // strip them first
        assert_ne!(a, b);
        let a = semantic_blocks(&["druckschmerz", "auge"], &l);
        assert_eq!(a, b);
    }
}
