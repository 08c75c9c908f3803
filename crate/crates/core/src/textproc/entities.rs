use crate::resources::{AbbreviationTable, Dictionary};

use super::preprocess::{Sentence, Token};
use super::Mention;

/// Expands abbreviations in place. Unambiguous abbreviations (a single
/// unconditional entry) always expand; ambiguous ones expand to the first
/// entry whose trigger occurs in the sentence, otherwise the token is kept
/// and flagged.
pub fn expand_abbreviations(sentence: &Sentence, table: &AbbreviationTable) -> Sentence {
    let present: std::collections::HashSet<&str> =
        sentence.tokens.iter().map(|t| t.normalized.as_str()).collect();
    let mut out = Sentence::default();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if sentence.breaks.contains(&i) && !out.tokens.is_empty() {
            out.breaks.push(out.tokens.len());
        }
        let Some(entries) = table.get(&tok.normalized) else {
            out.tokens.push(tok.clone());
            continue;
        };
        let ambiguous = entries.len() > 1 || entries.iter().any(|e| !e.triggers.is_empty());
        let chosen = if ambiguous {
            entries
                .iter()
                .find(|e| e.triggers.iter().any(|t| present.contains(t.as_str())))
        } else {
            entries.first()
        };
        match chosen {
            Some(entry) if !entry.expansion.is_empty() => {
                for word in &entry.expansion {
                    out.tokens.push(Token::new(tok.surface.clone(), word.clone(), 0));
                }
            }
            _ => {
                let mut kept = tok.clone();
                kept.ambiguous = true;
                out.tokens.push(kept);
            }
        }
    }
    out.reindex();
    out
}

/// Greedy longest-match dictionary lookup. Matches never cross a clause
/// delimiter and never overlap.
pub fn detect_entities(sentence: &Sentence, dictionary: &Dictionary) -> Vec<Mention> {
    let clauses = sentence.clauses();
    let n = sentence.tokens.len();
    let max = dictionary.max_phrase_len().max(1);
    let mut mentions = Vec::new();
    let mut i = 0;
    let mut key = String::new();
    while i < n {
        let mut matched = None;
        let longest = max.min(n - i);
        for len in (1..=longest).rev() {
            if clauses[i + len - 1] != clauses[i] {
                continue;
            }
            key.clear();
            for (k, tok) in sentence.tokens[i..i + len].iter().enumerate() {
                if k > 0 {
                    key.push(' ');
                }
                key.push_str(&tok.normalized);
            }
            if let Some(entry) = dictionary.lookup(&key) {
                matched = Some((entry.concept_id.clone(), len));
                break;
            }
        }
        match matched {
            Some((concept, len)) => {
                mentions.push(Mention::new(concept, i, i + len));
                i += len;
            }
            None => i += 1,
        }
    }
    mentions
}

/// Fills the part-of-speech slot of each token.
pub trait Tagger {
    fn tag(&self, sentence: &mut Sentence, mentions: &[Mention]);
}

/// Default tagger: tokens covered by a mention get the semantic type of the
/// mentioned concept, all others stay `Tag::OTHER`.
pub struct DictionaryTagger<'a>(pub &'a Dictionary);

impl Tagger for DictionaryTagger<'_> {
    fn tag(&self, sentence: &mut Sentence, mentions: &[Mention]) {
        for m in mentions {
            if let Some(entry) = self.0.get(&m.concept_id) {
                for tok in &mut sentence.tokens[m.start..m.end] {
                    tok.tag = entry.semantic_type.tag();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{DictionaryEntry, Resources, SemanticType};
    use crate::textproc::preprocess::Preprocessor;

    fn entry(id: &str, canonical: &str, syn: &[&str]) -> DictionaryEntry {
        DictionaryEntry {
            concept_id: id.into(),
            canonical: canonical.into(),
            semantic_type: SemanticType::Symptom,
            flags: Default::default(),
            synonyms: syn.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn longest_match_wins() {
        let pre = Preprocessor::default();
        let mut d = Dictionary::default();
        d.insert(entry("C_abdominal_pain", "bauch schmerz", &[]), &pre).unwrap();
        d.insert(entry("C_abdomen", "bauch", &[]), &pre).unwrap();
        let s = Sentence::from_words(&["bauch", "schmerz"]);
        let m = detect_entities(&s, &d);
        assert_eq!(m, vec![Mention::new("C_abdominal_pain", 0, 2)]);
    }

    #[test]
    fn layman_and_technical_surface_map_to_one_concept() {
        let r = Resources::builtin();
        let lay = r.preprocessor.preprocess("bauchweh");
        let tech = r.preprocessor.preprocess("Abdominalschmerz");
        let a = detect_entities(&lay[0], &r.dictionary);
        let b = detect_entities(&tech[0], &r.dictionary);
        assert_eq!(a[0].concept_id, b[0].concept_id);
    }

    #[test]
    fn no_hit_yields_nothing() {
        let r = Resources::builtin();
        let s = Sentence::from_words(&["xyz", "abc"]);
        assert!(detect_entities(&s, &r.dictionary).is_empty());
    }

    #[test]
    fn matches_do_not_cross_delimiters() {
        let pre = Preprocessor::default();
        let mut d = Dictionary::default();
        d.insert(entry("C_x", "laufende nase", &[]), &pre).unwrap();
        let s = pre.preprocess("laufende, nase");
        assert!(detect_entities(&s[0], &d).is_empty());
    }

    #[test]
    fn abbreviation_rules() {
        let r = Resources::builtin();
        let s = Sentence::from_words(&["op", "gestern"]);
        let out = expand_abbreviations(&s, &r.abbreviations);
        assert_eq!(out.normalized(), vec!["operation", "gestern"]);

        let s = Sentence::from_words(&["ms", "laehmung"]);
        let out = expand_abbreviations(&s, &r.abbreviations);
        assert_eq!(out.normalized(), vec!["multiple", "sklerose", "laehmung"]);
        assert_eq!(out.tokens[2].index, 2);

        let s = Sentence::from_words(&["ms", "erbrechen"]);
        let out = expand_abbreviations(&s, &r.abbreviations);
        assert_eq!(out.normalized(), vec!["magenschmerzen", "erbrechen"]);

        let s = Sentence::from_words(&["ms", "seit", "gestern"]);
        let out = expand_abbreviations(&s, &r.abbreviations);
        assert_eq!(out.tokens[0].normalized, "ms");
        assert!(out.tokens[0].ambiguous);
    }

    #[test]
    fn tagger_uses_semantic_type() {
        let r = Resources::builtin();
        let mut s = r.preprocessor.preprocess("schmerzen im bein").remove(0);
        let m = detect_entities(&s, &r.dictionary);
        DictionaryTagger(&r.dictionary).tag(&mut s, &m);
        let tags: Vec<u8> = s.tokens.iter().map(|t| t.tag.0).collect();
        assert_eq!(tags, vec![1, 0, 3]);
    }
}
