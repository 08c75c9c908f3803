use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::preprocess::Sentence;
use super::{Mention, Polarity};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarityConfig {
    /// Tokens searched on each side of a mention.
    pub window: usize,
}

impl Default for PolarityConfig {
    fn default() -> Self {
        PolarityConfig { window: 4 }
    }
}

const TIME_UNITS: [&str; 8] = [
    "tag", "tagen", "woche", "wochen", "monat", "monaten", "jahr", "jahren",
];
const NUMBER_WORDS: [&str; 12] = [
    "ein", "einem", "einer", "zwei", "drei", "vier", "fuenf", "sechs", "sieben", "acht", "neun",
    "zehn",
];

/// Positions that open a "vor N <unit>" temporal phrase.
fn temporal_phrases(sentence: &Sentence) -> Vec<usize> {
    let words = sentence.normalized();
    (0..words.len().saturating_sub(2))
        .filter(|&i| {
            words[i] == "vor"
                && (words[i + 1].chars().all(|c| c.is_ascii_digit())
                    || NUMBER_WORDS.contains(&words[i + 1]))
                && TIME_UNITS.contains(&words[i + 2])
        })
        .collect()
}

fn in_scope(mention: &Mention, pos: usize, window: usize, clauses: &[usize]) -> bool {
    let before = pos < mention.start && mention.start - pos <= window;
    let after = pos >= mention.end && pos - mention.end < window;
    (before || after) && clauses[pos] == clauses[mention.start]
}

/// Assigns polarity: negated iff a negation trigger lies within `window`
/// tokens of the span in the same clause; otherwise historical iff a
/// temporal trigger (or a "vor N tagen" phrase) does; otherwise present.
pub fn detect_negation(
    sentence: &Sentence,
    mentions: &[Mention],
    negation_triggers: &HashSet<String>,
    historical_triggers: &HashSet<String>,
    config: &PolarityConfig,
) -> Vec<Mention> {
    let clauses = sentence.clauses();
    let neg: Vec<usize> = sentence
        .tokens
        .iter()
        .filter(|t| negation_triggers.contains(&t.normalized))
        .map(|t| t.index)
        .collect();
    let mut hist: Vec<usize> = sentence
        .tokens
        .iter()
        .filter(|t| historical_triggers.contains(&t.normalized))
        .map(|t| t.index)
        .collect();
    hist.extend(temporal_phrases(sentence));

    mentions
        .iter()
        .map(|m| {
            let mut out = m.clone();
            out.polarity = if neg.iter().any(|&p| in_scope(m, p, config.window, &clauses)) {
                Polarity::Negated
            } else if hist.iter().any(|&p| in_scope(m, p, config.window, &clauses)) {
                Polarity::Historical
            } else {
                Polarity::Present
            };
            out
        })
        .collect()
}
