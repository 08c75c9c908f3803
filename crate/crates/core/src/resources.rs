//! Dictionaries and tables shipped with the engine, plus their file formats.
//!
//! Every table is plain UTF-8 text. Lines starting with `#` are comments.
//! Built-in copies are compiled in; [`Resources::load_dir`] replaces any of
//! them with a same-named file from a directory.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::preprocess::{normalize_word, Preprocessor, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Symptom,
    Disease,
    Anatomy,
    Operation,
    Other,
}

impl SemanticType {
    pub fn as_str(self) -> &'static str {
        match self {
            SemanticType::Symptom => "symptom",
            SemanticType::Disease => "disease",
            SemanticType::Anatomy => "anatomy",
            SemanticType::Operation => "operation",
            SemanticType::Other => "other",
        }
    }

    pub fn tag(self) -> Tag {
        match self {
            SemanticType::Other => Tag(0),
            SemanticType::Symptom => Tag(1),
            SemanticType::Disease => Tag(2),
            SemanticType::Anatomy => Tag(3),
            SemanticType::Operation => Tag(4),
        }
    }

    /// Types that can be the first argument of a `located_in` relation.
    pub fn is_finding(self) -> bool {
        matches!(
            self,
            SemanticType::Symptom | SemanticType::Disease | SemanticType::Operation
        )
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "symptom" => SemanticType::Symptom,
            "disease" => SemanticType::Disease,
            "anatomy" => SemanticType::Anatomy,
            "operation" => SemanticType::Operation,
            "other" => SemanticType::Other,
            _ => return Err(Error::Format(format!("unknown semantic type {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    RedFlag,
    FemaleOnly,
    MaleOnly,
    Psych,
    Common,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::RedFlag => "red_flag",
            Flag::FemaleOnly => "female_only",
            Flag::MaleOnly => "male_only",
            Flag::Psych => "psych",
            Flag::Common => "common",
        }
    }
}

impl FromStr for Flag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "red_flag" => Flag::RedFlag,
            "female_only" => Flag::FemaleOnly,
            "male_only" => Flag::MaleOnly,
            "psych" => Flag::Psych,
            "common" => Flag::Common,
            _ => return Err(Error::Format(format!("unknown flag {s:?}"))),
        })
    }
}

pub fn parse_flags(s: &str) -> Result<BTreeSet<Flag>> {
    s.split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(Flag::from_str)
        .collect()
}

pub fn format_flags(flags: &BTreeSet<Flag>) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(",")
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub concept_id: String,
    pub canonical: String,
    pub semantic_type: SemanticType,
    pub flags: BTreeSet<Flag>,
    /// Surface forms as written in the file, layman and technical mixed.
    pub synonyms: Vec<String>,
}

impl DictionaryEntry {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Concept dictionary indexed by normalized token sequences.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    entries: Vec<DictionaryEntry>,
    by_id: HashMap<String, usize>,
    index: HashMap<String, usize>,
    max_phrase_len: usize,
}

impl Dictionary {
    pub fn parse(text: &str, pre: &Preprocessor) -> Result<Self> {
        let mut dict = Dictionary::default();
        for (line, raw) in data_lines(text) {
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 5 tab-separated columns, found {}", cols.len()),
                });
            }
            let entry = DictionaryEntry {
                concept_id: cols[0].trim().to_string(),
                canonical: cols[1].trim().to_string(),
                semantic_type: cols[2]
                    .trim()
                    .parse()
                    .map_err(|e: Error| Error::Parse { line, message: e.to_string() })?,
                flags: parse_flags(cols[3])
                    .map_err(|e| Error::Parse { line, message: e.to_string() })?,
                synonyms: cols[4]
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            };
            dict.insert(entry, pre).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(dict)
    }

    pub fn insert(&mut self, entry: DictionaryEntry, pre: &Preprocessor) -> Result<()> {
        if self.by_id.contains_key(&entry.concept_id) {
            return Err(Error::Format(format!(
                "duplicate concept id {}",
                entry.concept_id
            )));
        }
        let idx = self.entries.len();
        let forms = std::iter::once(entry.canonical.as_str()).chain(entry.synonyms.iter().map(String::as_str));
        for form in forms {
            let tokens = pre.normalize_phrase(form);
            if tokens.is_empty() {
                continue;
            }
            let key = tokens.join(" ");
            match self.index.get(&key) {
                Some(&other) if other != idx => {
                    return Err(Error::Format(format!(
                        "surface {key:?} maps to both {} and {}",
                        self.entries[other].concept_id, entry.concept_id
                    )))
                }
                _ => {}
            }
            self.max_phrase_len = self.max_phrase_len.max(tokens.len());
            self.index.insert(key, idx);
        }
        self.by_id.insert(entry.concept_id.clone(), idx);
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn get(&self, concept_id: &str) -> Option<&DictionaryEntry> {
        self.by_id.get(concept_id).map(|&i| &self.entries[i])
    }

    /// Entry for an already normalized, space-joined phrase.
    pub fn lookup(&self, normalized_phrase: &str) -> Option<&DictionaryEntry> {
        self.index.get(normalized_phrase).map(|&i| &self.entries[i])
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    /// All indexed normalized surfaces with their concept ids.
    pub fn surfaces(&self) -> impl Iterator<Item = (&str, &str)> {
        self.index
            .iter()
            .map(|(k, &i)| (k.as_str(), self.entries[i].concept_id.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Simple entities used for compound splitting: surface segment mapped to
/// the representative of its synonym class.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    forms: HashMap<String, String>,
    max_len: usize,
}

impl Lexicon {
    pub const MIN_LEN: usize = 3;

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (line, raw) in data_lines(text) {
            let mut cols = raw.split('\t');
            let (Some(surface), Some(rep)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    line,
                    message: "expected surface<TAB>representative".into(),
                });
            };
            lex.insert(surface, rep);
        }
        Ok(lex)
    }

    pub fn insert(&mut self, surface: &str, representative: &str) {
        let surface = normalize_word(surface);
        if surface.len() < Self::MIN_LEN {
            return;
        }
        self.max_len = self.max_len.max(surface.len());
        self.forms.insert(surface, normalize_word(representative));
    }

    pub fn representative(&self, segment: &str) -> Option<&str> {
        self.forms.get(segment).map(String::as_str)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbbreviationEntry {
    pub expansion: Vec<String>,
    /// Empty for unconditional entries.
    pub triggers: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AbbreviationTable {
    entries: HashMap<String, Vec<AbbreviationEntry>>,
}

impl AbbreviationTable {
    pub fn parse(text: &str, pre: &Preprocessor) -> Result<Self> {
        let mut table = AbbreviationTable::default();
        for (line, raw) in data_lines(text) {
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() < 2 {
                return Err(Error::Parse {
                    line,
                    message: "expected abbreviation<TAB>expansion[<TAB>triggers]".into(),
                });
            }
            let triggers = cols
                .get(2)
                .map(|t| {
                    t.split(',')
                        .map(normalize_word)
                        .filter(|w| !w.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            table.insert(cols[0], pre.normalize_phrase(cols[1]), triggers);
        }
        Ok(table)
    }

    pub fn insert(&mut self, abbreviation: &str, expansion: Vec<String>, triggers: BTreeSet<String>) {
        self.entries
            .entry(normalize_word(abbreviation))
            .or_default()
            .push(AbbreviationEntry { expansion, triggers });
    }

    pub fn get(&self, abbreviation: &str) -> Option<&[AbbreviationEntry]> {
        self.entries.get(abbreviation).map(Vec::as_slice)
    }
}

/// Child/parent edges over simple entities.
#[derive(Debug, Clone, Default)]
pub struct SeedOntology {
    pub edges: Vec<(String, String)>,
}

impl SeedOntology {
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (line, raw) in data_lines(text) {
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected child<TAB>parent<TAB>relation".into(),
                });
            }
            if cols[2].trim() != "child_of" {
                return Err(Error::Parse {
                    line,
                    message: format!("unsupported seed relation {:?}", cols[2]),
                });
            }
            edges.push((normalize_word(cols[0]), normalize_word(cols[1])));
        }
        Ok(SeedOntology { edges })
    }

    pub fn merged(seeds: &[&SeedOntology]) -> SeedOntology {
        SeedOntology {
            edges: seeds.iter().flat_map(|s| s.edges.iter().cloned()).collect(),
        }
    }

    /// Transitive ancestors of every entity that has a parent.
    pub fn ancestor_closure(&self) -> HashMap<String, HashSet<String>> {
        let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
        for (c, p) in &self.edges {
            parents.entry(c.as_str()).or_default().push(p.as_str());
        }
        let mut closure = HashMap::new();
        for &child in parents.keys() {
            let mut seen = HashSet::new();
            let mut stack: Vec<&str> = parents[child].clone();
            while let Some(p) = stack.pop() {
                if p != child && seen.insert(p.to_string()) {
                    if let Some(next) = parents.get(p) {
                        stack.extend(next.iter().copied());
                    }
                }
            }
            closure.insert(child.to_string(), seen);
        }
        closure
    }
}

fn word_list(text: &str) -> HashSet<String> {
    data_lines(text)
        .map(|(_, l)| normalize_word(l))
        .filter(|w| !w.is_empty())
        .collect()
}

fn correction_table(text: &str) -> Result<HashMap<String, String>> {
    let mut table = HashMap::new();
    for (line, raw) in data_lines(text) {
        let mut cols = raw.split('\t');
        let (Some(wrong), Some(right)) = (cols.next(), cols.next()) else {
            return Err(Error::Parse {
                line,
                message: "expected misspelling<TAB>correction".into(),
            });
        };
        table.insert(normalize_word(wrong), normalize_word(right));
    }
    Ok(table)
}

const FILES: [&str; 10] = [
    "stopwords.txt",
    "corrections.tsv",
    "dictionary.tsv",
    "lexicon.tsv",
    "abbreviations.tsv",
    "negation.txt",
    "historical.txt",
    "seed_anatomy.tsv",
    "seed_symptom.tsv",
    "connectives.txt",
];

const BUILTIN: [&str; 10] = [
    include_str!("../data/stopwords.txt"),
    include_str!("../data/corrections.tsv"),
    include_str!("../data/dictionary.tsv"),
    include_str!("../data/lexicon.tsv"),
    include_str!("../data/abbreviations.tsv"),
    include_str!("../data/negation.txt"),
    include_str!("../data/historical.txt"),
    include_str!("../data/seed_anatomy.tsv"),
    include_str!("../data/seed_symptom.tsv"),
    include_str!("../data/connectives.txt"),
];

/// Everything the text pipeline and ontology builder read from disk.
#[derive(Debug, Clone)]
pub struct Resources {
    pub preprocessor: Preprocessor,
    pub dictionary: Dictionary,
    pub lexicon: Lexicon,
    pub abbreviations: AbbreviationTable,
    pub negation_triggers: HashSet<String>,
    pub historical_triggers: HashSet<String>,
    pub connectives: HashSet<String>,
    pub anatomy_seed: SeedOntology,
    pub symptom_seed: SeedOntology,
}

impl Resources {
    pub fn builtin() -> Self {
        Self::from_texts(&BUILTIN.map(str::to_string)).expect("built-in resources are valid")
    }

    /// Loads resources from `dir`, falling back to the built-in copy for any
    /// file that is absent.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut texts = BUILTIN.map(str::to_string);
        for (slot, name) in texts.iter_mut().zip(FILES) {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Self::from_texts(&texts)
    }

    fn from_texts(t: &[String; 10]) -> Result<Self> {
        let preprocessor = Preprocessor::new(word_list(&t[0]), correction_table(&t[1])?);
        let dictionary = Dictionary::parse(&t[2], &preprocessor)?;
        let lexicon = Lexicon::parse(&t[3])?;
        let abbreviations = AbbreviationTable::parse(&t[4], &preprocessor)?;
        Ok(Resources {
            dictionary,
            lexicon,
            abbreviations,
            negation_triggers: word_list(&t[5]),
            historical_triggers: word_list(&t[6]),
            anatomy_seed: SeedOntology::parse(&t[7])?,
            symptom_seed: SeedOntology::parse(&t[8])?,
            connectives: word_list(&t[9]),
            preprocessor,
        })
    }

    pub fn seeds(&self) -> SeedOntology {
        SeedOntology::merged(&[&self.anatomy_seed, &self.symptom_seed])
    }
}
