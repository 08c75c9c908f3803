use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::{CaseRecord, ConceptMention, Gender, Polarity, RecommendationLabel, Risk, MAX_AGE, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::ontology::compound::semantic_blocks;
use crate::resources::{Resources, SemanticType};
use crate::rng::{self, Rng};
use crate::textproc::normalize_word;

const BUILTIN_PROFILE: &str = include_str!("../../data/profile.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demographics {
    pub age_min: u32,
    pub age_max: u32,
    /// Prior probability of a female record.
    pub female: f64,
    /// Prior probability of a male record; the remainder is `other`.
    pub male: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Chance of rendering a non-primary synonym.
    pub synonym_rate: f64,
    pub misspelling_rate: f64,
    pub lowercase_rate: f64,
    /// Chance of writing a located symptom as "X am Y" instead of a compound.
    pub phrase_rate: f64,
    /// Chance of one unrelated present concept.
    pub noise_rate: f64,
    #[serde(default)]
    pub noise_concepts: Vec<String>,
    pub negated_max: usize,
    pub negated_rate: f64,
    #[serde(default)]
    pub negatable: Vec<String>,
    pub historical_rate: f64,
    #[serde(default)]
    pub historical: Vec<String>,
    /// Chance of listing the template's condition as a diagnosis.
    #[serde(default)]
    pub diagnosis_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymptomSpec {
    pub concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionTemplate {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub red_flags: Vec<String>,
    #[serde(default)]
    pub red_flag_probability: f64,
    pub label: RecommendationLabel,
    pub symptoms: Vec<SymptomSpec>,
}

impl ConditionTemplate {
    fn age_range(&self, d: &Demographics) -> (u32, u32) {
        (
            d.age_min.max(self.age_min.unwrap_or(0)),
            d.age_max.min(self.age_max.unwrap_or(MAX_AGE)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorProfile {
    pub schema_version: u32,
    pub demographics: Demographics,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub templates: Vec<ConditionTemplate>,
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} = {p} is not a probability")))
    }
}

impl GeneratorProfile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("generator profile: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROFILE).expect("built-in profile parses")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Structural checks that need no dictionary.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "profile schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("profile has no condition templates".into()));
        }
        let d = &self.demographics;
        if d.age_min > d.age_max || d.age_max > MAX_AGE {
            return Err(Error::Config(format!("age range {}..={}", d.age_min, d.age_max)));
        }
        check_probability("demographics.female", d.female)?;
        check_probability("demographics.male", d.male)?;
        check_probability("demographics.female + male", d.female + d.male)?;
        let n = &self.noise;
        for (what, p) in [
            ("synonym_rate", n.synonym_rate),
            ("misspelling_rate", n.misspelling_rate),
            ("lowercase_rate", n.lowercase_rate),
            ("phrase_rate", n.phrase_rate),
            ("noise_rate", n.noise_rate),
            ("negated_rate", n.negated_rate),
            ("historical_rate", n.historical_rate),
            ("diagnosis_rate", n.diagnosis_rate),
        ] {
            check_probability(what, p)?;
        }
        for t in &self.templates {
            if t.symptoms.is_empty() {
                return Err(Error::Config(format!("template {} has no symptoms", t.name)));
            }
            for s in &t.symptoms {
                check_probability(&format!("{}.{}", t.name, s.concept), s.probability)?;
            }
            check_probability(&format!("{}.red_flag_probability", t.name), t.red_flag_probability)?;
            if t.red_flag_probability > 0.0 && t.red_flags.is_empty() {
                return Err(Error::Config(format!(
                    "template {} has a red-flag probability but no red flags",
                    t.name
                )));
            }
            t.label
                .validate()
                .map_err(|m| Error::Config(format!("template {}: {m}", t.name)))?;
            let (lo, hi) = t.age_range(d);
            if lo > hi {
                return Err(Error::Config(format!("template {} has an empty age range", t.name)));
            }
        }
        for risk in Risk::ALL {
            if !self.templates.iter().any(|t| t.label.risk == risk) {
                return Err(Error::Config(format!("no template for {risk} risk")));
            }
        }
        Ok(())
    }

    /// Every concept the profile can emit must exist in the dictionary, and
    /// every location must be anatomy.
    pub fn validate_against(&self, resources: &Resources) -> Result<()> {
        self.validate()?;
        let dict = &resources.dictionary;
        let known = |id: &str| {
            dict.get(id)
                .ok_or_else(|| Error::Config(format!("profile concept {id} is not in the dictionary")))
        };
        let n = &self.noise;
        for id in n.noise_concepts.iter().chain(&n.negatable).chain(&n.historical) {
            known(id)?;
        }
        for t in &self.templates {
            for id in t.red_flags.iter().chain(&t.condition) {
                known(id)?;
            }
            for s in &t.symptoms {
                known(&s.concept)?;
                if let Some(loc) = &s.location {
                    if known(loc)?.semantic_type != SemanticType::Anatomy {
                        return Err(Error::Config(format!("location {loc} is not anatomy")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Seeded synthetic corpus generator.
pub struct Generator<'a> {
    profile: &'a GeneratorProfile,
    resources: &'a Resources,
    misspellings: HashMap<String, Vec<String>>,
    /// Located symptom to the dictionary entry whose blocks equal the union.
    compounds: HashMap<(String, String), String>,
}

impl<'a> Generator<'a> {
    pub fn new(profile: &'a GeneratorProfile, resources: &'a Resources) -> Result<Self> {
        profile.validate_against(resources)?;
        let mut misspellings: HashMap<String, Vec<String>> = HashMap::new();
        for (wrong, right) in &resources.preprocessor.corrections {
            misspellings.entry(right.clone()).or_default().push(wrong.clone());
        }
        for list in misspellings.values_mut() {
            list.sort();
        }
        let dict = &resources.dictionary;
        let blocks_of = |id: &str| -> BTreeSet<String> {
            let entry = dict.get(id).expect("validated");
            let tokens = resources.preprocessor.normalize_phrase(&entry.canonical);
            semantic_blocks(&tokens, &resources.lexicon).into_iter().collect()
        };
        let by_blocks: HashMap<Vec<String>, String> = dict
            .entries()
            .iter()
            .map(|e| (blocks_of(&e.concept_id).into_iter().collect(), e.concept_id.clone()))
            .collect();
        let mut compounds = HashMap::new();
        for t in &profile.templates {
            for s in &t.symptoms {
                if let Some(loc) = &s.location {
                    let mut union = blocks_of(&s.concept);
                    union.extend(blocks_of(loc));
                    let key: Vec<String> = union.into_iter().collect();
                    if let Some(id) = by_blocks.get(&key) {
                        compounds.insert((s.concept.clone(), loc.clone()), id.clone());
                    }
                }
            }
        }
        Ok(Generator {
            profile,
            resources,
            misspellings,
            compounds,
        })
    }

    pub fn generate(&self, n: usize, seed: u64) -> Vec<CaseRecord> {
        let mut rng = rng::seeded(seed);
        (0..n)
            .map(|i| self.record(format!("s{seed}-{i:06}"), &mut rng))
            .collect()
    }

    fn record(&self, id: String, rng: &mut Rng) -> CaseRecord {
        let profile = self.profile;
        let template = profile.templates.choose(rng).expect("validated non-empty");
        let (lo, hi) = template.age_range(&profile.demographics);
        let age = rng.gen_range(lo..=hi);
        let gender = template.gender.unwrap_or_else(|| {
            let u: f64 = rng.gen();
            let d = &profile.demographics;
            if u < d.female {
                Gender::Female
            } else if u < d.female + d.male {
                Gender::Male
            } else {
                Gender::Other
            }
        });
        let mentions = self.mentions(template, rng);
        let free_text = self.render(age, gender, &mentions, rng);
        CaseRecord {
            id,
            age,
            gender,
            mentions,
            free_text,
            label: template.label,
        }
    }

    fn mentions(&self, t: &ConditionTemplate, rng: &mut Rng) -> Vec<ConceptMention> {
        let noise = &self.profile.noise;
        let mut lead = Vec::new();
        if !t.red_flags.is_empty() && rng.gen_bool(t.red_flag_probability) {
            let flag = t.red_flags.choose(rng).expect("non-empty");
            lead.push(ConceptMention::present(flag.clone()));
        }
        let mut rest: Vec<ConceptMention> = Vec::new();
        for s in &t.symptoms {
            if rng.gen_bool(s.probability) {
                let mut m = ConceptMention::present(s.concept.clone());
                m.location = s.location.clone();
                if !lead.contains(&m) && !rest.contains(&m) {
                    rest.push(m);
                }
            }
        }
        if lead.is_empty() && rest.is_empty() {
            let best = t
                .symptoms
                .iter()
                .max_by(|a, b| a.probability.total_cmp(&b.probability))
                .expect("validated non-empty");
            let mut m = ConceptMention::present(best.concept.clone());
            m.location = best.location.clone();
            rest.push(m);
        }
        rest.shuffle(rng);
        if let Some(condition) = &t.condition {
            if rng.gen_bool(noise.diagnosis_rate) {
                rest.push(ConceptMention::present(condition.clone()));
            }
        }
        let mut mentions = lead;
        mentions.extend(rest);
        let mut used: BTreeSet<String> = mentions.iter().map(|m| m.concept.clone()).collect();
        if !noise.noise_concepts.is_empty() && rng.gen_bool(noise.noise_rate) {
            let c = noise.noise_concepts.choose(rng).expect("non-empty");
            if used.insert(c.clone()) {
                mentions.push(ConceptMention::present(c.clone()));
            }
        }
        if noise.negated_max > 0 && rng.gen_bool(noise.negated_rate) {
            let k = rng.gen_range(1..=noise.negated_max);
            let pool: Vec<&String> = noise.negatable.iter().filter(|c| !used.contains(*c)).collect();
            for c in pool.choose_multiple(rng, k) {
                used.insert((*c).clone());
                mentions.push(ConceptMention::negated((*c).clone()));
            }
        }
        if rng.gen_bool(noise.historical_rate) {
            let pool: Vec<&String> = noise.historical.iter().filter(|c| !used.contains(*c)).collect();
            if let Some(c) = pool.choose(rng) {
                mentions.push(ConceptMention {
                    concept: (*c).clone(),
                    polarity: Polarity::Historical,
                    location: None,
                });
            }
        }
        mentions
    }

    fn surface(&self, concept: &str, rng: &mut Rng) -> String {
        let noise = &self.profile.noise;
        let entry = self.resources.dictionary.get(concept).expect("validated");
        let mut form = if rng.gen_bool(noise.synonym_rate) {
            entry.synonyms.choose(rng).cloned()
        } else {
            entry.synonyms.first().cloned()
        }
        .unwrap_or_else(|| entry.canonical.clone());
        if !form.contains(' ') && rng.gen_bool(noise.misspelling_rate) {
            if let Some(wrong) = self.misspellings.get(&normalize_word(&form)) {
                form = wrong.choose(rng).expect("non-empty").clone();
            }
        }
        if rng.gen_bool(noise.lowercase_rate) {
            form = form.to_lowercase();
        }
        form
    }

    fn located(&self, m: &ConceptMention, loc: &str, rng: &mut Rng) -> String {
        let compound = self.compounds.get(&(m.concept.clone(), loc.to_string()));
        match compound {
            Some(id) if !rng.gen_bool(self.profile.noise.phrase_rate) => self.surface(id, rng),
            _ => {
                let connective = match loc {
                    "C_chest" | "C_hand" | "C_bladder" | "C_flank" => "in der",
                    "C_abdomen" | "C_throat" | "C_ear" | "C_back" => "im",
                    _ => "am",
                };
                let head = self.surface(&m.concept, rng);
                let tail = self.surface(loc, rng);
                format!("{head} {connective} {tail}")
            }
        }
    }

    /// Renders mentions as free text. Every mention gets its own clause so
    /// negation scope and relation rules never reach a neighbour.
    fn render(&self, age: u32, gender: Gender, mentions: &[ConceptMention], rng: &mut Rng) -> String {
        let who = match gender {
            Gender::Female => "Patientin",
            _ => "Patient",
        };
        let mut out = format!("{who}, {age} Jahre. ");

        let mut present = Vec::new();
        let mut negated = Vec::new();
        let mut historical = Vec::new();
        for m in mentions {
            let text = match &m.location {
                Some(loc) => self.located(m, loc, rng),
                None => self.surface(&m.concept, rng),
            };
            match m.polarity {
                Polarity::Present => present.push(text),
                Polarity::Negated => negated.push(text),
                Polarity::Historical => historical.push(text),
            }
        }
        if !present.is_empty() {
            let opener = ["", "Seit gestern ", "Seit zwei Tagen ", "Klagt über ", "Aktuell "]
                .choose(rng)
                .expect("non-empty");
            out.push_str(opener);
            out.push_str(&present.join(", "));
            out.push_str(". ");
        }
        if !negated.is_empty() {
            let parts: Vec<String> = negated
                .iter()
                .map(|x| {
                    let pattern = ["kein {}", "keine {}", "ohne {}", "{} verneint", "{} negativ"]
                        .choose(rng)
                        .expect("non-empty");
                    pattern.replace("{}", x)
                })
                .collect();
            out.push_str(&parts.join(", "));
            out.push_str(". ");
        }
        for x in historical {
            let pattern = ["Früher {}", "{} vor 3 Jahren", "Zustand nach {}", "{} damals"]
                .choose(rng)
                .expect("non-empty");
            out.push_str(&pattern.replace("{}", &x));
            out.push_str(". ");
        }
        out.trim_end().to_string()
    }
}

/// Generates `n` records; identical `(profile, n, seed)` give identical
/// output.
pub fn generate_corpus(
    profile: &GeneratorProfile,
    resources: &Resources,
    n: usize,
    seed: u64,
) -> Result<Vec<CaseRecord>> {
    Ok(Generator::new(profile, resources)?.generate(n, seed))
}
