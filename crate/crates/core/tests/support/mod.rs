//! Independent oracles shared by the integration suites. They work from raw
//! case records and textbook formulas, never from the graph internals.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use triage_core::corpus::{generate_corpus, CaseRecord, GeneratorProfile, Polarity};
use triage_core::kg::{age_group, KnowledgeGraph, NodeTables, NodeType, RelationKind, SparseVec};
use triage_core::ontology::Ontology;
use triage_core::relext::{forward, loss_and_grad, CnnParams, CnnShape, RelationExample, MAX_LEN};
use triage_core::resources::{Resources, SemanticType};
use triage_core::rng;
use triage_core::textproc::{Relation, Tag};

pub const EPS: f64 = 1e-6;
pub const LAMBDA_DEMO: f64 = 0.25;
pub const LAMBDA_NEG: f64 = 0.5;

pub struct World {
    pub resources: Resources,
    pub corpus: Vec<CaseRecord>,
    pub ontology: Ontology,
    pub kg: KnowledgeGraph,
}

pub fn world(n: usize, seed: u64) -> World {
    let resources = Resources::builtin();
    let corpus = generate_corpus(&GeneratorProfile::builtin(), &resources, n, seed).unwrap();
    let ontology = Ontology::build(&[], &resources).unwrap();
    let kg = KnowledgeGraph::build(&corpus, &ontology).unwrap();
    World {
        resources,
        corpus,
        ontology,
        kg,
    }
}

/// Non-anatomy concept ids a record mentions with the given polarity.
pub fn raw_concepts(rec: &CaseRecord, ontology: &Ontology, polarity: Polarity) -> BTreeSet<String> {
    rec.mentions
        .iter()
        .filter(|m| m.polarity == polarity)
        .filter_map(|m| ontology.resolve(&m.concept, m.location.as_deref()))
        .filter(|id| ontology.concept(id).unwrap().semantic_type != SemanticType::Anatomy)
        .map(String::from)
        .collect()
}

/// Weighted-overlap similarity by direct iteration over every record.
#[allow(clippy::too_many_arguments)]
pub fn brute_similar(
    corpus: &[CaseRecord],
    ontology: &Ontology,
    weight: &dyn Fn(&str) -> f64,
    mean_weight: f64,
    affirmed: &[String],
    denied: &[String],
    demo: Option<(u32, triage_core::corpus::Gender)>,
    k: usize,
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for rec in corpus {
        let present = raw_concepts(rec, ontology, Polarity::Present);
        let shared: Vec<&String> = affirmed.iter().filter(|a| present.contains(*a)).collect();
        if shared.is_empty() {
            continue;
        }
        let mut score: f64 = shared.iter().map(|a| weight(a)).sum();
        if let Some((age, gender)) = demo {
            if age_group(age) == age_group(rec.age) {
                score += LAMBDA_DEMO * mean_weight;
            }
            if gender == rec.gender {
                score += LAMBDA_DEMO * mean_weight;
            }
        }
        score -= LAMBDA_NEG * denied.iter().filter(|d| present.contains(*d)).map(|d| weight(d)).sum::<f64>();
        out.push((rec.id.clone(), score));
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

/// Inverse document frequency `ln(N / df)` counted from the records.
pub fn brute_idf(corpus: &[CaseRecord], ontology: &Ontology) -> (BTreeMap<String, f64>, f64) {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for rec in corpus {
        for c in raw_concepts(rec, ontology, Polarity::Present) {
            *df.entry(c).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let w: BTreeMap<String, f64> = df.iter().map(|(c, &d)| (c.clone(), (n / d as f64).ln())).collect();
    let mean = w.values().sum::<f64>() / w.len() as f64;
    (w, mean)
}

/// The five ranker scores for one concept, by counting.
pub struct BruteScores {
    pub frequency: f64,
    pub bim: f64,
    pub chi: f64,
    pub kld: f64,
    pub rsv: f64,
}

/// Present concept sets per record id.
pub fn raw_cases(corpus: &[CaseRecord], ontology: &Ontology) -> Vec<(String, BTreeSet<String>)> {
    corpus
        .iter()
        .map(|r| (r.id.clone(), raw_concepts(r, ontology, Polarity::Present)))
        .collect()
}

pub fn brute_scores(
    cases: &[(String, BTreeSet<String>)],
    relevant: &BTreeSet<String>,
    concept: &str,
    weight: f64,
) -> BruteScores {
    let (mut in_r, mut in_n) = (0usize, 0usize);
    let mut r_size = 0usize;
    for (id, present) in cases {
        let has = present.contains(concept);
        if has {
            in_n += 1;
        }
        if relevant.contains(id) {
            r_size += 1;
            if has {
                in_r += 1;
            }
        }
    }
    let pr = (in_r as f64 + EPS) / (r_size as f64 + 2.0 * EPS);
    let pn = (in_n as f64 + EPS) / (cases.len() as f64 + 2.0 * EPS);
    let diff2 = ((pr - pn) * (pr - pn)).max(EPS * EPS);
    BruteScores {
        frequency: in_r as f64,
        bim: (pr / (1.0 - pr)).ln() - (pn / (1.0 - pn)).ln(),
        chi: diff2.ln() - pn.ln(),
        kld: pr * (pr.ln() - pn.ln()),
        rsv: (0..in_r).map(|_| weight).sum::<f64>() * (pr - pn),
    }
}

/// Upper tail of the chi-square statistic for observed counts against
/// expected probabilities.
pub fn chi_square_p(observed: &[usize], expected: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: usize = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

pub fn random_example(seed: u64, vocab: usize) -> RelationExample {
    let mut r = rng::seeded(seed);
    let e1 = r.gen_range(0..20) as i32;
    let e2 = r.gen_range(22..44) as i32;
    RelationExample {
        words: (0..MAX_LEN).map(|_| r.gen_range(0..vocab as u32)).collect(),
        dist1: (0..MAX_LEN as i32).map(|i| i - e1).collect(),
        dist2: (0..MAX_LEN as i32).map(|i| i - e2).collect(),
        tags: (0..MAX_LEN).map(|_| r.gen_range(0..Tag::COUNT as u8)).collect(),
        label: Some(if seed.is_multiple_of(2) { Relation::LocatedIn } else { Relation::NotLocatedIn }),
    }
}

/// Mean cross-entropy computed from the forward pass alone.
pub fn batch_loss(p: &CnnParams, batch: &[RelationExample]) -> f64 {
    batch
        .iter()
        .map(|ex| {
            let probs = forward(p, ex).unwrap().probs;
            let y = if ex.label == Some(Relation::LocatedIn) { 0 } else { 1 };
            -probs[y].ln()
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Worst relative error between the analytic gradient and central
/// differences, per tensor, over the entries `pick` selects.
pub fn gradient_check(shape: CnnShape, pick: impl Fn(&str, usize, &[f64]) -> Vec<usize>) -> Vec<(String, f64, usize)> {
    let params = CnnParams::init(shape.clone(), &mut rng::seeded(21)).unwrap();
    let batch: Vec<_> = (0..4).map(|s| random_example(s, shape.vocab)).collect();
    let mut grad = params.zeros_like();
    for ex in &batch {
        loss_and_grad(&params, ex, None, &mut grad).unwrap();
    }
    let analytic: Vec<(String, Vec<f64>)> = grad
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data.iter().map(|g| g / batch.len() as f64).collect()))
        .collect();
    let eps = 1e-4;
    let mut out = Vec::new();
    for (ti, (name, g)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        let entries = pick(name, ti, g);
        for &i in &entries {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data[i] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data[i] -= eps;
            let numeric = (batch_loss(&plus, &batch) - batch_loss(&minus, &batch)) / (2.0 * eps);
            let denom = g[i].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((g[i] - numeric).abs() / denom);
        }
        out.push((name.clone(), worst, entries.len()));
    }
    out
}

/// Random case graph with integer edge weights in 1..=3.
pub fn random_graph(cases: usize, symptoms: usize, diseases: usize, edges: usize, seed: u64) -> KnowledgeGraph {
    let mut r = rng::seeded(seed);
    let mut keys: [Vec<String>; 7] = Default::default();
    keys[NodeType::CaseRecord.index()] = (0..cases).map(|i| format!("c{i:07}")).collect();
    keys[NodeType::Symptom.index()] = (0..symptoms).map(|i| format!("s{i:05}")).collect();
    keys[NodeType::Disease.index()] = (0..diseases).map(|i| format!("d{i:05}")).collect();
    let mut edges_of = |rows: usize, count: usize| {
        let mut seen = BTreeMap::new();
        while seen.len() < count {
            seen.insert((r.gen_range(0..rows as u32), r.gen_range(0..cases as u32)), r.gen_range(1..4) as f64);
        }
        seen.into_iter().map(|((a, b), w)| (a, b, w)).collect::<Vec<_>>()
    };
    let mut t = BTreeMap::new();
    t.insert(RelationKind::SymptomToPatient, edges_of(symptoms, edges));
    t.insert(RelationKind::DiseaseToPatient, edges_of(diseases, edges / 4));
    KnowledgeGraph::from_parts(NodeTables::new(keys), t).unwrap()
}

pub fn dense(v: &SparseVec, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, x) in v.iter() {
        out[i as usize] += x;
    }
    out
}
