//! The offline stages behind the CLI. Each reads and writes the artifact
//! files named by [`Paths`](crate::config::Paths).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use triage_core::corpus::{generate_corpus, load_corpus, read_jsonl, save_corpus, split_corpus, write_jsonl, CaseRecord, GeneratorProfile};
use triage_core::kg::{idf_weights, learn_weights, load_snapshot, save_snapshot, EdgeWeights, KnowledgeGraph, WeightSource};
use triage_core::metrics::ClassMetrics;
use triage_core::ontology::{self, compression, Ontology};
use triage_core::qgen::{
    build_masked_eval, concept_frequencies, eval_acc_at_k, resolve_cases, AccuracyTable, CaseConcepts, ConceptRanker,
    MaskedPredictor, PrfMethod, Ranker,
};
use triage_core::relext::{balance_dataset, load_model, planted_corpus, save_model, train, RelationModel, RelationTriple};
use triage_core::resources::Resources;
use triage_core::textproc::{Annotation, TextPipeline};
use triage_core::triage::{evaluate_recommendations, load_ground_truth, save_ground_truth, ground_truth_from, Engine, TriageReport};
use triage_core::{Error, Result};

use crate::config::Config;

pub fn resources(cfg: &Config) -> Result<Resources> {
    match &cfg.resources_dir {
        Some(dir) => Resources::load_dir(dir),
        None => Ok(Resources::builtin()),
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn ensure_dir(cfg: &Config) -> Result<()> {
    std::fs::create_dir_all(&cfg.data_dir).map_err(|e| Error::io(&cfg.data_dir, e))
}

pub fn generate(cfg: &Config, n: usize) -> Result<usize> {
    ensure_dir(cfg)?;
    let profile = match &cfg.generator_profile {
        Some(p) => GeneratorProfile::load(p)?,
        None => GeneratorProfile::builtin(),
    };
    let corpus = generate_corpus(&profile, &resources(cfg)?, n, cfg.seed)?;
    save_corpus(&cfg.paths().corpus, &corpus)?;
    Ok(corpus.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records: usize,
    /// Records without any recognised concept, left out of the ingested corpus.
    pub dropped: usize,
    pub annotations: usize,
    pub relation_model: bool,
}

/// Runs the text pipeline over every record: the ingested corpus carries the
/// mentions found in the free text, and the annotations feed the ontology.
pub fn ingest(cfg: &Config) -> Result<IngestSummary> {
    let paths = cfg.paths();
    let r = resources(cfg)?;
    let corpus = load_corpus(&paths.corpus)?;
    let model = if paths.relext_model.exists() {
        Some(load_model(&paths.relext_model)?)
    } else {
        None
    };
    let mut pipeline = TextPipeline::new(&r, cfg.text.clone());
    if let Some(m) = &model {
        pipeline = pipeline.with_scorer(m);
    }
    let mut ingested = Vec::with_capacity(corpus.len());
    let mut annotations: Vec<Annotation> = Vec::new();
    for rec in &corpus {
        let analysis = pipeline.analyze(&rec.free_text);
        annotations.extend(analysis.annotations());
        let mentions = analysis.concept_mentions(&r.dictionary);
        if mentions.is_empty() {
            continue;
        }
        ingested.push(CaseRecord {
            mentions,
            ..rec.clone()
        });
    }
    save_corpus(&paths.ingested, &ingested)?;
    write_jsonl(&paths.annotations, &annotations)?;
    Ok(IngestSummary {
        records: corpus.len(),
        dropped: corpus.len() - ingested.len(),
        annotations: annotations.len(),
        relation_model: model.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologySummary {
    pub concepts: usize,
    pub edges: usize,
    /// Distinct surface expressions per concept.
    pub compression: f64,
}

pub fn build_ontology(cfg: &Config) -> Result<OntologySummary> {
    let paths = cfg.paths();
    let annotations: Vec<Annotation> = read_jsonl(&paths.annotations)?;
    let o = Ontology::build(&annotations, &resources(cfg)?)?;
    ontology::io::save(&paths.ontology, &o)?;
    Ok(OntologySummary {
        concepts: o.len(),
        edges: o.edges().count(),
        compression: compression(&annotations, o.sources()),
    })
}

/// Train, validation and test partitions of the ingested corpus.
pub fn splits(cfg: &Config) -> Result<Vec<Vec<CaseRecord>>> {
    split_corpus(&load_corpus(&cfg.paths().ingested)?, &cfg.split, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgSummary {
    pub cases: usize,
    pub edges: usize,
    pub ground_truth: usize,
    pub weights: WeightSource,
}

/// Builds the graph from the training split, stores its weights and writes
/// the test split as the ground-truth suite.
pub fn build_kg(cfg: &Config) -> Result<KgSummary> {
    let paths = cfg.paths();
    let o = ontology::io::load(&paths.ontology)?;
    let parts = splits(cfg)?;
    let kg = KnowledgeGraph::build(&parts[0], &o)?;
    let weights = match cfg.weights {
        WeightSource::Idf => idf_weights(&kg),
        WeightSource::Learned => learn_weights(&kg, &cfg.learn)?,
    };
    save_snapshot(&kg, &paths.kg)?;
    write_json(&paths.weights, &weights)?;
    let truth = ground_truth_from(&parts[2]);
    save_ground_truth(&paths.ground_truth, &truth)?;
    Ok(KgSummary {
        cases: kg.case_count(),
        edges: kg.edge_count(),
        ground_truth: truth.len(),
        weights: cfg.weights,
    })
}

/// Graph, ontology and weights needed to run sessions.
pub struct Loaded {
    pub kg: KnowledgeGraph,
    pub ontology: Ontology,
    pub weights: EdgeWeights,
    pub kg_sha256: String,
    pub ontology_sha256: String,
}

impl Loaded {
    pub fn engine(&self, cfg: &Config) -> Result<Engine<'_>> {
        Engine::new(&self.kg, &self.ontology, &self.weights, cfg.triage.clone())
    }
}

/// Loads the serving artifacts; a missing file is reported with every
/// missing path.
pub fn load(cfg: &Config) -> Result<Loaded> {
    let paths = cfg.paths();
    let missing: Vec<String> = [&paths.kg, &paths.ontology, &paths.weights]
        .into_iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing artifacts: {}", missing.join(", "))));
    }
    Ok(Loaded {
        kg: load_snapshot(&paths.kg)?,
        ontology: ontology::io::load(&paths.ontology)?,
        weights: read_json(&paths.weights)?,
        kg_sha256: file_sha256(&paths.kg)?,
        ontology_sha256: file_sha256(&paths.ontology)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelextMetrics {
    pub located_in: ClassMetrics,
    pub not_located_in: ClassMetrics,
    pub test_size: usize,
    pub best_epoch: Option<usize>,
    pub seconds: Option<f64>,
}

fn planted_splits(cfg: &Config) -> Result<(Vec<RelationTriple>, Vec<RelationTriple>, Vec<RelationTriple>)> {
    let triples = balance_dataset(planted_corpus(&resources(cfg)?, &cfg.planted)?, cfg.planted.seed)?;
    let n = triples.len();
    let (a, b) = (n * 8 / 10, n * 9 / 10);
    Ok((triples[..a].to_vec(), triples[a..b].to_vec(), triples[b..].to_vec()))
}

fn relext_metrics(model: &RelationModel, test: &[RelationTriple]) -> Result<RelextMetrics> {
    let m = model.evaluate(test)?;
    Ok(RelextMetrics {
        located_in: m[0],
        not_located_in: m[1],
        test_size: test.len(),
        best_epoch: None,
        seconds: None,
    })
}

pub fn train_relext(cfg: &Config) -> Result<RelextMetrics> {
    ensure_dir(cfg)?;
    let paths = cfg.paths();
    let (tr, val, test) = planted_splits(cfg)?;
    let start = std::time::Instant::now();
    let (model, report) = train(&tr, &val, &cfg.relext)?;
    let seconds = start.elapsed().as_secs_f64();
    save_model(&model, &paths.relext_model)?;
    let mut m = relext_metrics(&model, &test)?;
    m.best_epoch = Some(report.best_epoch);
    m.seconds = Some(seconds);
    write_json(&paths.relext_metrics, &m)?;
    Ok(m)
}

pub fn eval_relext(cfg: &Config) -> Result<RelextMetrics> {
    let paths = cfg.paths();
    let model = load_model(&paths.relext_model)?;
    let (_, _, test) = planted_splits(cfg)?;
    let m = relext_metrics(&model, &test)?;
    write_json(&paths.relext_metrics, &m)?;
    Ok(m)
}

fn concept_splits(cfg: &Config, o: &Ontology) -> Result<[Vec<CaseConcepts>; 3]> {
    let parts = splits(cfg)?;
    let train_c = resolve_cases(&parts[0], o)?;
    let known: std::collections::BTreeSet<String> = train_c.iter().flat_map(|c| c.concepts.iter().cloned()).collect();
    let restrict = |recs: &[CaseRecord]| -> Result<Vec<CaseConcepts>> {
        Ok(resolve_cases(recs, o)?
            .into_iter()
            .map(|mut c| {
                c.concepts.retain(|s| known.contains(s));
                c
            })
            .collect())
    };
    Ok([train_c.clone(), restrict(&parts[1])?, restrict(&parts[2])?])
}

pub fn train_qgen(cfg: &Config) -> Result<Vec<f64>> {
    let paths = cfg.paths();
    let o = ontology::io::load(&paths.ontology)?;
    let [train_c, val_c, _] = concept_splits(cfg, &o)?;
    let (model, report) = MaskedPredictor::train(&train_c, &val_c, &cfg.qgen)?;
    model.save(&paths.qgen_model)?;
    Ok(report.val_loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgenReport {
    pub seed: u64,
    pub corpus_sha256: String,
    pub examples: usize,
    pub skipped: usize,
    pub vocabulary: usize,
    pub tables: Vec<AccuracyTable>,
}

impl QgenReport {
    pub fn summary(&self) -> String {
        let mut s = format!("examples {} skipped {} vocabulary {}\n", self.examples, self.skipped, self.vocabulary);
        for t in &self.tables {
            s += &format!("{:<10}", t.method);
            for (k, a) in &t.accuracy {
                s += &format!(" acc@{k} {a:.4}");
            }
            s.push('\n');
        }
        s
    }
}

pub const QGEN_KS: [usize; 3] = [1, 5, 10];

pub fn eval_qgen(cfg: &Config) -> Result<QgenReport> {
    let paths = cfg.paths();
    let loaded = load(cfg)?;
    let [train_c, _, test_c] = concept_splits(cfg, &loaded.ontology)?;
    let eval = build_masked_eval(&test_c, &concept_frequencies(&train_c), cfg.seed);
    let nn = MaskedPredictor::load(&paths.qgen_model)?;
    let mut tables = vec![eval_acc_at_k(&nn, &eval.examples, &QGEN_KS)?];
    for ranker in Ranker::ALL {
        let m = PrfMethod {
            kg: &loaded.kg,
            weights: &loaded.weights,
            ranker,
            evidence: cfg.triage.question.evidence,
            similarity: cfg.triage.question.similarity.clone(),
        };
        tables.push(eval_acc_at_k(&m as &dyn ConceptRanker, &eval.examples, &QGEN_KS)?);
    }
    let report = QgenReport {
        seed: cfg.seed,
        corpus_sha256: file_sha256(&paths.ingested)?,
        examples: eval.examples.len(),
        skipped: eval.skipped,
        vocabulary: nn.vocab().len(),
        tables,
    };
    write_json(&paths.qgen_metrics, &report)?;
    Ok(report)
}

pub fn eval_triage(cfg: &Config, truth: Option<&Path>) -> Result<TriageReport> {
    let paths = cfg.paths();
    let loaded = load(cfg)?;
    let engine = loaded.engine(cfg)?;
    let truth = load_ground_truth(truth.unwrap_or(&paths.ground_truth))?;
    let (report, _) = evaluate_recommendations(&engine, &truth)?;
    write_json(&paths.triage_metrics, &report)?;
    Ok(report)
}

pub fn stats(cfg: &Config) -> Result<String> {
    let paths = cfg.paths();
    let mut out = String::new();
    for (name, p) in [("corpus", &paths.corpus), ("ingested", &paths.ingested)] {
        if p.exists() {
            out += &format!("{name}\trecords\t{}\n", load_corpus(p)?.len());
        }
    }
    if paths.ontology.exists() {
        let o = ontology::io::load(&paths.ontology)?;
        out += &format!("ontology\tconcepts\t{}\nontology\tedges\t{}\n", o.len(), o.edges().count());
    }
    if paths.kg.exists() {
        let kg = load_snapshot(&paths.kg)?;
        out += &format!("cases\t{}\n", kg.case_count());
        out += &kg.stats();
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no artifacts under {}", cfg.data_dir.display())));
    }
    Ok(out)
}
