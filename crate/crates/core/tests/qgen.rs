mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use support::{brute_idf, brute_scores, chi_square_p, raw_cases, world};
use triage_core::corpus::split_corpus;
use triage_core::kg::{idf_weights, similar_case_indices, KnowledgeGraph, NodeType, QueryProfile, SimilarityConfig};
use triage_core::qgen::{
    build_masked_eval, concept_frequencies, eval_acc_at_k, resolve_cases, sample_mask, MaskedPredictor,
    PredictorConfig, PrfMethod, Ranker, RelevantSet,
};
use triage_core::rng;

fn concept_nodes(kg: &KnowledgeGraph) -> Vec<String> {
    NodeType::CONCEPTS
        .into_iter()
        .flat_map(|t| (0..kg.node_count(t)).map(move |i| kg.key(t, i).to_string()))
        .collect()
}

#[test]
fn rankers_match_brute_force_counting() {
    let start = Instant::now();
    let mut checked = 0;
    for (n, seed) in [(1000, 21), (700, 22), (400, 23)] {
        let w = world(n, seed);
        let weights = idf_weights(&w.kg);
        let (idf, _) = brute_idf(&w.corpus, &w.ontology);
        let raw = raw_cases(&w.corpus, &w.ontology);
        let concepts = concept_nodes(&w.kg);
        let mut r = rng::seeded(seed);
        for _ in 0..10 {
            let (_, present) = &raw[r.gen_range(0..n)];
            let affirmed: Vec<String> = present.iter().take(2).cloned().collect();
            if affirmed.is_empty() {
                continue;
            }
            let profile = QueryProfile {
                affirmed,
                ..QueryProfile::default()
            };
            let hits = similar_case_indices(&w.kg, &profile, 50, &weights, &SimilarityConfig::default()).unwrap();
            let cases: Vec<usize> = hits.iter().map(|h| h.0).collect();
            let relevant: BTreeSet<String> = cases.iter().map(|&c| w.kg.case_id(c).to_string()).collect();
            let set = RelevantSet::new(&w.kg, &cases, &weights).unwrap();
            for s in &concepts {
                let b = brute_scores(&raw, &relevant, s, idf.get(s).copied().unwrap_or(0.0));
                for (ranker, want) in [
                    (Ranker::Frequency, b.frequency),
                    (Ranker::Bim, b.bim),
                    (Ranker::Chi, b.chi),
                    (Ranker::Kld, b.kld),
                    (Ranker::Rsv, b.rsv),
                ] {
                    let got = set.score(ranker, s);
                    assert!((got - want).abs() < 1e-9, "{ranker} {s}: {got} vs {want}");
                    checked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    eprintln!("{checked} scores in {secs:.2}s");
    assert!(checked > 1000);
    assert!(secs < 10.0);
}

#[test]
fn inverse_frequency_masking_fits_its_distribution() {
    let concepts: Vec<String> = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
    let freq: BTreeMap<String, usize> = concepts.iter().cloned().zip([1usize, 2, 5, 10, 40]).collect();
    let inv: Vec<f64> = concepts.iter().map(|c| 1.0 / freq[c] as f64).collect();
    let total: f64 = inv.iter().sum();
    let expected: Vec<f64> = inv.iter().map(|w| w / total).collect();
    let mut r = rng::seeded(99);
    let mut observed = vec![0usize; concepts.len()];
    for _ in 0..10_000 {
        observed[sample_mask(&concepts, &freq, &mut r)] += 1;
    }
    let p = chi_square_p(&observed, &expected);
    eprintln!("observed {observed:?} p {p:.4}");
    assert!(p > 0.01);
}

#[test]
fn trained_predictor_beats_feedback_rankers() {
    let w = world(6000, 31);
    let parts = split_corpus(&w.corpus, &[0.7, 0.1, 0.2], 31).unwrap();
    let (train, val, test) = (&parts[0], &parts[1], &parts[2]);
    let kg = KnowledgeGraph::build(train, &w.ontology).unwrap();
    let weights = idf_weights(&kg);
    let train_c = resolve_cases(train, &w.ontology).unwrap();
    let known: BTreeSet<String> = train_c.iter().flat_map(|c| c.concepts.iter().cloned()).collect();
    let restrict = |cs: Vec<triage_core::qgen::CaseConcepts>| {
        cs.into_iter()
            .map(|mut c| {
                c.concepts.retain(|s| known.contains(s));
                c
            })
            .collect::<Vec<_>>()
    };
    let val_c = restrict(resolve_cases(val, &w.ontology).unwrap());
    let test_c = restrict(resolve_cases(test, &w.ontology).unwrap());
    let eval = build_masked_eval(&test_c, &concept_frequencies(&train_c), 5);
    let (nn, _) = MaskedPredictor::train(&train_c, &val_c, &PredictorConfig::default()).unwrap();
    let ks = [1, 5, 10];
    let nn_acc = eval_acc_at_k(&nn, &eval.examples, &ks).unwrap();
    eprintln!("nn {:?}", nn_acc.accuracy);
    for ranker in [Ranker::Bim, Ranker::Chi, Ranker::Kld] {
        let m = PrfMethod {
            kg: &kg,
            weights: &weights,
            ranker,
            evidence: 50,
            similarity: SimilarityConfig::default(),
        };
        let acc = eval_acc_at_k(&m, &eval.examples, &ks).unwrap();
        eprintln!("{ranker} {:?}", acc.accuracy);
        assert!(nn_acc.at(10).unwrap() > acc.at(10).unwrap(), "{ranker}");
    }

    let untrained = MaskedPredictor::init(nn.vocab().to_vec(), 128, 77).unwrap();
    let acc1 = eval_acc_at_k(&untrained, &eval.examples, &[1]).unwrap().at(1).unwrap();
    let v = nn.vocab().len() as f64;
    let p = 1.0 / v;
    let sigma = (p * (1.0 - p) / eval.examples.len() as f64).sqrt();
    eprintln!("untrained acc@1 {acc1:.4} chance {p:.4} sigma {sigma:.4}");
    assert!((acc1 - p).abs() <= 3.0 * sigma);
}
