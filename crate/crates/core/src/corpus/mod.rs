//! Case records, the synthetic corpus generator, JSONL persistence and
//! seeded splitting.

pub mod generator;
pub mod io;
pub mod model;
pub mod split;

pub use generator::{generate_corpus, ConditionTemplate, Generator, GeneratorProfile};
pub use io::{load_corpus, parse_corpus, read_jsonl, save_corpus, write_jsonl};
pub use model::{
    CaseRecord, ConceptMention, Gender, PointOfCare, Polarity, RecommendationLabel, Risk,
    TimeFrame, MAX_AGE, SCHEMA_VERSION,
};
pub use split::{partition_sizes, split_corpus};
