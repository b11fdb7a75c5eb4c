//! File formats, text pooling, and synthetic data.

pub mod candidates;
pub mod features;
pub mod synth;
pub mod text;

pub use candidates::{read_candidates, write_candidates, CandidateRecord, DEFAULT_CANDIDATES};
pub use features::{read_feature_matrix, write_feature_matrix};
pub use synth::{synth_generate, SynthConfig, SynthDataset, SynthSplit};
pub use text::{
    load_embedding_table, sentence_embedding, tokenize, EmbeddingTable, Pooling, MAX_TOKENS,
};
