pub mod clustering;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod knowledge;
pub mod linking;
pub mod pagerank;
pub mod text;
pub mod wem;
pub mod doc_retrieval;
pub mod fusion;
pub mod profile_retrieval;
pub mod evaluation;
pub mod config;
pub mod strategy;
pub mod pipeline;
pub mod store;
pub mod engine;
pub mod batch;
pub mod synthetic;
