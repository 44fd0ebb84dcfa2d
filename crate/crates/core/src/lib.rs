//! Retrieval-augmented validation and recovery of trace links between
//! stakeholder and system requirements.

pub mod corpus;
pub mod model;
pub mod retrieval;
pub mod prompting;
pub mod gateway;
pub mod pipeline;
pub mod recovery;
pub mod evaluation;
pub mod interface;
