//! Core of the citation index: OCI identifier codec, citation data model,
//! streaming dump ingestion, citation/provenance generation, RDF
//! serialization, and the persistent queryable index.

pub mod build;
pub mod csvutil;
pub mod ids;
pub mod ingest;
pub mod model;
pub mod oci;

pub use build::{BuildConfig, BuildReport};
pub use ingest::{AuxStore, IngestOptions, IngestReport, WorkRecord};
pub use model::{
    CitationRecord, DatePrecision, EntityAux, ModelError, PartialDate, ProvenanceRecord, Timespan,
};
pub use oci::{Oci, OciCodec, OciError};
