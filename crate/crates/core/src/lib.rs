//! Recommend OpenAPI 2.0 endpoint specifications from a developer's draft.
//!
//! The engine indexes a corpus of Swagger 2.0 documents into unique endpoint
//! records and ranks them against a (possibly incomplete) endpoint draft by
//! fusing four signals in a log-linear model:
//!
//! - **tree** similarity over hierarchical variable-name tokens
//!   (`parameters_songid`, `get_responses_200_artist_artistname`), weighted by
//!   TF-IDF or compared through a PPMI co-occurrence kernel;
//! - **text** similarity over operation summaries and descriptions;
//! - **fuzzy** similarity of endpoint names (normalized Levenshtein);
//! - a query-independent **quality** prior graded from the document's
//!   adherence to the Swagger best-practice key table.
//!
//! The pipeline is
//!
//! ```text
//! ingest -> quality -> featurize -> vectorize (-> enrich) -> index -> rank
//! ```
//!
//! and [`eval`] reproduces the masked/mangled retrieval benchmarks on top of it.
//!
//! ```
//! use oasrank::rank::fuzzy_name_score;
//!
//! let s = fuzzy_name_score("kitten", "sitting");
//! assert!((s - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
//! ```

pub mod draft;
pub mod enrich;
pub mod eval;
pub mod featurize;
pub mod index;
pub mod ingest;
pub mod quality;
pub mod rank;
pub mod text;
pub mod vectorize;

pub use draft::{parse_draft, QueryDraft};
pub use index::{build_index, load_index, save_index, BuildConfig, CorpusIndex};
pub use ingest::{EndpointRecord, SpecDocument};
pub use rank::{rank_endpoints, FusionConfig, RankedResult};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/tokens.md")]
    mod tokens {}
    #[doc = include_str!("../../../book/src/vectors.md")]
    mod vectors {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/enrichment.md")]
    mod enrichment {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/index-format.md")]
    mod index_format {}
}
