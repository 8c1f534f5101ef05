//! Sentiment-aware analysis of social media conversations.
//!
//! The pipeline runs from raw message corpora to alignment groups:
//! lexicon scoring ([`lexicon`]), signed mention and follower graphs
//! ([`graph`]), per-user aggregates ([`aggregate`]), randomisation tests
//! ([`null_models`]), community detection and partition intersection
//! ([`community`]), k-means over sub-community sentiment profiles
//! ([`cluster`]) and cluster reports ([`report`]). [`synth`] generates
//! corpora with planted structure.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`.

pub mod aggregate;
pub mod cluster;
pub mod community;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod lexicon;
pub mod null_models;
pub mod numeric;
pub mod report;
pub mod rng;
mod serde_pairs;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use numeric::Scalar;

pub use corpus::{Corpus, FollowerEdgeList, Message, MessageKind};
pub use graph::{DirectedGraph, FollowerGraph, InteractionGraph, NodeSet};
pub use lexicon::{Lexicon, SentimentScore};

pub type Summary = stats::Summary<f64>;
pub type WeightedGraph = community::WeightedGraph<f64>;
pub type Detection = community::Detection<f64>;
pub type KMeansResult = cluster::KMeansResult<f64>;
pub type ElbowSelection = cluster::ElbowSelection<f64>;
