//! Core domain types: impression logs, scores, segments, bucketizations,
//! and label sources, plus file ingestion for each.

pub mod aggregate;
pub mod buckets;
pub mod ingest;
pub mod labels;
pub mod records;
pub mod segment;

pub use buckets::{BucketScheme, Bucketization};
pub use ingest::{ingest_labels, ingest_logs, ingest_scores, LogIngest};
pub use labels::{LabelSource, LabelTable};
pub use records::{Day, ImpressionRecord, ScoreRecord, ScoreTable};
pub use segment::Segment;
