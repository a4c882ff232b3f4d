//! Anticipatory detection of body-focused repetitive behaviors (BFRBs) from
//! wrist-worn motion and heart-rate recordings.
//!
//! The pipeline runs in the order the modules are listed:
//!
//! 1. [`ingest`] parses recordings, behavior labels and stage marks into
//!    validated [`ingest::SessionBundle`]s.
//! 2. [`preprocess`] z-scores every channel against the first resting
//!    baseline and reconstructs pseudo RR intervals from heart rate.
//! 3. [`windowing`] cuts `Ax/By` anticipatory windows: positives anchored at
//!    behavior onsets, negatives sampled from behavior-free stretches.
//! 4. [`features`] turns each x-window into descriptive statistics (plus
//!    RMSSD statistics for 5-minute windows).
//! 5. [`models`] trains logistic regression, random forests and gradient
//!    boosted trees.
//! 6. [`evaluation`] plans folds, scores models and aggregates reports.

pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod models;
pub mod preprocess;
pub mod synth;
pub mod windowing;

pub(crate) mod util;

pub use ingest::{Behavior, Channel, Hand, SessionBundle, Stage};
pub use windowing::{LabelSet, WindowSpec};
