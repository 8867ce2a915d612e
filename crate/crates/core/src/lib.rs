//! CTC training graphs with blank regularization.
//!
//! The crate builds CTC topologies (standard, soft self-loop penalty, hard
//! repeat bound), composes them with transcripts into training graphs,
//! intersects those with dense per-frame scores, and runs forward-backward
//! over the resulting lattices to get exact losses and gradients. On top of
//! that sit blank-frame skipping metrics and a small synthetic training
//! harness that measures how each topology shifts frames towards blank.

pub mod error;
pub mod format;
pub mod fst;
pub mod grid;
pub mod lattice;
pub mod loss;
pub mod skip;
pub mod topology;
pub mod toy;
pub mod weight;

pub use error::{Error, Result};
pub use fst::{compose, connect, Arc, Fst};
pub use grid::{DenseGrid, Matrix};
pub use lattice::{
    arc_posteriors, backward_scores, best_path, forward_scores, intersect_dense, total_score,
    Lattice,
};
pub use loss::{
    brute_force_loss, ctc_loss, ctc_loss_alpha, ctc_loss_from_logits, grad_check, greedy_decode,
    log_softmax, LossResult,
};
pub use skip::{apply_skip, classify_blank_frames, gamma_max, sweep_thresholds, SkipMask};
pub use topology::{
    build_linear_graph, build_topology, build_training_graph, collapse_ctc, collapse_transducer,
    enumerate_alignments, LabelSequence, TopologyVariant,
};
pub use weight::{LogWeight, Semiring};
