//! Finite set representations, box counting, covers and microscopic
//! certificates.

pub mod counting;
pub mod cover;
pub mod cubes;
pub mod intervals;
pub mod io;
pub mod micro;
pub mod scale;

pub use cubes::DyadicCubeSet;
pub use intervals::IntervalSet;
pub use scale::{Scale, ScaleGrid, Q};
pub use counting::{lower_box_dim, lower_box_premeasure, n_delta, product_lemma_check, BoxCount, CountMode};
pub use cover::{hausdorff_upper, BoxCover, CoverBox, CoverRecord, SetRepr};
pub use micro::{micro_from_hzeta, microscopic_certificate, microscopic_verify, MicroOutcome, MicroVerdict};
