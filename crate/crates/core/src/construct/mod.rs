//! Plateau constructions: stage parameters, staged functions, iterated
//! builds and their certificates.

pub mod build;
pub mod certify;
pub mod exceptional;
pub mod io;
pub mod params;
pub mod staged;

pub use params::{choose_stage_params, StageParams};
pub use staged::{CertifiedFunction, Plateau, StageLayer, StagedFunction};
pub use build::{build_stage, iterate_typical, BuildOptions, GridPolicy, StageRecord, TypicalBuild};
pub use certify::{
    certify_lip_bound, certify_lip_sample, certify_membership, coverage_profile, LipCertificate, LipSample,
    MembershipCertificate,
};
pub use exceptional::{exceptional_set, ExceptionalAnalysis, ExceptionalSet};
pub use io::{load_build, save_build, write_atomic, BuildMeta};
