//! BPMN collaborations to CSP# to Solidity, with soundness checking.

pub mod codegen;
pub mod corpus;
pub mod csp;
pub mod model;
pub mod relations;
pub mod translate;
pub mod verify;

pub use translate::{translate_collaboration, translate_with, TranslateError, TranslateOptions};
