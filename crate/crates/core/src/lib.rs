pub mod inspector;
pub mod java;
pub mod llm;
pub mod model;
pub mod orchestrator;
pub mod prompt;
pub mod runner;
pub mod stitcher;
pub mod validator;
