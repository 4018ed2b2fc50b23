pub mod dataio;
pub mod error;
pub mod fairness;
pub mod milp;
pub mod solver;
pub mod scoring;
pub mod diagrams;
pub mod oracle;
pub mod explorer;
pub mod cli;
pub mod synth;
