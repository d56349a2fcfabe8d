pub mod belief;
pub mod bench;
pub mod cli;
pub mod domain;
pub mod episode;
pub mod infogain;
pub mod llmclient;
pub mod planner;
pub mod proposer;
pub mod similarity;
pub mod simulator;
