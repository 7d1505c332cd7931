//! System prompts, shipped as fixture files.

pub const REFINEMENT: &str = include_str!("../../fixtures/prompts/refinement.txt");
pub const EXTRACTION: &str = include_str!("../../fixtures/prompts/extraction.txt");
pub const DENSIFICATION: &str = include_str!("../../fixtures/prompts/densification.txt");
pub const EXPLORATION: &str = include_str!("../../fixtures/prompts/exploration.txt");
pub const SYNTHESIS: &str = include_str!("../../fixtures/prompts/synthesis.txt");
