//! Memory-driven task-planning navigation: a simulated indoor world, a
//! semantic memory, an affordance planner with feedback-driven correction,
//! a decision layer and an episode orchestrator with benchmarking.

pub mod bench;
pub mod corrector;
pub mod decision;
pub mod geometry;
pub mod masmap;
pub mod orchestrator;
pub mod planner;
pub mod render;
pub mod scene;
