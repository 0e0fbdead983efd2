//! Asymptotically optimal exploration in deterministic, history-based
//! environments: discount functions, environment classes, an exhaustive
//! planner, the exploring agent, adversarial environments and a lab for
//! measuring optimality gaps.

pub mod adversary;
pub mod agent;
pub mod discount;
pub mod env;
pub mod lab;
pub mod planner;
