//! Grounding-first HTN planning toolkit: parse lifted domains, instantiate
//! and simplify them into propositional ground problems, and solve them with
//! a deterministic ordered decomposition search.

pub mod bench;
pub mod gen;
pub mod ground;
pub mod model;
pub mod normalize;
pub mod parser;
pub mod planner;
pub mod score;
pub mod serialize;
pub mod sexpr;
pub mod state;
pub mod validate;

pub use model::{Domain, Problem};
pub use parser::{parse_domain, parse_problem, print_domain, print_problem, ParseError};
pub use state::{GroundProblem, Plan};
