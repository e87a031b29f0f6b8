//! Desk-scale optimization stack: a bounded-variable simplex with branch
//! and bound, fixed-format MPS exchange, and the joint power/natural-gas
//! generation expansion model with spatio-temporal instance aggregation
//! and the three-step upper-bound heuristic.

pub mod branch_bound;
pub mod gep;
pub mod lu;
pub mod milp;
pub mod mps;
pub mod presolve;
pub mod simplex;
pub mod ub;
