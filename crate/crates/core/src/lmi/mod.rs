//! Linear matrix inequality assembly, solution and design recovery.

pub mod expr;
pub mod vars;
pub mod blocks;
pub mod solver;
pub mod theorems;
pub mod recover;
