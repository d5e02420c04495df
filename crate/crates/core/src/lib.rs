pub mod cli;
pub mod crack_solver;
pub mod dislocation;
pub mod energy;
pub mod greens;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod linsolve;
pub mod primal;
pub mod verify;
