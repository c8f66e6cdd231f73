//! Ground-truth trajectories for the four ODEs and four PDEs.

mod dataset;
mod equation;
mod ode;
mod pde;

pub use dataset::{
    generate_dataset, generate_train_test, load_dataset, sample_initial, save_dataset, solve,
    split_seed, Dataset, Split, Trajectory, DATASET_MAGIC,
};
pub(crate) use dataset::{header_value, parse_field, parse_header};
pub use equation::{Boundary, Equation, EquationName, Kind};
pub use ode::{integrate_ode, ode_rhs, rk4, rk4_step};
pub use pde::solve_pde;
