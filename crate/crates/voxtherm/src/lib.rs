//! Volume minimization of thermo-elastic structures on voxel grids, subject
//! to compliance and p-norm von Mises stress constraints.
//!
//! The optimizer traces a sequence of topologies of decreasing volume
//! fraction by thresholding an augmented per-element sensitivity field.
//! Sensitivities come from adjoint solves of the weakly-coupled
//! thermo-elastic problem; constraints are handled with an augmented
//! Lagrangian whose multipliers weight the per-constraint fields.
//!
//! The numerical core is generic over the scalar type (f32 or f64) through
//! the [`real::Real`] trait; the aliases below fix f64 for everyday use.

pub mod auglag;
pub mod driver;
pub mod fea;
pub mod grid;
pub mod oracle;
pub mod pareto;
pub mod problem;
pub mod qoi;
pub mod real;
pub mod sensitivity;
pub mod vtk;

/// f64 grid.
pub type Grid = grid::VoxelGrid<f64>;
/// f64 material.
pub type Material = grid::MaterialModel<f64>;
/// f64 boundary conditions.
pub type Conditions = grid::BoundaryConditions<f64>;
/// f64 element kernels.
pub type Kernels = fea::ElementKernels<f64>;
/// f64 solved fields.
pub type SolvedFields = fea::Fields<f64>;
/// f64 problem definition.
pub type Problem = problem::ProblemDefinition<f64>;
/// f64 optimizer configuration.
pub type Config = driver::OptimizerConfig<f64>;
