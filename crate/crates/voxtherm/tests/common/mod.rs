//! Shared test utilities: brute-force assembled operators and small
//! problem builders. The dense assembly is deliberately independent of the
//! matrix-free path it is used to check.

#![allow(dead_code)]

use voxtherm::fea::{ElementKernels, OperatorKind};
use voxtherm::grid::{BoundaryConditions, DesignState, Face, MaterialModel, ThermalMode, VoxelGrid};

/// Dense global matrix assembled by scattering the element kernel over all
/// solid elements.
pub fn assemble_dense(
    grid: &VoxelGrid<f64>,
    kernels: &ElementKernels<f64>,
    design: &DesignState,
    kind: OperatorKind,
) -> Vec<Vec<f64>> {
    match kind {
        OperatorKind::Structural => {
            let n = grid.num_struct_dofs();
            let mut m = vec![vec![0.0; n]; n];
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let nodes = grid.element_nodes(e);
                for a in 0..8 {
                    for b in 0..8 {
                        for i in 0..3 {
                            for j in 0..3 {
                                let gi = 3 * nodes[a] as usize + i;
                                let gj = 3 * nodes[b] as usize + j;
                                m[gi][gj] += kernels.ke[3 * a + i][3 * b + j];
                            }
                        }
                    }
                }
            }
            m
        }
        OperatorKind::Thermal => {
            let n = grid.num_nodes();
            let mut m = vec![vec![0.0; n]; n];
            for e in 0..grid.num_elements() {
                if !design.solid[e] {
                    continue;
                }
                let nodes = grid.element_nodes(e);
                for a in 0..8 {
                    for b in 0..8 {
                        m[nodes[a] as usize][nodes[b] as usize] += kernels.kte[a][b];
                    }
                }
            }
            m
        }
    }
}

pub fn dense_matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn steel_kernels(grid: &VoxelGrid<f64>) -> ElementKernels<f64> {
    ElementKernels::compute(&MaterialModel::steel(), grid).unwrap()
}

/// Clamped bar with an end load, uniform temperature rise.
pub fn small_uniform_problem(
    res: [usize; 3],
    dt: f64,
) -> (
    VoxelGrid<f64>,
    ElementKernels<f64>,
    DesignState,
    BoundaryConditions<f64>,
) {
    let dims = [
        0.1 * res[0] as f64,
        0.1 * res[1] as f64,
        0.1 * res[2] as f64,
    ];
    let grid = VoxelGrid::build(dims, res).unwrap();
    let kernels = steel_kernels(&grid);
    let mut bc = BoundaryConditions::empty();
    bc.fix_face(&grid, Face::XMin);
    bc.point_loads.push((
        grid.node_index(res[0], res[1], res[2]),
        [1.0e4, -8.0e4, 2.0e4],
    ));
    bc.thermal = ThermalMode::UniformDelta(dt);
    let design = DesignState::all_solid_protected(&grid, &bc);
    (grid, kernels, design, bc)
}

/// Same bar with a left/right Dirichlet temperature gradient.
pub fn small_dirichlet_problem(
    res: [usize; 3],
    dt_right: f64,
) -> (
    VoxelGrid<f64>,
    ElementKernels<f64>,
    DesignState,
    BoundaryConditions<f64>,
) {
    let (grid, kernels, design, mut bc) = small_uniform_problem(res, 0.0);
    let mut prescribed = Vec::new();
    for n in grid.face_nodes(Face::XMin) {
        prescribed.push((n, 0.0));
    }
    for n in grid.face_nodes(Face::XMax) {
        prescribed.push((n, dt_right));
    }
    prescribed.sort_by_key(|&(n, _)| n);
    prescribed.dedup_by_key(|&mut (n, _)| n);
    bc.thermal = ThermalMode::Dirichlet {
        prescribed,
        flux: vec![],
    };
    let design2 = DesignState::all_solid_protected(&grid, &bc);
    let _ = design;
    (grid, kernels, design2, bc)
}

/// Deterministic pseudo-random vector in [-1, 1).
pub fn pseudo_random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.max(1);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}
