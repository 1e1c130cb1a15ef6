//! Design domain: regular hexahedral voxelization, material data, boundary
//! conditions and the solid/void design indicator.
//!
//! All index bookkeeping between elements, nodes and degrees of freedom lives
//! here. Nodes are numbered x-fastest: node (i, j, k) has flat index
//! `i + (nx+1)*(j + (ny+1)*k)`; elements likewise with nx, ny. Each node
//! carries three structural DOFs (`3*node + axis`) and one thermal DOF.

use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid dimension must be positive, got {0}")]
    NonPositiveDimension(f64),
    #[error("resolution must be at least 1 element per axis, got {0}")]
    ZeroResolution(usize),
    #[error("no fixed DOFs declared; a structural solve would be singular")]
    NoFixtures,
    #[error("no loads declared; nothing to solve for")]
    NoLoads,
    #[error("dirichlet thermal mode requires at least one prescribed node")]
    NoDirichletNodes,
    #[error("material invalid: {0}")]
    BadMaterial(String),
}

/// Regular axis-aligned hexahedral voxel grid.
#[derive(Debug, Clone)]
pub struct VoxelGrid<F> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub hx: F,
    pub hy: F,
    pub hz: F,
    pub origin: [F; 3],
    /// Node indices of every element, standard hex8 corner order.
    elem_nodes: Vec<[u32; 8]>,
    /// For every node, the (element, local corner) pairs touching it.
    node_elems: Vec<Vec<(u32, u8)>>,
}

impl<F: Real> VoxelGrid<F> {
    /// Build a grid from physical dimensions and per-axis element counts.
    pub fn build(dims: [F; 3], resolution: [usize; 3]) -> Result<Self, GridError> {
        Self::build_at([F::zero(); 3], dims, resolution)
    }

    pub fn build_at(
        origin: [F; 3],
        dims: [F; 3],
        resolution: [usize; 3],
    ) -> Result<Self, GridError> {
        for &d in &dims {
            if !(d > F::zero()) {
                return Err(GridError::NonPositiveDimension(d.to_f64()));
            }
        }
        for &r in &resolution {
            if r == 0 {
                return Err(GridError::ZeroResolution(r));
            }
        }
        let [nx, ny, nz] = resolution;
        let hx = dims[0] / F::of(nx as f64);
        let hy = dims[1] / F::of(ny as f64);
        let hz = dims[2] / F::of(nz as f64);

        let mut grid = VoxelGrid {
            nx,
            ny,
            nz,
            hx,
            hy,
            hz,
            origin,
            elem_nodes: Vec::with_capacity(nx * ny * nz),
            node_elems: vec![Vec::new(); (nx + 1) * (ny + 1) * (nz + 1)],
        };
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let n = |di: usize, dj: usize, dk: usize| {
                        grid.node_index(i + di, j + dj, k + dk) as u32
                    };
                    // hex8 corner order: bottom face CCW, then top face.
                    let nodes = [
                        n(0, 0, 0),
                        n(1, 0, 0),
                        n(1, 1, 0),
                        n(0, 1, 0),
                        n(0, 0, 1),
                        n(1, 0, 1),
                        n(1, 1, 1),
                        n(0, 1, 1),
                    ];
                    grid.elem_nodes.push(nodes);
                }
            }
        }
        for (e, nodes) in grid.elem_nodes.iter().enumerate() {
            for (corner, &n) in nodes.iter().enumerate() {
                grid.node_elems[n as usize].push((e as u32, corner as u8));
            }
        }
        Ok(grid)
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    #[inline]
    pub fn num_struct_dofs(&self) -> usize {
        3 * self.num_nodes()
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny && k <= self.nz);
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    #[inline]
    pub fn elem_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny && k < self.nz);
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn elem_coords(&self, e: usize) -> (usize, usize, usize) {
        let i = e % self.nx;
        let j = (e / self.nx) % self.ny;
        let k = e / (self.nx * self.ny);
        (i, j, k)
    }

    #[inline]
    pub fn node_coords(&self, n: usize) -> (usize, usize, usize) {
        let i = n % (self.nx + 1);
        let j = (n / (self.nx + 1)) % (self.ny + 1);
        let k = n / ((self.nx + 1) * (self.ny + 1));
        (i, j, k)
    }

    /// Physical position of a node.
    pub fn node_position(&self, n: usize) -> [F; 3] {
        let (i, j, k) = self.node_coords(n);
        [
            self.origin[0] + self.hx * F::of(i as f64),
            self.origin[1] + self.hy * F::of(j as f64),
            self.origin[2] + self.hz * F::of(k as f64),
        ]
    }

    #[inline]
    pub fn element_nodes(&self, e: usize) -> &[u32; 8] {
        &self.elem_nodes[e]
    }

    #[inline]
    pub fn node_elements(&self, n: usize) -> &[(u32, u8)] {
        &self.node_elems[n]
    }

    pub fn element_volume(&self) -> F {
        self.hx * self.hy * self.hz
    }

    /// Face-adjacent element neighbors (up to 6).
    pub fn elem_face_neighbors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j, k) = self.elem_coords(e);
        let deltas = [
            (-1isize, 0isize, 0isize),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ];
        deltas.into_iter().filter_map(move |(di, dj, dk)| {
            let ni = i as isize + di;
            let nj = j as isize + dj;
            let nk = k as isize + dk;
            if ni >= 0
                && nj >= 0
                && nk >= 0
                && (ni as usize) < self.nx
                && (nj as usize) < self.ny
                && (nk as usize) < self.nz
            {
                Some(self.elem_index(ni as usize, nj as usize, nk as usize))
            } else {
                None
            }
        })
    }

    /// All node indices lying on one of the six domain faces.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 0..=self.nz {
            for j in 0..=self.ny {
                for i in 0..=self.nx {
                    let on = match face {
                        Face::XMin => i == 0,
                        Face::XMax => i == self.nx,
                        Face::YMin => j == 0,
                        Face::YMax => j == self.ny,
                        Face::ZMin => k == 0,
                        Face::ZMax => k == self.nz,
                    };
                    if on {
                        out.push(self.node_index(i, j, k));
                    }
                }
            }
        }
        out
    }

    /// Elements owning a boundary face on the given domain face.
    pub fn face_elements(&self, face: Face) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 0..self.nz {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let on = match face {
                        Face::XMin => i == 0,
                        Face::XMax => i == self.nx - 1,
                        Face::YMin => j == 0,
                        Face::YMax => j == self.ny - 1,
                        Face::ZMin => k == 0,
                        Face::ZMax => k == self.nz - 1,
                    };
                    if on {
                        out.push(self.elem_index(i, j, k));
                    }
                }
            }
        }
        out
    }

    /// Node nearest to a physical position.
    pub fn nearest_node(&self, pos: [F; 3]) -> usize {
        let clampi = |x: F, h: F, n: usize| -> usize {
            let t = ((x / h).to_f64()).round();
            (t.max(0.0) as usize).min(n)
        };
        let i = clampi(pos[0] - self.origin[0], self.hx, self.nx);
        let j = clampi(pos[1] - self.origin[1], self.hy, self.ny);
        let k = clampi(pos[2] - self.origin[2], self.hz, self.nz);
        self.node_index(i, j, k)
    }
}

/// One of the six axis-aligned domain faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMin,
        Face::XMax,
        Face::YMin,
        Face::YMax,
        Face::ZMin,
        Face::ZMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Face::XMin => "xmin",
            Face::XMax => "xmax",
            Face::YMin => "ymin",
            Face::YMax => "ymax",
            Face::ZMin => "zmin",
            Face::ZMax => "zmax",
        }
    }

    pub fn parse(s: &str) -> Option<Face> {
        Face::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Isotropic linear thermo-elastic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel<F> {
    /// Elastic modulus (Pa).
    pub e: F,
    /// Poisson ratio.
    pub nu: F,
    /// Thermal expansion coefficient (1/degC). Zero disables coupling.
    pub alpha: F,
    /// Thermal conductivity (W/m/degC).
    pub k: F,
    /// Reference temperature (degC).
    pub t0: F,
}

impl<F: Real> MaterialModel<F> {
    /// Steel defaults: E = 2e11 Pa, nu = 0.3, alpha = 1.2e-5 /degC,
    /// k = 1 W/m/degC, reference 23 degC.
    pub fn steel() -> Self {
        MaterialModel {
            e: F::of(2e11),
            nu: F::of(0.3),
            alpha: F::of(1.2e-5),
            k: F::one(),
            t0: F::of(23.0),
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.e > F::zero()) {
            return Err(GridError::BadMaterial("elastic modulus must be > 0".into()));
        }
        if !(self.nu > F::of(-1.0) && self.nu < F::of(0.5)) {
            return Err(GridError::BadMaterial(
                "poisson ratio must lie in (-1, 0.5)".into(),
            ));
        }
        if !(self.k > F::zero()) {
            return Err(GridError::BadMaterial("conductivity must be > 0".into()));
        }
        if !self.alpha.is_finite() {
            return Err(GridError::BadMaterial("expansion coefficient must be finite".into()));
        }
        Ok(())
    }
}

/// Thermal boundary data.
#[derive(Debug, Clone)]
pub enum ThermalMode<F> {
    /// Spatially uniform temperature rise above reference; no thermal solve.
    UniformDelta(F),
    /// Prescribed temperature rises at nodes, optional nodal heat fluxes (W).
    Dirichlet {
        /// (node, temperature rise above reference in degC)
        prescribed: Vec<(usize, F)>,
        /// (node, flux in W)
        flux: Vec<(usize, F)>,
    },
}

/// Fixtures and loads.
#[derive(Debug, Clone)]
pub struct BoundaryConditions<F> {
    /// Structural DOF indices clamped to zero.
    pub fixed_dofs: Vec<usize>,
    /// (node, force vector in N)
    pub point_loads: Vec<(usize, [F; 3])>,
    /// (face, pressure in Pa, unit direction)
    pub face_pressures: Vec<(Face, F, [F; 3])>,
    pub thermal: ThermalMode<F>,
}

impl<F: Real> BoundaryConditions<F> {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.fixed_dofs.is_empty() {
            return Err(GridError::NoFixtures);
        }
        if self.point_loads.is_empty() && self.face_pressures.is_empty() {
            return Err(GridError::NoLoads);
        }
        if let ThermalMode::Dirichlet { prescribed, .. } = &self.thermal {
            if prescribed.is_empty() {
                return Err(GridError::NoDirichletNodes);
            }
        }
        Ok(())
    }

    /// Fix all three DOFs of every node on a face.
    pub fn fix_face(&mut self, grid: &VoxelGrid<F>, face: Face) {
        for n in grid.face_nodes(face) {
            for axis in 0..3 {
                self.fixed_dofs.push(3 * n + axis);
            }
        }
        self.fixed_dofs.sort_unstable();
        self.fixed_dofs.dedup();
    }

    pub fn empty() -> Self {
        BoundaryConditions {
            fixed_dofs: Vec::new(),
            point_loads: Vec::new(),
            face_pressures: Vec::new(),
            thermal: ThermalMode::UniformDelta(F::zero()),
        }
    }
}

/// Per-element solid/void indicator defining the current topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignState {
    pub solid: Vec<bool>,
    /// Elements that must stay solid (they carry loads, fixtures or
    /// prescribed temperatures).
    pub protected: Vec<bool>,
}

impl DesignState {
    /// All-solid design with protection flags derived from the boundary
    /// conditions: every element touching a loaded, fixed or
    /// temperature-prescribed node is pinned solid.
    pub fn all_solid_protected<F: Real>(
        grid: &VoxelGrid<F>,
        bc: &BoundaryConditions<F>,
    ) -> DesignState {
        let n = grid.num_elements();
        let mut protected = vec![false; n];
        let protect_node = |node: usize, protected: &mut Vec<bool>| {
            for &(e, _) in grid.node_elements(node) {
                protected[e as usize] = true;
            }
        };
        for &dof in &bc.fixed_dofs {
            protect_node(dof / 3, &mut protected);
        }
        for &(node, _) in &bc.point_loads {
            protect_node(node, &mut protected);
        }
        for &(face, _, _) in &bc.face_pressures {
            for e in grid.face_elements(face) {
                protected[e] = true;
            }
        }
        if let ThermalMode::Dirichlet { prescribed, flux } = &bc.thermal {
            for &(node, _) in prescribed {
                protect_node(node, &mut protected);
            }
            for &(node, _) in flux {
                protect_node(node, &mut protected);
            }
        }
        DesignState {
            solid: vec![true; n],
            protected,
        }
    }

    #[inline]
    pub fn num_solid(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    /// Solid-element count over total element count, recomputed on demand.
    pub fn volume_fraction(&self) -> f64 {
        self.num_solid() as f64 / self.solid.len() as f64
    }

    pub fn num_protected(&self) -> usize {
        self.protected.iter().filter(|&&p| p).count()
    }
}
