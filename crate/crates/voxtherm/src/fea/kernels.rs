//! Reference-element matrices for the 8-node hexahedron on a regular grid.
//!
//! Because every voxel is the same axis-aligned box, a single set of element
//! matrices (structural stiffness, conduction, thermal coupling) serves the
//! whole mesh. All integrals use 2x2x2 Gauss quadrature; the Jacobian is
//! diagonal with entries h/2 per axis.

use crate::grid::{GridError, MaterialModel, VoxelGrid};
use crate::real::Real;

/// Corner signs of the natural coordinates, matching the grid's hex8 order.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Dense element matrices shared by every voxel of a grid.
#[derive(Debug, Clone)]
pub struct ElementKernels<F> {
    /// 24x24 structural stiffness (N/m).
    pub ke: [[F; 24]; 24],
    /// 8x8 conduction matrix (W/degC).
    pub kte: [[F; 8]; 8],
    /// Thermal-coupling column: the element thermal load for a unit
    /// element-average temperature rise (N/degC). The full 24x8 coupling
    /// matrix repeats `hcol/8` in each of its eight columns.
    pub hcol: [F; 24],
    /// 6x6 elasticity matrix (Pa).
    pub de: [[F; 6]; 6],
    /// 6x24 strain-displacement matrix at the element centroid (1/m).
    pub b_centroid: [[F; 24]; 6],
    /// D * B_centroid, the centroid stress-displacement map (Pa/m).
    pub f_mat: [[F; 24]; 6],
    /// D * (alpha, alpha, alpha, 0, 0, 0): stress released by a unit
    /// temperature rise under full constraint (Pa/degC).
    pub dphi: [F; 6],
    /// (1/8) * alpha * D * Phi, the per-node thermal stress coupling.
    pub g_vec: [F; 6],
}

fn shape_derivatives(xi: f64, eta: f64, zeta: f64, hx: f64, hy: f64, hz: f64) -> [[f64; 8]; 3] {
    let mut dn = [[0.0; 8]; 3];
    for (a, s) in CORNER_SIGNS.iter().enumerate() {
        dn[0][a] = 0.125 * s[0] * (1.0 + s[1] * eta) * (1.0 + s[2] * zeta) * 2.0 / hx;
        dn[1][a] = 0.125 * s[1] * (1.0 + s[0] * xi) * (1.0 + s[2] * zeta) * 2.0 / hy;
        dn[2][a] = 0.125 * s[2] * (1.0 + s[0] * xi) * (1.0 + s[1] * eta) * 2.0 / hz;
    }
    dn
}

fn strain_matrix(dn: &[[f64; 8]; 3]) -> [[f64; 24]; 6] {
    let mut b = [[0.0; 24]; 6];
    for a in 0..8 {
        let (dx, dy, dz) = (dn[0][a], dn[1][a], dn[2][a]);
        b[0][3 * a] = dx;
        b[1][3 * a + 1] = dy;
        b[2][3 * a + 2] = dz;
        b[3][3 * a] = dy;
        b[3][3 * a + 1] = dx;
        b[4][3 * a] = dz;
        b[4][3 * a + 2] = dx;
        b[5][3 * a + 1] = dz;
        b[5][3 * a + 2] = dy;
    }
    b
}

fn elasticity_matrix(e: f64, nu: f64) -> [[f64; 6]; 6] {
    let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let g = 0.5 * (1.0 - 2.0 * nu);
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = if i == j { c * (1.0 - nu) } else { c * nu };
        }
        d[i + 3][i + 3] = c * g;
    }
    d
}

impl<F: Real> ElementKernels<F> {
    /// Integrate the reference-element matrices for a material and grid.
    pub fn compute(material: &MaterialModel<F>, grid: &VoxelGrid<F>) -> Result<Self, GridError> {
        material.validate()?;
        let (e, nu, alpha, cond) = (
            material.e.to_f64(),
            material.nu.to_f64(),
            material.alpha.to_f64(),
            material.k.to_f64(),
        );
        let (hx, hy, hz) = (grid.hx.to_f64(), grid.hy.to_f64(), grid.hz.to_f64());
        let d = elasticity_matrix(e, nu);
        let det_j = hx * hy * hz / 8.0;
        let gp = 1.0 / 3f64.sqrt();

        let mut ke = [[0.0f64; 24]; 24];
        let mut kte = [[0.0f64; 8]; 8];
        let mut hcol = [0.0f64; 24];
        // alpha * D * Phi
        let mut dphi = [0.0f64; 6];
        for i in 0..6 {
            dphi[i] = alpha * (d[i][0] + d[i][1] + d[i][2]);
        }

        for gx in [-gp, gp] {
            for gy in [-gp, gp] {
                for gz in [-gp, gp] {
                    let dn = shape_derivatives(gx, gy, gz, hx, hy, hz);
                    let b = strain_matrix(&dn);
                    // Ke += B^T D B * detJ
                    let mut db = [[0.0f64; 24]; 6];
                    for i in 0..6 {
                        for j in 0..24 {
                            let mut s = 0.0;
                            for r in 0..6 {
                                s += d[i][r] * b[r][j];
                            }
                            db[i][j] = s;
                        }
                    }
                    for i in 0..24 {
                        for j in 0..24 {
                            let mut s = 0.0;
                            for r in 0..6 {
                                s += b[r][i] * db[r][j];
                            }
                            ke[i][j] += s * det_j;
                        }
                    }
                    // Kte += grad(N)^T k grad(N) * detJ
                    for i in 0..8 {
                        for j in 0..8 {
                            let mut s = 0.0;
                            for r in 0..3 {
                                s += dn[r][i] * dn[r][j];
                            }
                            kte[i][j] += cond * s * det_j;
                        }
                    }
                    // hcol += B^T (alpha D Phi) * detJ
                    for i in 0..24 {
                        let mut s = 0.0;
                        for r in 0..6 {
                            s += b[r][i] * dphi[r];
                        }
                        hcol[i] += s * det_j;
                    }
                }
            }
        }

        let dn0 = shape_derivatives(0.0, 0.0, 0.0, hx, hy, hz);
        let b0 = strain_matrix(&dn0);
        let mut f_mat = [[0.0f64; 24]; 6];
        for i in 0..6 {
            for j in 0..24 {
                let mut s = 0.0;
                for r in 0..6 {
                    s += d[i][r] * b0[r][j];
                }
                f_mat[i][j] = s;
            }
        }

        let conv2 = |m: &[[f64; 24]; 6]| {
            let mut out = [[F::zero(); 24]; 6];
            for i in 0..6 {
                for j in 0..24 {
                    out[i][j] = F::of(m[i][j]);
                }
            }
            out
        };
        let mut ke_f = [[F::zero(); 24]; 24];
        for i in 0..24 {
            for j in 0..24 {
                ke_f[i][j] = F::of(ke[i][j]);
            }
        }
        let mut kte_f = [[F::zero(); 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                kte_f[i][j] = F::of(kte[i][j]);
            }
        }
        let mut hcol_f = [F::zero(); 24];
        for i in 0..24 {
            hcol_f[i] = F::of(hcol[i]);
        }
        let mut de_f = [[F::zero(); 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                de_f[i][j] = F::of(d[i][j]);
            }
        }
        let mut dphi_f = [F::zero(); 6];
        let mut g_f = [F::zero(); 6];
        for i in 0..6 {
            dphi_f[i] = F::of(dphi[i]);
            g_f[i] = F::of(dphi[i] / 8.0);
        }

        Ok(ElementKernels {
            ke: ke_f,
            kte: kte_f,
            hcol: hcol_f,
            de: de_f,
            b_centroid: conv2(&b0),
            f_mat: conv2(&f_mat),
            dphi: dphi_f,
            g_vec: g_f,
        })
    }

    /// The full 24x8 coupling matrix; each column is `hcol/8`.
    pub fn coupling_matrix(&self) -> [[F; 8]; 24] {
        let eighth = F::of(0.125);
        let mut h = [[F::zero(); 8]; 24];
        for (i, row) in h.iter_mut().enumerate() {
            for c in row.iter_mut() {
                *c = self.hcol[i] * eighth;
            }
        }
        h
    }
}

/// y = Ke x for a 24-vector.
#[inline]
pub fn ke_matvec<F: Real>(ke: &[[F; 24]; 24], x: &[F; 24]) -> [F; 24] {
    let mut y = [F::zero(); 24];
    for (yi, row) in y.iter_mut().zip(ke.iter()) {
        let mut s = F::zero();
        for (r, xj) in row.iter().zip(x.iter()) {
            s += *r * *xj;
        }
        *yi = s;
    }
    y
}

/// y = Kte x for an 8-vector.
#[inline]
pub fn kte_matvec<F: Real>(kte: &[[F; 8]; 8], x: &[F; 8]) -> [F; 8] {
    let mut y = [F::zero(); 8];
    for (yi, row) in y.iter_mut().zip(kte.iter()) {
        let mut s = F::zero();
        for (r, xj) in row.iter().zip(x.iter()) {
            s += *r * *xj;
        }
        *yi = s;
    }
    y
}
