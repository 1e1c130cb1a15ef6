//! Legacy ASCII VTK export of a design and its fields.
//!
//! The voxel grid maps onto a STRUCTURED_POINTS dataset (VTK orders both
//! points and cells x-fastest, matching the grid's numbering). Cell data:
//! the solid indicator and the von Mises stress (zero on void cells by
//! convention). Point data: the displacement vector and the absolute
//! temperature. Numbers are written with nine significant digits so
//! repeated exports are byte-identical; the file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::fea::Fields;
use crate::grid::{DesignState, VoxelGrid};
use crate::qoi::von_mises;
use crate::real::Real;
use crate::sensitivity::SensitivityField;

/// Fixed-width scientific formatting with 9 significant digits.
fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000e+00".to_string();
    }
    let s = format!("{:.8e}", x);
    // pad the exponent to a sign and at least two digits
    let (mant, exp) = s.split_once('e').expect("exponential form");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mant}e{sign}{digits:0>2}")
}

fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension("vtk.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Export design indicator, von Mises stress, displacement and temperature.
pub fn export_vtk<F: Real>(
    grid: &VoxelGrid<F>,
    design: &DesignState,
    fields: &Fields<F>,
    t0: F,
    path: &Path,
) -> io::Result<()> {
    let n_cells = grid.num_elements();
    let n_points = grid.num_nodes();
    let mut out = String::with_capacity(64 * (n_cells + n_points));
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("voxtherm fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    out.push_str(&format!(
        "DIMENSIONS {} {} {}\n",
        grid.nx + 1,
        grid.ny + 1,
        grid.nz + 1
    ));
    out.push_str(&format!(
        "ORIGIN {} {} {}\n",
        fmt9(grid.origin[0].to_f64()),
        fmt9(grid.origin[1].to_f64()),
        fmt9(grid.origin[2].to_f64())
    ));
    out.push_str(&format!(
        "SPACING {} {} {}\n",
        fmt9(grid.hx.to_f64()),
        fmt9(grid.hy.to_f64()),
        fmt9(grid.hz.to_f64())
    ));

    out.push_str(&format!("CELL_DATA {n_cells}\n"));
    out.push_str("SCALARS solid int 1\nLOOKUP_TABLE default\n");
    for e in 0..n_cells {
        out.push_str(if design.solid[e] { "1\n" } else { "0\n" });
    }
    out.push_str("SCALARS von_mises double 1\nLOOKUP_TABLE default\n");
    for e in 0..n_cells {
        let vm = if design.solid[e] {
            von_mises(&fields.stress[e]).to_f64()
        } else {
            0.0
        };
        out.push_str(&fmt9(vm));
        out.push('\n');
    }

    out.push_str(&format!("POINT_DATA {n_points}\n"));
    out.push_str("VECTORS displacement double\n");
    for p in 0..n_points {
        out.push_str(&format!(
            "{} {} {}\n",
            fmt9(fields.d[3 * p].to_f64()),
            fmt9(fields.d[3 * p + 1].to_f64()),
            fmt9(fields.d[3 * p + 2].to_f64())
        ));
    }
    out.push_str("SCALARS temperature double 1\nLOOKUP_TABLE default\n");
    for p in 0..n_points {
        out.push_str(&fmt9((t0 + fields.theta[p]).to_f64()));
        out.push('\n');
    }

    write_atomic(path, &out)
}

/// Debug export of a sensitivity field as cell data.
pub fn export_sensitivity_vtk<F: Real>(
    grid: &VoxelGrid<F>,
    design: &DesignState,
    field: &SensitivityField<F>,
    path: &Path,
) -> io::Result<()> {
    let n_cells = grid.num_elements();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("voxtherm sensitivity\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    out.push_str(&format!(
        "DIMENSIONS {} {} {}\n",
        grid.nx + 1,
        grid.ny + 1,
        grid.nz + 1
    ));
    out.push_str(&format!(
        "ORIGIN {} {} {}\n",
        fmt9(grid.origin[0].to_f64()),
        fmt9(grid.origin[1].to_f64()),
        fmt9(grid.origin[2].to_f64())
    ));
    out.push_str(&format!(
        "SPACING {} {} {}\n",
        fmt9(grid.hx.to_f64()),
        fmt9(grid.hy.to_f64()),
        fmt9(grid.hz.to_f64())
    ));
    out.push_str(&format!("CELL_DATA {n_cells}\n"));
    out.push_str("SCALARS solid int 1\nLOOKUP_TABLE default\n");
    for e in 0..n_cells {
        out.push_str(if design.solid[e] { "1\n" } else { "0\n" });
    }
    out.push_str("SCALARS sensitivity double 1\nLOOKUP_TABLE default\n");
    for e in 0..n_cells {
        out.push_str(&fmt9(field.values[e].to_f64()));
        out.push('\n');
    }
    write_atomic(path, &out)
}
