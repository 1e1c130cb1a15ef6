//! Problem-definition text format, validation, and the built-in benchmark
//! generators.
//!
//! The format is line-oriented: `key = value` pairs, `#` starts a comment,
//! blank lines are ignored. Repeatable keys (fix_face, fix_node, point_load,
//! pressure, dirichlet_face, dirichlet_node, flux, constraint) accumulate.
//! The grammar is documented in the repository README; `serialize` emits a
//! canonical form that parses back to an identical definition.

use crate::driver::{ConstraintSpecification, OptimizerConfig};
use crate::grid::{BoundaryConditions, Face, GridError, MaterialModel, ThermalMode, VoxelGrid};
use crate::qoi::QoIKind;
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key(s): {0}")]
    MissingKeys(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("unknown benchmark preset '{0}' (expected clamped-beam-point or clamped-beam-distributed)")]
    UnknownPreset(String),
}

fn perr(line: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Parse {
        line,
        message: message.into(),
    }
}

/// Thermal boundary specification as written in a problem file.
#[derive(Debug, Clone, PartialEq)]
pub enum ThermalSpec<F> {
    /// Uniform temperature rise (degC above reference).
    Uniform(F),
    /// Prescribed rises on faces/nodes plus optional nodal fluxes.
    Dirichlet {
        faces: Vec<(Face, F)>,
        nodes: Vec<([usize; 3], F)>,
        flux: Vec<([usize; 3], F)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Compliance,
    Stress,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLine<F> {
    pub kind: ConstraintKind,
    pub factor: F,
    /// Stress exponent; stored only for stress constraints.
    pub p: Option<F>,
}

/// Everything a run needs, as parsed from text.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefinition<F> {
    pub dims: [F; 3],
    pub resolution: [usize; 3],
    pub material: MaterialModel<F>,
    pub fixed_faces: Vec<Face>,
    pub fixed_nodes: Vec<[usize; 3]>,
    /// (node grid coords, force vector)
    pub point_loads: Vec<([usize; 3], [F; 3])>,
    pub pressures: Vec<(Face, F, [F; 3])>,
    pub thermal: ThermalSpec<F>,
    pub constraints: Vec<ConstraintLine<F>>,
    pub config: OptimizerConfig<F>,
}

fn parse_scalar<F: Real>(tok: &str, line: usize) -> Result<F, ProblemError> {
    tok.parse::<f64>()
        .map(F::of)
        .map_err(|_| perr(line, format!("expected a number, got '{tok}'")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, ProblemError> {
    tok.parse::<usize>()
        .map_err(|_| perr(line, format!("expected a nonnegative integer, got '{tok}'")))
}

fn parse_face(tok: &str, line: usize) -> Result<Face, ProblemError> {
    Face::parse(tok).ok_or_else(|| {
        perr(
            line,
            format!("expected a face (xmin|xmax|ymin|ymax|zmin|zmax), got '{tok}'"),
        )
    })
}

fn expect_tokens<'a>(
    value: &'a str,
    n: usize,
    line: usize,
    what: &str,
) -> Result<Vec<&'a str>, ProblemError> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    if toks.len() != n {
        return Err(perr(
            line,
            format!("{what} expects {n} value(s), got {}", toks.len()),
        ));
    }
    Ok(toks)
}

impl<F: Real> ProblemDefinition<F> {
    /// Parse a problem definition, reporting the first error with its line
    /// number. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        let mut dims: Option<[F; 3]> = None;
        let mut resolution: Option<[usize; 3]> = None;
        let mut material = MaterialModel::<F>::steel();
        let mut fixed_faces = Vec::new();
        let mut fixed_nodes = Vec::new();
        let mut point_loads = Vec::new();
        let mut pressures = Vec::new();
        let mut thermal_kind: Option<&str> = None;
        let mut uniform_dt = F::zero();
        let mut dirichlet_faces = Vec::new();
        let mut dirichlet_nodes = Vec::new();
        let mut flux = Vec::new();
        let mut constraints = Vec::new();
        let mut config = OptimizerConfig::<F>::default();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, val) = content
                .split_once('=')
                .ok_or_else(|| perr(line, "expected 'key = value'"))?;
            let key = key.trim();
            let val = val.trim();
            match key {
                "domain" => {
                    let t = expect_tokens(val, 3, line, "domain")?;
                    let mut d = [F::zero(); 3];
                    for (i, tok) in t.iter().enumerate() {
                        d[i] = parse_scalar(tok, line)?;
                        if !(d[i] > F::zero()) {
                            return Err(perr(line, "domain dimensions must be positive"));
                        }
                    }
                    dims = Some(d);
                }
                "resolution" => {
                    let t = expect_tokens(val, 3, line, "resolution")?;
                    let mut r = [0usize; 3];
                    for (i, tok) in t.iter().enumerate() {
                        r[i] = parse_usize(tok, line)?;
                        if r[i] == 0 {
                            return Err(perr(line, "resolution must be at least 1 per axis"));
                        }
                    }
                    resolution = Some(r);
                }
                "e" => {
                    material.e = parse_scalar(val, line)?;
                    if !(material.e > F::zero()) {
                        return Err(perr(line, "elastic modulus must be > 0"));
                    }
                }
                "nu" => {
                    material.nu = parse_scalar(val, line)?;
                    if !(material.nu > F::of(-1.0) && material.nu < F::of(0.5)) {
                        return Err(perr(line, "poisson ratio must lie in (-1, 0.5)"));
                    }
                }
                "alpha" => material.alpha = parse_scalar(val, line)?,
                "k" => {
                    material.k = parse_scalar(val, line)?;
                    if !(material.k > F::zero()) {
                        return Err(perr(line, "conductivity must be > 0"));
                    }
                }
                "t0" => material.t0 = parse_scalar(val, line)?,
                "fix_face" => fixed_faces.push(parse_face(val, line)?),
                "fix_node" => {
                    let t = expect_tokens(val, 3, line, "fix_node")?;
                    fixed_nodes.push([
                        parse_usize(t[0], line)?,
                        parse_usize(t[1], line)?,
                        parse_usize(t[2], line)?,
                    ]);
                }
                "point_load" => {
                    let t = expect_tokens(val, 6, line, "point_load")?;
                    point_loads.push((
                        [
                            parse_usize(t[0], line)?,
                            parse_usize(t[1], line)?,
                            parse_usize(t[2], line)?,
                        ],
                        [
                            parse_scalar(t[3], line)?,
                            parse_scalar(t[4], line)?,
                            parse_scalar(t[5], line)?,
                        ],
                    ));
                }
                "pressure" => {
                    let t = expect_tokens(val, 5, line, "pressure")?;
                    pressures.push((
                        parse_face(t[0], line)?,
                        parse_scalar(t[1], line)?,
                        [
                            parse_scalar(t[2], line)?,
                            parse_scalar(t[3], line)?,
                            parse_scalar(t[4], line)?,
                        ],
                    ));
                }
                "thermal" => {
                    let toks: Vec<&str> = val.split_whitespace().collect();
                    match toks.as_slice() {
                        ["uniform", dt] => {
                            thermal_kind = Some("uniform");
                            uniform_dt = parse_scalar(dt, line)?;
                        }
                        ["dirichlet"] => thermal_kind = Some("dirichlet"),
                        _ => {
                            return Err(perr(
                                line,
                                "thermal expects 'uniform <dt>' or 'dirichlet'",
                            ))
                        }
                    }
                }
                "dirichlet_face" => {
                    let t = expect_tokens(val, 2, line, "dirichlet_face")?;
                    dirichlet_faces.push((parse_face(t[0], line)?, parse_scalar(t[1], line)?));
                }
                "dirichlet_node" => {
                    let t = expect_tokens(val, 4, line, "dirichlet_node")?;
                    dirichlet_nodes.push((
                        [
                            parse_usize(t[0], line)?,
                            parse_usize(t[1], line)?,
                            parse_usize(t[2], line)?,
                        ],
                        parse_scalar(t[3], line)?,
                    ));
                }
                "flux" => {
                    let t = expect_tokens(val, 4, line, "flux")?;
                    flux.push((
                        [
                            parse_usize(t[0], line)?,
                            parse_usize(t[1], line)?,
                            parse_usize(t[2], line)?,
                        ],
                        parse_scalar(t[3], line)?,
                    ));
                }
                "constraint" => {
                    let toks: Vec<&str> = val.split_whitespace().collect();
                    match toks.as_slice() {
                        ["compliance", f] => constraints.push(ConstraintLine {
                            kind: ConstraintKind::Compliance,
                            factor: parse_scalar(f, line)?,
                            p: None,
                        }),
                        ["stress", f] => constraints.push(ConstraintLine {
                            kind: ConstraintKind::Stress,
                            factor: parse_scalar(f, line)?,
                            p: Some(config.p),
                        }),
                        ["stress", f, p] => {
                            let pv: F = parse_scalar(p, line)?;
                            if pv < F::of(2.0) {
                                return Err(perr(line, "stress exponent must be >= 2"));
                            }
                            constraints.push(ConstraintLine {
                                kind: ConstraintKind::Stress,
                                factor: parse_scalar(f, line)?,
                                p: Some(pv),
                            })
                        }
                        _ => {
                            return Err(perr(
                                line,
                                "constraint expects 'compliance <factor>' or 'stress <factor> [p]'",
                            ))
                        }
                    }
                }
                "vf_target" => {
                    config.vf_target = parse_scalar::<f64>(val, line)?;
                    if !(config.vf_target > 0.0 && config.vf_target < 1.0) {
                        return Err(perr(line, "vf_target must lie in (0, 1)"));
                    }
                }
                "dv" => {
                    config.dv = parse_scalar::<f64>(val, line)?;
                    config.dv_min = config.dv / 8.0;
                }
                "dv_min" => config.dv_min = parse_scalar::<f64>(val, line)?,
                "inner_tol" => config.inner_tol = parse_scalar(val, line)?,
                "inner_max" => config.inner_max = parse_usize(val, line)?,
                "p" => {
                    config.p = parse_scalar(val, line)?;
                    if config.p < F::of(2.0) {
                        return Err(perr(line, "p must be >= 2"));
                    }
                }
                "mu0" => config.mu0 = parse_scalar(val, line)?,
                "gamma0" => config.gamma0 = parse_scalar(val, line)?,
                "zeta" => config.zeta = parse_scalar(val, line)?,
                "eta" => config.eta = parse_scalar(val, line)?,
                "cg_tol" => config.cg_tol = parse_scalar(val, line)?,
                "cg_max_iters" => config.cg_max_iters = Some(parse_usize(val, line)?),
                "smooth_field" => {
                    config.smooth_field = match val {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        _ => return Err(perr(line, "smooth_field expects true or false")),
                    }
                }
                other => return Err(perr(line, format!("unknown key '{other}'"))),
            }
        }

        let mut missing = Vec::new();
        if dims.is_none() {
            missing.push("domain");
        }
        if resolution.is_none() {
            missing.push("resolution");
        }
        if thermal_kind.is_none() {
            missing.push("thermal");
        }
        if fixed_faces.is_empty() && fixed_nodes.is_empty() {
            missing.push("fix_face or fix_node");
        }
        if point_loads.is_empty() && pressures.is_empty() {
            missing.push("point_load or pressure");
        }
        if constraints.is_empty() {
            missing.push("constraint");
        }
        if !missing.is_empty() {
            return Err(ProblemError::MissingKeys(missing.join(", ")));
        }

        let thermal = match thermal_kind.unwrap() {
            "uniform" => ThermalSpec::Uniform(uniform_dt),
            _ => {
                if dirichlet_faces.is_empty() && dirichlet_nodes.is_empty() {
                    return Err(ProblemError::MissingKeys(
                        "dirichlet_face or dirichlet_node (thermal = dirichlet)".into(),
                    ));
                }
                ThermalSpec::Dirichlet {
                    faces: dirichlet_faces,
                    nodes: dirichlet_nodes,
                    flux,
                }
            }
        };

        let def = ProblemDefinition {
            dims: dims.unwrap(),
            resolution: resolution.unwrap(),
            material,
            fixed_faces,
            fixed_nodes,
            point_loads,
            pressures,
            thermal,
            constraints,
            config,
        };
        def.check_ranges()?;
        Ok(def)
    }

    fn check_ranges(&self) -> Result<(), ProblemError> {
        let [nx, ny, nz] = self.resolution;
        let check_node = |c: &[usize; 3]| -> Result<(), ProblemError> {
            if c[0] > nx || c[1] > ny || c[2] > nz {
                return Err(ProblemError::MissingKeys(format!(
                    "node ({}, {}, {}) outside grid ({}x{}x{} nodes)",
                    c[0],
                    c[1],
                    c[2],
                    nx + 1,
                    ny + 1,
                    nz + 1
                )));
            }
            Ok(())
        };
        for (c, _) in &self.point_loads {
            check_node(c)?;
        }
        for c in &self.fixed_nodes {
            check_node(c)?;
        }
        if let ThermalSpec::Dirichlet { nodes, flux, .. } = &self.thermal {
            for (c, _) in nodes {
                check_node(c)?;
            }
            for (c, _) in flux {
                check_node(c)?;
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an identical definition.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let s = |x: F| format!("{}", x.to_f64());
        out.push_str(&format!(
            "domain = {} {} {}\n",
            s(self.dims[0]),
            s(self.dims[1]),
            s(self.dims[2])
        ));
        out.push_str(&format!(
            "resolution = {} {} {}\n",
            self.resolution[0], self.resolution[1], self.resolution[2]
        ));
        out.push_str(&format!("e = {}\n", s(self.material.e)));
        out.push_str(&format!("nu = {}\n", s(self.material.nu)));
        out.push_str(&format!("alpha = {}\n", s(self.material.alpha)));
        out.push_str(&format!("k = {}\n", s(self.material.k)));
        out.push_str(&format!("t0 = {}\n", s(self.material.t0)));
        for f in &self.fixed_faces {
            out.push_str(&format!("fix_face = {}\n", f.name()));
        }
        for c in &self.fixed_nodes {
            out.push_str(&format!("fix_node = {} {} {}\n", c[0], c[1], c[2]));
        }
        for (c, f) in &self.point_loads {
            out.push_str(&format!(
                "point_load = {} {} {} {} {} {}\n",
                c[0],
                c[1],
                c[2],
                s(f[0]),
                s(f[1]),
                s(f[2])
            ));
        }
        for (face, p, dir) in &self.pressures {
            out.push_str(&format!(
                "pressure = {} {} {} {} {}\n",
                face.name(),
                s(*p),
                s(dir[0]),
                s(dir[1]),
                s(dir[2])
            ));
        }
        match &self.thermal {
            ThermalSpec::Uniform(dt) => out.push_str(&format!("thermal = uniform {}\n", s(*dt))),
            ThermalSpec::Dirichlet { faces, nodes, flux } => {
                out.push_str("thermal = dirichlet\n");
                for (f, dt) in faces {
                    out.push_str(&format!("dirichlet_face = {} {}\n", f.name(), s(*dt)));
                }
                for (c, dt) in nodes {
                    out.push_str(&format!(
                        "dirichlet_node = {} {} {} {}\n",
                        c[0],
                        c[1],
                        c[2],
                        s(*dt)
                    ));
                }
                for (c, q) in flux {
                    out.push_str(&format!("flux = {} {} {} {}\n", c[0], c[1], c[2], s(*q)));
                }
            }
        }
        for c in &self.constraints {
            match c.kind {
                ConstraintKind::Compliance => {
                    out.push_str(&format!("constraint = compliance {}\n", s(c.factor)))
                }
                ConstraintKind::Stress => out.push_str(&format!(
                    "constraint = stress {} {}\n",
                    s(c.factor),
                    s(c.p.unwrap_or(self.config.p))
                )),
            }
        }
        let cfg = &self.config;
        out.push_str(&format!("vf_target = {}\n", cfg.vf_target));
        out.push_str(&format!("dv = {}\n", cfg.dv));
        out.push_str(&format!("dv_min = {}\n", cfg.dv_min));
        out.push_str(&format!("inner_tol = {}\n", s(cfg.inner_tol)));
        out.push_str(&format!("inner_max = {}\n", cfg.inner_max));
        out.push_str(&format!("p = {}\n", s(cfg.p)));
        out.push_str(&format!("mu0 = {}\n", s(cfg.mu0)));
        out.push_str(&format!("gamma0 = {}\n", s(cfg.gamma0)));
        out.push_str(&format!("zeta = {}\n", s(cfg.zeta)));
        out.push_str(&format!("eta = {}\n", s(cfg.eta)));
        out.push_str(&format!("cg_tol = {}\n", s(cfg.cg_tol)));
        if let Some(cap) = cfg.cg_max_iters {
            out.push_str(&format!("cg_max_iters = {cap}\n"));
        }
        if cfg.smooth_field {
            out.push_str("smooth_field = true\n");
        }
        out
    }

    /// Apply a `key=value` override line (same grammar as the file).
    /// Repeatable keys replace all previous occurrences on their first
    /// override and append afterwards.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ProblemError> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut text = self.serialize();
        let mut cleared: Vec<String> = Vec::new();
        for ov in overrides {
            let key = ov
                .split('=')
                .next()
                .map(str::trim)
                .unwrap_or("")
                .to_string();
            let repeatable = matches!(
                key.as_str(),
                "fix_face"
                    | "fix_node"
                    | "point_load"
                    | "pressure"
                    | "dirichlet_face"
                    | "dirichlet_node"
                    | "flux"
                    | "constraint"
            );
            if repeatable && !cleared.contains(&key) {
                text = text
                    .lines()
                    .filter(|l| l.split('=').next().map(str::trim) != Some(key.as_str()))
                    .collect::<Vec<_>>()
                    .join("\n");
                text.push('\n');
                cleared.push(key.clone());
            } else if !repeatable {
                text = text
                    .lines()
                    .filter(|l| l.split('=').next().map(str::trim) != Some(key.as_str()))
                    .collect::<Vec<_>>()
                    .join("\n");
                text.push('\n');
            }
            text.push_str(ov);
            text.push('\n');
        }
        *self = Self::parse(&text)?;
        Ok(())
    }

    /// Realize the definition: grid, boundary conditions, constraint specs.
    #[allow(clippy::type_complexity)]
    pub fn build(
        &self,
    ) -> Result<
        (
            VoxelGrid<F>,
            MaterialModel<F>,
            BoundaryConditions<F>,
            Vec<ConstraintSpecification<F>>,
            OptimizerConfig<F>,
        ),
        ProblemError,
    > {
        let grid = VoxelGrid::build(self.dims, self.resolution)?;
        let mut bc = BoundaryConditions::empty();
        for &face in &self.fixed_faces {
            bc.fix_face(&grid, face);
        }
        for c in &self.fixed_nodes {
            let n = grid.node_index(c[0], c[1], c[2]);
            for axis in 0..3 {
                bc.fixed_dofs.push(3 * n + axis);
            }
        }
        bc.fixed_dofs.sort_unstable();
        bc.fixed_dofs.dedup();
        for (c, f) in &self.point_loads {
            bc.point_loads.push((grid.node_index(c[0], c[1], c[2]), *f));
        }
        for (face, p, dir) in &self.pressures {
            bc.face_pressures.push((*face, *p, *dir));
        }
        bc.thermal = match &self.thermal {
            ThermalSpec::Uniform(dt) => ThermalMode::UniformDelta(*dt),
            ThermalSpec::Dirichlet { faces, nodes, flux } => {
                let mut prescribed: Vec<(usize, F)> = Vec::new();
                for (face, dt) in faces {
                    for n in grid.face_nodes(*face) {
                        prescribed.push((n, *dt));
                    }
                }
                for (c, dt) in nodes {
                    prescribed.push((grid.node_index(c[0], c[1], c[2]), *dt));
                }
                prescribed.sort_by_key(|&(n, _)| n);
                prescribed.dedup_by_key(|&mut (n, _)| n);
                let flux = flux
                    .iter()
                    .map(|(c, q)| (grid.node_index(c[0], c[1], c[2]), *q))
                    .collect();
                ThermalMode::Dirichlet { prescribed, flux }
            }
        };
        bc.validate()?;

        // Compliance constraints lead so the all-inactive fallback orders
        // elements by the compliance field.
        let mut specs: Vec<ConstraintSpecification<F>> = Vec::new();
        for c in self
            .constraints
            .iter()
            .filter(|c| c.kind == ConstraintKind::Compliance)
            .chain(
                self.constraints
                    .iter()
                    .filter(|c| c.kind == ConstraintKind::Stress),
            )
        {
            specs.push(ConstraintSpecification {
                kind: match c.kind {
                    ConstraintKind::Compliance => QoIKind::Compliance,
                    ConstraintKind::Stress => QoIKind::PNormStress(c.p.unwrap_or(self.config.p)),
                },
                factor: c.factor,
            });
        }

        Ok((grid, self.material, bc, specs, self.config.clone()))
    }
}

/// Built-in benchmark problems.
///
/// `clamped-beam-point`: a bi-clamped beam with a central transverse point
/// load of 1e5 N. Only the 0.02 m thickness is documented; the 0.5 m x
/// 0.25 m span and depth are an assumption recorded here. The load is
/// distributed across the through-thickness row of bottom-center nodes.
///
/// `clamped-beam-distributed`: 0.5 m x 0.28 m x 0.01 m bi-clamped beam
/// with a 6e5 Pa pressure on the top face.
///
/// Both are meshed with 100 x 50 x 3 = 15,000 hexahedral elements.
pub fn generate_benchmark<F: Real>(name: &str) -> Result<ProblemDefinition<F>, ProblemError> {
    match name {
        "clamped-beam-point" => {
            let nz = 3usize;
            let mut point_loads = Vec::new();
            let total = -1.0e5;
            let per_node = total / (nz as f64 + 1.0);
            for kz in 0..=nz {
                point_loads.push(([50, 0, kz], [F::zero(), F::of(per_node), F::zero()]));
            }
            Ok(ProblemDefinition {
                dims: [F::of(0.5), F::of(0.25), F::of(0.02)],
                resolution: [100, 50, nz],
                material: MaterialModel::steel(),
                fixed_faces: vec![Face::XMin, Face::XMax],
                fixed_nodes: vec![],
                point_loads,
                pressures: vec![],
                thermal: ThermalSpec::Uniform(F::one()),
                constraints: vec![ConstraintLine {
                    kind: ConstraintKind::Compliance,
                    factor: F::of(5.0),
                    p: None,
                }],
                config: OptimizerConfig {
                    vf_target: 0.25,
                    ..OptimizerConfig::default()
                },
            })
        }
        "clamped-beam-distributed" => Ok(ProblemDefinition {
            dims: [F::of(0.5), F::of(0.28), F::of(0.01)],
            resolution: [100, 50, 3],
            material: MaterialModel::steel(),
            fixed_faces: vec![Face::XMin, Face::XMax],
            fixed_nodes: vec![],
            point_loads: vec![],
            pressures: vec![(Face::YMax, F::of(6.0e5), [F::zero(), F::of(-1.0), F::zero()])],
            thermal: ThermalSpec::Uniform(F::of(20.0)),
            constraints: vec![ConstraintLine {
                kind: ConstraintKind::Compliance,
                factor: F::of(5.0),
                p: None,
            }],
            config: OptimizerConfig {
                vf_target: 0.30,
                ..OptimizerConfig::default()
            },
        }),
        other => Err(ProblemError::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in ["clamped-beam-point", "clamped-beam-distributed"] {
            let def = generate_benchmark::<f64>(name).unwrap();
            let text = def.serialize();
            let again = ProblemDefinition::<f64>::parse(&text).unwrap();
            assert_eq!(def, again, "round trip failed for {name}");
        }
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = ProblemDefinition::<f64>::parse("").unwrap_err();
        match err {
            ProblemError::MissingKeys(keys) => {
                for needed in ["domain", "resolution", "thermal", "constraint"] {
                    assert!(keys.contains(needed), "missing '{needed}' in '{keys}'");
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_poisson_cites_line() {
        let text = "domain = 1 1 1\nnu = 0.5\n";
        let err = ProblemDefinition::<f64>::parse(text).unwrap_err();
        match err {
            ProblemError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("poisson"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_cites_line() {
        let text = "domain = 1 1 1\nbogus = 3\n";
        let err = ProblemDefinition::<f64>::parse(text).unwrap_err();
        match err {
            ProblemError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overrides_replace_and_append() {
        let mut def = generate_benchmark::<f64>("clamped-beam-point").unwrap();
        def.apply_overrides(&[
            "thermal = uniform 5".to_string(),
            "constraint = stress 2 6".to_string(),
            "constraint = compliance 5".to_string(),
        ])
        .unwrap();
        assert_eq!(def.thermal, ThermalSpec::Uniform(5.0));
        assert_eq!(def.constraints.len(), 2);
        assert_eq!(def.constraints[0].kind, ConstraintKind::Stress);
    }

    #[test]
    fn preset_mesh_matches_benchmark_size() {
        let def = generate_benchmark::<f64>("clamped-beam-point").unwrap();
        let (grid, _, bc, _, _) = def.build().unwrap();
        assert_eq!(grid.num_elements(), 15_000);
        let total: f64 = bc.point_loads.iter().map(|(_, f)| f[1]).sum();
        assert!((total + 1.0e5).abs() < 1e-9);
    }
}
