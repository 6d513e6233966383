//! Plot-ready outputs: trace.csv, fields.csv and mesh.obj.

use std::io::Write;
use std::path::Path;

use pmc_core::ambient::{ConformalFactor, PrescribedCurvature};
use pmc_core::geometry::{ambient_mean_curvature, chi, curvature_gap, tilt_v, RadialGraph};
use pmc_core::iteration::IterationTrace;
use pmc_core::sphere::Grid;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error(transparent)]
    Core(#[from] pmc_core::PmcError),
    #[error("{0}")]
    Format(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Serialize)]
struct TraceRow {
    k: usize,
    sup_decrement: f64,
    h_residual_sup: f64,
    h_residual_l2: f64,
    j_value: f64,
    penalty_sup: f64,
    newton_iters: usize,
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in &trace.steps {
        w.serialize(TraceRow {
            k: s.k,
            sup_decrement: s.sup_decrement,
            h_residual_sup: s.h_residual_sup,
            h_residual_l2: s.h_residual_l2,
            j_value: s.j_value,
            penalty_sup: s.penalty_sup,
            newton_iters: s.newton_iters,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row of fields.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub node: usize,
    pub theta: f64,
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "H_minus_f")]
    pub h_minus_f: f64,
    pub chi: f64,
}

pub fn field_rows(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<Vec<FieldRow>, ExportError> {
    let h = ambient_mean_curvature(graph, psi, grid)?;
    let gap = curvature_gap(graph, f, psi, grid)?;
    let v = tilt_v(graph, grid)?;
    let c = chi(graph, grid)?;
    Ok((0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let u = graph.u()[i];
            let d = p.direction(grid.dim());
            FieldRow {
                node: i,
                theta: p.theta,
                lambda: p.lambda,
                x: u * d[0],
                y: u * d[1],
                z: u * d[2],
                u,
                v: v[i],
                h: h[i],
                h_minus_f: gap[i],
                chi: c[i],
            }
        })
        .collect())
}

pub fn write_fields(path: &Path, rows: &[FieldRow]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_fields(path: &Path) -> Result<Vec<FieldRow>, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<Result<Vec<FieldRow>, _>>()
        .map_err(csv_err(path))
}

/// Triangulated S^2 graph: one vertex per node plus a vertex at each pole,
/// quads between latitude rows split in two, fans around the poles. Faces are
/// oriented outward.
pub fn write_mesh(path: &Path, graph: &RadialGraph, grid: &Grid) -> Result<(), ExportError> {
    if grid.dim() != 2 {
        return Err(ExportError::Format("mesh.obj is only written for S^2 grids".into()));
    }
    let (nt, nl) = (grid.n_theta(), grid.n_lambda());
    let u = graph.u();
    let mut out = String::new();
    out.push_str("# radial graph over S^2\n");
    for i in 0..grid.len() {
        let d = grid.point(i).direction(2);
        out.push_str(&format!("v {} {} {}\n", u[i] * d[0], u[i] * d[1], u[i] * d[2]));
    }
    let mean = |row: usize| (0..nl).map(|l| u[grid.index(row, l)]).sum::<f64>() / nl as f64;
    out.push_str(&format!("v 0 0 {}\n", mean(0)));
    out.push_str(&format!("v 0 0 {}\n", -mean(nt - 1)));
    let north = grid.len() + 1;
    let south = grid.len() + 2;
    // OBJ indices are 1-based
    let id = |j: usize, l: usize| grid.index(j, l % nl) + 1;
    for l in 0..nl {
        out.push_str(&format!("f {} {} {}\n", north, id(0, l), id(0, l + 1)));
    }
    for j in 0..nt - 1 {
        for l in 0..nl {
            let (a, b, c, d) = (id(j, l), id(j + 1, l), id(j + 1, l + 1), id(j, l + 1));
            out.push_str(&format!("f {a} {b} {c}\nf {a} {c} {d}\n"));
        }
    }
    for l in 0..nl {
        out.push_str(&format!("f {} {} {}\n", id(nt - 1, l), south, id(nt - 1, l + 1)));
    }
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))
}
