//! VTK legacy and CSV writers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crackfield_core::fem::DofMap;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}, line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("nothing to write")]
    Empty,
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.into(), source })?;
    }
    fs::write(path, text).map_err(|source| OutputError::Io { path: path.into(), source })
}

/// Local vertex order of VTK quads and hexahedra in terms of the
/// lexicographic corner numbering.
const VTK_ORDER: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];

/// Optional extra fields of a VTK file.
#[derive(Debug, Default, Clone, Copy)]
pub struct VtkExtras<'a> {
    pub phi_old: Option<&'a [f64]>,
    /// Per cell slot.
    pub estimator: Option<&'a [f64]>,
}

/// ASCII legacy unstructured grid with `u` and `phi` as point data.
pub fn vtk_string(dofmap: &DofMap, values: &[f64], extras: VtkExtras<'_>) -> String {
    let d = dofmap.dim();
    let nv = dofmap.n_vertices();
    let nc = dofmap.n_cells();
    let per = 1 << d;
    let mut s = String::with_capacity(64 * nv);
    s.push_str("# vtk DataFile Version 3.0\nphase-field fracture solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {nv} double").unwrap();
    for v in 0..nv {
        let x = dofmap.vertex_coords(v);
        writeln!(s, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]).unwrap();
    }
    writeln!(s, "CELLS {nc} {}", nc * (per + 1)).unwrap();
    for c in 0..nc {
        let verts = dofmap.cell_vertices(c);
        s.push_str(&per.to_string());
        for &k in VTK_ORDER.iter().take(per) {
            write!(s, " {}", verts[k]).unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {nc}").unwrap();
    let ty = if d == 2 { "9\n" } else { "12\n" };
    for _ in 0..nc {
        s.push_str(ty);
    }
    writeln!(s, "POINT_DATA {nv}\nVECTORS u double").unwrap();
    for v in 0..nv {
        let mut u = [0.0; 3];
        for (c, x) in u.iter_mut().enumerate().take(d) {
            *x = values[dofmap.u_dof(v, c)];
        }
        writeln!(s, "{:.16e} {:.16e} {:.16e}", u[0], u[1], u[2]).unwrap();
    }
    let mut scalars = |name: &str, data: &mut dyn Iterator<Item = f64>| {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for x in data {
            writeln!(s, "{x:.16e}").unwrap();
        }
    };
    scalars("phi", &mut (0..nv).map(|v| values[dofmap.phi_dof(v)]));
    if let Some(p) = extras.phi_old {
        scalars("phi_old", &mut p.iter().copied());
    }
    if let Some(e) = extras.estimator {
        writeln!(s, "CELL_DATA {nc}\nSCALARS estimator double 1\nLOOKUP_TABLE default").unwrap();
        for x in e {
            writeln!(s, "{x:.16e}").unwrap();
        }
    }
    s
}

pub fn write_vtk(path: &Path, dofmap: &DofMap, values: &[f64], extras: VtkExtras<'_>) -> Result<(), OutputError> {
    write_file(path, &vtk_string(dofmap, values, extras))
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub dofs: usize,
    pub eps: f64,
    pub h_min: f64,
    pub tcv: f64,
    pub tcv_rel_err: f64,
    pub newton_iters: usize,
    pub gmres_mean: f64,
}

pub const STUDY_HEADER: &str = "level,dofs,eps,h_min,tcv,tcv_rel_err,newton_iters,gmres_mean";

pub fn study_csv(records: &[LevelRecord]) -> String {
    let mut rows: Vec<&LevelRecord> = records.iter().collect();
    rows.sort_by_key(|r| r.level);
    let mut s = String::from(STUDY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}",
            r.level, r.dofs, r.eps, r.h_min, r.tcv, r.tcv_rel_err, r.newton_iters, r.gmres_mean
        )
        .unwrap();
    }
    s
}

pub fn write_study_csv(path: &Path, records: &[LevelRecord]) -> Result<(), OutputError> {
    if records.is_empty() {
        return Err(OutputError::Empty);
    }
    write_file(path, &study_csv(records))
}

pub fn parse_study_csv(path: &Path, text: &str) -> Result<Vec<LevelRecord>, OutputError> {
    let err = |line: usize, reason: &str| OutputError::Parse { path: path.into(), line, reason: reason.into() };
    let mut lines = text.lines();
    if lines.next() != Some(STUDY_HEADER) {
        return Err(err(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(err(i + 2, "expected 8 fields"));
            }
            let bad = |_| err(i + 2, "malformed number");
            Ok(LevelRecord {
                level: f[0].parse().map_err(|_| err(i + 2, "malformed level"))?,
                dofs: f[1].parse().map_err(|_| err(i + 2, "malformed dofs"))?,
                eps: f[2].parse().map_err(bad)?,
                h_min: f[3].parse().map_err(bad)?,
                tcv: f[4].parse().map_err(bad)?,
                tcv_rel_err: f[5].parse().map_err(bad)?,
                newton_iters: f[6].parse().map_err(|_| err(i + 2, "malformed iteration count"))?,
                gmres_mean: f[7].parse().map_err(bad)?,
            })
        })
        .collect()
}

/// Generic table writer: header line plus rows in scientific notation.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crackfield_core::fem::interpolate;
    use crackfield_core::mesh::{DomainSpec, Mesh};

    #[test]
    fn single_cell_vtk() {
        let m = Mesh::new(DomainSpec::new(2, 1.0, 1).unwrap()).unwrap();
        let d = DofMap::new(&m);
        let f = interpolate(&d, |x| [x[0], 0.0, 0.0, 1.0]);
        let s = vtk_string(&d, &f.values, VtkExtras::default());
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 1 5\n4 0 1 3 2\n"));
        assert!(s.contains("CELL_TYPES 1\n9\n"));
        assert_eq!(s, vtk_string(&d, &f.values, VtkExtras::default()));
    }

    #[test]
    fn csv_round_trip() {
        let r = |level| LevelRecord {
            level,
            dofs: 100 * (level + 1),
            eps: 0.1 / (level + 1) as f64,
            h_min: 1.0 / 3.0,
            tcv: 6.0319e-3,
            tcv_rel_err: 0.05,
            newton_iters: 4,
            gmres_mean: 17.25,
        };
        let recs = vec![r(1), r(0)];
        let text = study_csv(&recs);
        assert_eq!(text.lines().count(), 3);
        let back = parse_study_csv(Path::new("t.csv"), &text).unwrap();
        assert_eq!(back[0].level, 0);
        for (a, b) in back.iter().zip([r(0), r(1)].iter()) {
            assert_eq!(a.dofs, b.dofs);
            assert!((a.h_min - b.h_min).abs() <= 1e-12 * b.h_min);
            assert_eq!(a.gmres_mean, b.gmres_mean);
        }
    }
}
