//! ASCII OBJ and binary STL reading/writing. The format is chosen by file
//! extension.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point, TriangleMesh};
use crate::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = match extension(path).as_deref() {
        Some("obj") => parse_obj(path, &String::from_utf8_lossy(&bytes))?,
        Some("stl") => parse_stl(path, &bytes)?,
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                location: "extension".into(),
                message: "expected .obj or .stl".into(),
            })
        }
    };
    let dropped = mesh.drop_degenerate_faces();
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} zero-area triangles", path.display());
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_deref() {
        Some("obj") => write_obj(mesh).into_bytes(),
        Some("stl") => write_stl(mesh),
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                location: "extension".into(),
                message: "expected .obj or .stl".into(),
            })
        }
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Formats `v` with 9 significant digits, `%g` style.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.8e}")
    }
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn parse_obj(path: &Path, text: &str) -> Result<TriangleMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        location: format!("line {line}"),
        message,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = it
                        .next()
                        .ok_or_else(|| err(line_no, "vertex needs 3 coordinates".into()))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| err(line_no, format!("bad coordinate `{tok}`")))?;
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("bad face index `{tok}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err(line_no, "face index 0 is invalid".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(line_no, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(line_no, "face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    let f = [idx[0], idx[k], idx[k + 1]];
                    if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                        faces.push(f);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

pub fn write_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.faces.len());
    let mut header = [0u8; 80];
    let tag = b"binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for f in 0..mesh.faces.len() {
        let n = mesh.face_normal_raw(f);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for v in mesh.triangle(f) {
            for c in v.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn parse_stl(path: &Path, bytes: &[u8]) -> Result<TriangleMesh> {
    let err = |offset: usize, message: String| Error::Parse {
        path: path.into(),
        location: format!("byte {offset}"),
        message,
    };
    if bytes.len() < 84 {
        return Err(err(bytes.len(), "truncated header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() < expected {
        return Err(err(
            bytes.len(),
            format!("{count} triangles need {expected} bytes"),
        ));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let mut mesh = TriangleMesh::empty();
    for t in 0..count {
        let base = 84 + 50 * t + 12;
        let first = mesh.vertices.len() as u32;
        for k in 0..3 {
            let o = base + 12 * k;
            mesh.vertices
                .push(Point::new(f32_at(o), f32_at(o + 4), f32_at(o + 8)));
        }
        mesh.faces.push([first, first + 1, first + 2]);
    }
    mesh.weld_exact();
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Vec3};

    #[test]
    fn obj_roundtrip_unit_cube() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        let m = box_mesh(Vec3::repeat(1.0));
        save_mesh(&m, &p).unwrap();
        assert_eq!(load_mesh(&p).unwrap(), m);
    }

    #[test]
    fn quad_face_is_fan_triangulated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = parse_obj(Path::new("q.obj"), text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_error_reports_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 9\n";
        match parse_obj(Path::new("bad.obj"), text) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 4"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stl_unit_cube_is_closed() {
        // reference writer: 12 triangles, 50-byte records, written by hand
        let cube = box_mesh(Vec3::repeat(1.0));
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&12u32.to_le_bytes());
        for f in &cube.faces {
            bytes.extend_from_slice(&[0u8; 12]);
            for &v in f {
                for c in cube.vertices[v as usize].iter() {
                    bytes.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
            bytes.extend_from_slice(&[0u8; 2]);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.stl");
        std::fs::write(&p, &bytes).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!(m.faces.len(), 12);
        assert_eq!(m.vertices.len(), 8);
        assert!((m.volume().unwrap() - 1.0).abs() < 1e-12);
        // and our own writer agrees byte for byte on the vertex payload
        let ours = write_stl(&cube);
        assert_eq!(ours.len(), bytes.len());
    }

    #[test]
    fn truncated_stl_reports_offset() {
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 50]);
        assert!(matches!(
            parse_stl(Path::new("t.stl"), &bytes),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn degenerate_faces_dropped_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n").unwrap();
        assert_eq!(load_mesh(&p).unwrap().faces.len(), 1);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(-1.0), "-1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456.789012), "123456.789");
        assert_eq!(format_sig9(1e-7), "1.00000000e-7");
    }
}
