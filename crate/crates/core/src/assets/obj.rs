//! Wavefront OBJ reader (`v`, `vt`, `vn`, `f`); other records are ignored.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use glam::{DVec2, DVec3};

use crate::error::{Error, FormatError, Result};
use crate::geometry::TriangleMesh;

type Corner = (usize, Option<usize>, Option<usize>);

pub fn parse_obj(text: &str, require_uvs: bool) -> std::result::Result<TriangleMesh, FormatError> {
    let mut positions = Vec::new();
    let mut texcoords = Vec::new();
    let mut normals = Vec::new();
    let mut faces: Vec<(usize, Vec<Corner>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let err = |message: String| FormatError::Obj { line, message };
        let floats = |tokens: std::str::SplitWhitespace, n: usize| -> std::result::Result<Vec<f64>, FormatError> {
            let v: Vec<f64> = tokens
                .take(n)
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number {t:?}"))))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() < n {
                return Err(err(format!("expected {n} components")));
            }
            Ok(v)
        };
        match tag {
            "v" => {
                let v = floats(tokens, 3)?;
                positions.push(DVec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = floats(tokens, 2)?;
                texcoords.push(DVec2::new(v[0], v[1]));
            }
            "vn" => {
                let v = floats(tokens, 3)?;
                normals.push(DVec3::new(v[0], v[1], v[2]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in tokens {
                    let mut parts = tok.split('/');
                    let resolve = |s: Option<&str>, len: usize, what: &str| -> std::result::Result<Option<usize>, FormatError> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 = s.parse().map_err(|_| err(format!("bad index {s:?}")))?;
                                let idx = if i > 0 {
                                    i - 1
                                } else if i < 0 {
                                    len as i64 + i
                                } else {
                                    -1
                                };
                                if idx < 0 || idx as usize >= len {
                                    return Err(err(format!("{what} index {i} out of range ({len} defined)")));
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let v = resolve(parts.next(), positions.len(), "vertex")?
                        .ok_or_else(|| err("face corner without vertex index".into()))?;
                    let vt = resolve(parts.next(), texcoords.len(), "texcoord")?;
                    let vn = resolve(parts.next(), normals.len(), "normal")?;
                    corners.push((v, vt, vn));
                }
                if corners.len() < 3 {
                    return Err(err("face with fewer than 3 vertices".into()));
                }
                faces.push((line, corners));
            }
            _ => {}
        }
    }

    let all_uv = faces.iter().all(|(_, c)| c.iter().all(|k| k.1.is_some()));
    if require_uvs && !all_uv {
        let line = faces
            .iter()
            .find(|(_, c)| c.iter().any(|k| k.1.is_none()))
            .map(|f| f.0)
            .unwrap_or(0);
        return Err(FormatError::Obj {
            line,
            message: "face corner lacks a texture coordinate".into(),
        });
    }
    let all_normals = faces.iter().all(|(_, c)| c.iter().all(|k| k.2.is_some()));

    // per-position area-weighted normals, used when any corner lacks `vn`
    let smooth: Vec<DVec3> = if all_normals {
        Vec::new()
    } else {
        let mut acc = vec![DVec3::ZERO; positions.len()];
        for (_, c) in &faces {
            for k in 1..c.len() - 1 {
                let (a, b, d) = (positions[c[0].0], positions[c[k].0], positions[c[k + 1].0]);
                let n = (b - a).cross(d - a);
                for i in [c[0].0, c[k].0, c[k + 1].0] {
                    acc[i] += n;
                }
            }
        }
        acc
    };

    let mut index: HashMap<Corner, u32> = HashMap::new();
    let mut out_p = Vec::new();
    let mut out_n = Vec::new();
    let mut out_uv = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex = |corner: Corner| -> u32 {
        *index.entry(corner).or_insert_with(|| {
            out_p.push(positions[corner.0]);
            out_n.push(match corner.2 {
                Some(n) if all_normals => normals[n],
                _ => smooth[corner.0],
            });
            out_uv.push(corner.1.map(|t| texcoords[t]).unwrap_or(DVec2::ZERO));
            (out_p.len() - 1) as u32
        })
    };
    for (_, c) in &faces {
        let first = vertex(c[0]);
        for k in 1..c.len() - 1 {
            triangles.push([first, vertex(c[k]), vertex(c[k + 1])]);
        }
    }
    let uvs = all_uv.then_some(out_uv);
    TriangleMesh::new(out_p, Some(out_n), uvs, triangles).map_err(|e| FormatError::Obj {
        line: 0,
        message: e.to_string(),
    })
}

pub fn load_obj(path: impl AsRef<Path>, require_uvs: bool) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, require_uvs).map_err(|e| Error::format(path, e))
}

/// Writes positions, uvs and normals with one `v/vt/vn` triple per vertex.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write;
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for t in mesh.uvs() {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    for n in mesh.normals() {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| i + 1);
        let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
    }
    super::netpbm::write_atomic(path.as_ref(), s.as_bytes())
}
