//! Mesh file formats: Triangle/TetGen `.node`/`.ele` pairs and a Gmsh v2 ASCII subset.
//!
//! `.node` boundary markers are plain integers. When the file carries a
//! `# tags: name=bit ...` comment, markers are decoded as bitmasks over those
//! names, which is how multi-tagged corner vertices survive a round trip.
//! Without it, a nonzero marker `m` becomes the tag `"m"`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Mesh, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    NodeEle,
    GmshV2,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node-ele" | "node" | "triangle" => Ok(Self::NodeEle),
            "gmsh" | "gmsh-v2" | "msh" => Ok(Self::GmshV2),
            other => Err(Error::InvalidArgument(format!("unknown mesh format '{other}'"))),
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a mesh. For `NodeEle` the path may name the `.node` file, the `.ele`
/// file, or the common stem.
pub fn read_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh> {
    match format {
        MeshFormat::NodeEle => read_node_ele(path),
        MeshFormat::GmshV2 => parse_gmsh_v2(&fs::read_to_string(path)?),
    }
}

fn node_ele_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("node") | Some("ele") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".node"), with(".ele"))
}

pub fn read_node_ele(path: impl AsRef<Path>) -> Result<Mesh> {
    let (node, ele) = node_ele_paths(path.as_ref());
    let node_text = fs::read_to_string(&node)?;
    let ele_text = fs::read_to_string(&ele)?;
    parse_node_ele(&node_text, &ele_text)
}

/// Non-comment lines with their 1-based line numbers, inline `#` comments stripped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse_num<T: FromStr>(line: usize, s: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>()
        .map_err(|e| perr(line, format!("bad {what} '{s}': {e}")))
}

fn tag_legend(node_text: &str) -> Option<Vec<(String, u32)>> {
    for raw in node_text.lines() {
        if let Some(rest) = raw.trim().strip_prefix("# tags:") {
            let mut legend = Vec::new();
            for item in rest.split_whitespace() {
                let (name, bit) = item.split_once('=')?;
                legend.push((name.to_string(), bit.parse().ok()?));
            }
            return Some(legend);
        }
    }
    None
}

pub fn parse_node_ele(node_text: &str, ele_text: &str) -> Result<Mesh> {
    let mut lines = data_lines(node_text);
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty .node file"))?;
    if header.len() < 2 {
        return Err(perr(hl, ".node header needs '<count> <dim> [attrs] [markers]'"));
    }
    let n: usize = parse_num(hl, header[0], "vertex count")?;
    let dim: usize = parse_num(hl, header[1], "dimension")?;
    if dim != 2 && dim != 3 {
        return Err(perr(hl, format!("dimension {dim} not supported")));
    }
    let nattr: usize = header.get(2).map_or(Ok(0), |s| parse_num(hl, s, "attribute count"))?;
    let has_marker = header
        .get(3)
        .map_or(Ok(0usize), |s| parse_num(hl, s, "marker flag"))?
        > 0;
    let legend = tag_legend(node_text);

    let mut vertices = Vec::with_capacity(n);
    let mut markers = Vec::with_capacity(n);
    let mut base = None;
    for _ in 0..n {
        let (ln, f) = lines
            .next()
            .ok_or_else(|| perr(0, format!("expected {n} vertices in .node")))?;
        let need = 1 + dim + nattr + usize::from(has_marker);
        if f.len() < need {
            return Err(perr(ln, format!("vertex line needs {need} fields")));
        }
        let idx: usize = parse_num(ln, f[0], "vertex index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 {
            return Err(perr(ln, "vertex numbering must start at 0 or 1"));
        }
        if idx != b + vertices.len() {
            return Err(perr(ln, format!("vertex index {idx} out of sequence")));
        }
        let mut p: Point = [0.0; 3];
        for a in 0..dim {
            p[a] = parse_num(ln, f[1 + a], "coordinate")?;
        }
        vertices.push(p);
        markers.push(if has_marker {
            parse_num::<i64>(ln, f[1 + dim + nattr], "boundary marker")?
        } else {
            0
        });
    }
    let base = base.unwrap_or(1);

    let mut tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (v, &m) in markers.iter().enumerate() {
        if m == 0 {
            continue;
        }
        match &legend {
            Some(legend) => {
                for (name, bit) in legend {
                    if (m as u64) & (1u64 << bit) != 0 {
                        tags.entry(name.clone()).or_default().insert(v);
                    }
                }
            }
            None => {
                tags.entry(m.to_string()).or_default().insert(v);
            }
        }
    }
    if let Some(legend) = &legend {
        for (name, _) in legend {
            tags.entry(name.clone()).or_default();
        }
    }

    let mut elines = data_lines(ele_text);
    let (el, eh) = elines.next().ok_or_else(|| perr(1, "empty .ele file"))?;
    if eh.len() < 2 {
        return Err(perr(el, ".ele header needs '<count> <nodes per element> [attrs]'"));
    }
    let m: usize = parse_num(el, eh[0], "element count")?;
    let npe: usize = parse_num(el, eh[1], "nodes per element")?;
    if npe != dim + 1 {
        return Err(perr(el, format!("{npe} nodes per element, expected {}", dim + 1)));
    }
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, f) = elines
            .next()
            .ok_or_else(|| perr(0, format!("expected {m} elements in .ele")))?;
        if f.len() < 1 + npe {
            return Err(perr(ln, "element line too short"));
        }
        let mut el = Vec::with_capacity(npe);
        for s in &f[1..=npe] {
            let raw: usize = parse_num(ln, s, "vertex reference")?;
            if raw < base || raw - base >= n {
                return Err(perr(ln, format!("vertex reference {raw} out of range")));
            }
            el.push(raw - base);
        }
        elements.push(el);
    }
    Mesh::new(dim, vertices, elements, tags)
}

/// Serializes to `.node`/`.ele` text (1-based, tags as marker bitmasks).
pub fn format_node_ele(mesh: &Mesh) -> Result<(String, String)> {
    let names: Vec<&String> = mesh.tags().keys().collect();
    if names.len() > 62 {
        return Err(Error::InvalidArgument(format!(
            "{} tags cannot be encoded as marker bits",
            names.len()
        )));
    }
    let mut marker = vec![0u64; mesh.num_vertices()];
    for (bit, name) in names.iter().enumerate() {
        for v in mesh.tagged(name) {
            marker[v] |= 1 << bit;
        }
    }
    let dim = mesh.dim();
    let mut node = String::new();
    if !names.is_empty() {
        let legend: Vec<String> = names.iter().enumerate().map(|(b, n)| format!("{n}={b}")).collect();
        let _ = writeln!(node, "# tags: {}", legend.join(" "));
    }
    let _ = writeln!(node, "{} {} 0 1", mesh.num_vertices(), dim);
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = write!(node, "{}", i + 1);
        for c in &p[..dim] {
            let _ = write!(node, " {c:e}");
        }
        let _ = writeln!(node, " {}", marker[i]);
    }
    let mut ele = String::new();
    let _ = writeln!(ele, "{} {} 0", mesh.num_elements(), dim + 1);
    for (e, el) in mesh.elements().enumerate() {
        let _ = write!(ele, "{}", e + 1);
        for v in el {
            let _ = write!(ele, " {}", v + 1);
        }
        let _ = writeln!(ele);
    }
    Ok((node, ele))
}

/// Writes `<stem>.node` and `<stem>.ele`.
pub fn write_node_ele(mesh: &Mesh, stem: impl AsRef<Path>) -> Result<()> {
    let (node_path, ele_path) = node_ele_paths(stem.as_ref());
    let (node, ele) = format_node_ele(mesh)?;
    fs::write(node_path, node)?;
    fs::write(ele_path, ele)?;
    Ok(())
}

/// Parses the ASCII Gmsh 2.x subset: `$PhysicalNames`, `$Nodes`, `$Elements`
/// with points (15), lines (1), triangles (2) and tetrahedra (4).
///
/// Tetrahedra make a 3D mesh, otherwise triangles make a 2D one. Lower-dimensional
/// elements tag their vertices with the physical group name (or its number).
/// Nodes not referenced by any volume element are dropped.
pub fn parse_gmsh_v2(text: &str) -> Result<Mesh> {
    let lines: Vec<&str> = text.lines().collect();
    let mut physical_names: HashMap<i64, String> = HashMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    // (type, physical tag, node ids, line)
    let mut raw_elements: Vec<(u32, i64, Vec<i64>, usize)> = Vec::new();
    let mut saw_format = false;

    let mut i = 0;
    while i < lines.len() {
        let line = lines[i].trim();
        let ln = i + 1;
        match line {
            "$MeshFormat" => {
                let v = lines.get(i + 1).ok_or_else(|| perr(ln + 1, "missing format line"))?;
                let f: Vec<&str> = v.split_whitespace().collect();
                if f.len() < 3 || !f[0].starts_with('2') {
                    return Err(perr(ln + 1, format!("unsupported mesh format '{}'", v.trim())));
                }
                if f[1] != "0" {
                    return Err(perr(ln + 1, "binary Gmsh files are not supported"));
                }
                saw_format = true;
                i += 2;
            }
            "$PhysicalNames" => {
                let count: usize = parse_num(ln + 1, lines.get(i + 1).unwrap_or(&"").trim(), "count")?;
                for k in 0..count {
                    let l = lines.get(i + 2 + k).ok_or_else(|| perr(ln + 2 + k, "truncated names"))?;
                    let f: Vec<&str> = l.splitn(3, char::is_whitespace).collect();
                    if f.len() < 3 {
                        return Err(perr(ln + 2 + k, "physical name line needs 'dim tag \"name\"'"));
                    }
                    let tag: i64 = parse_num(ln + 2 + k, f[1], "physical tag")?;
                    physical_names.insert(tag, f[2].trim().trim_matches('"').to_string());
                }
                i += 2 + count;
            }
            "$Nodes" => {
                let count: usize = parse_num(ln + 1, lines.get(i + 1).unwrap_or(&"").trim(), "node count")?;
                for k in 0..count {
                    let l_no = ln + 2 + k;
                    let l = lines.get(i + 2 + k).ok_or_else(|| perr(l_no, "truncated $Nodes"))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 4 {
                        return Err(perr(l_no, "node line needs 'id x y z'"));
                    }
                    let id: i64 = parse_num(l_no, f[0], "node id")?;
                    let p = [
                        parse_num(l_no, f[1], "x")?,
                        parse_num(l_no, f[2], "y")?,
                        parse_num(l_no, f[3], "z")?,
                    ];
                    if node_ids.insert(id, nodes.len()).is_some() {
                        return Err(perr(l_no, format!("duplicate node id {id}")));
                    }
                    nodes.push(p);
                }
                i += 2 + count;
            }
            "$Elements" => {
                let count: usize =
                    parse_num(ln + 1, lines.get(i + 1).unwrap_or(&"").trim(), "element count")?;
                for k in 0..count {
                    let l_no = ln + 2 + k;
                    let l = lines.get(i + 2 + k).ok_or_else(|| perr(l_no, "truncated $Elements"))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(perr(l_no, "element line too short"));
                    }
                    let etype: u32 = parse_num(l_no, f[1], "element type")?;
                    let ntags: usize = parse_num(l_no, f[2], "tag count")?;
                    let nn = match etype {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        other => return Err(perr(l_no, format!("unsupported element type {other}"))),
                    };
                    if f.len() != 3 + ntags + nn {
                        return Err(perr(l_no, format!("expected {} fields", 3 + ntags + nn)));
                    }
                    let phys: i64 = if ntags > 0 { parse_num(l_no, f[3], "physical tag")? } else { 0 };
                    let ids = f[3 + ntags..]
                        .iter()
                        .map(|s| parse_num::<i64>(l_no, s, "node reference"))
                        .collect::<Result<Vec<_>>>()?;
                    raw_elements.push((etype, phys, ids, l_no));
                }
                i += 2 + count;
            }
            _ => i += 1,
        }
    }
    if !saw_format {
        return Err(perr(1, "missing $MeshFormat section"));
    }
    let dim = if raw_elements.iter().any(|e| e.0 == 4) { 3 } else { 2 };
    let volume_type = if dim == 3 { 4 } else { 2 };

    let resolve = |id: i64, l_no: usize| -> Result<usize> {
        node_ids
            .get(&id)
            .copied()
            .ok_or_else(|| perr(l_no, format!("unknown node id {id}")))
    };
    let mut compact: Vec<Option<usize>> = vec![None; nodes.len()];
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    for (etype, _, ids, l_no) in &raw_elements {
        if *etype != volume_type {
            continue;
        }
        let mut el = Vec::with_capacity(ids.len());
        for &id in ids {
            let k = resolve(id, *l_no)?;
            let v = *compact[k].get_or_insert_with(|| {
                vertices.push(nodes[k]);
                vertices.len() - 1
            });
            el.push(v);
        }
        elements.push(el);
    }
    let mut tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (etype, phys, ids, l_no) in &raw_elements {
        if *etype == volume_type || *phys == 0 {
            continue;
        }
        let name = physical_names
            .get(phys)
            .cloned()
            .unwrap_or_else(|| phys.to_string());
        let set = tags.entry(name).or_default();
        for &id in ids {
            if let Some(v) = compact[resolve(id, *l_no)?] {
                set.insert(v);
            }
        }
    }
    Mesh::new(dim, vertices, elements, tags)
}
