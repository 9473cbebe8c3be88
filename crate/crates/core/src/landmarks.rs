//! Crest and fundus annotations, shortest paths on the edge graph and the
//! directional lines joining them.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// A vertex chain on the mesh with its total Euclidean length (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
    pub length: f64,
}

impl GeodesicPath {
    pub fn source(&self) -> usize {
        self.vertices[0]
    }

    pub fn target(&self) -> usize {
        *self.vertices.last().expect("paths are never empty")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkSet {
    crests: Vec<usize>,
    fundi: Vec<Vec<usize>>,
    directional: Vec<GeodesicPath>,
}

impl LandmarkSet {
    /// Validates indices, fundus chain adjacency and crest/fundus disjointness.
    pub fn new(mesh: &TriangleMesh, crests: Vec<usize>, fundi: Vec<Vec<usize>>) -> Result<Self> {
        let n = mesh.n_vertices();
        let crest_set: BTreeSet<usize> = crests.iter().copied().collect();
        if let Some(&bad) = crest_set.iter().find(|&&v| v >= n) {
            return Err(Error::Validation {
                element: "crest vertex",
                index: bad,
                message: format!("index out of range for {n} vertices"),
            });
        }
        for (line, chain) in fundi.iter().enumerate() {
            if chain.is_empty() {
                return Err(Error::Validation {
                    element: "fundus line",
                    index: line,
                    message: "empty chain".into(),
                });
            }
            if let Some(&bad) = chain.iter().find(|&&v| v >= n) {
                return Err(Error::Validation {
                    element: "fundus vertex",
                    index: bad,
                    message: format!("index out of range for {n} vertices"),
                });
            }
            for pair in chain.windows(2) {
                if mesh.neighbors(pair[0]).binary_search(&pair[1]).is_err() {
                    return Err(Error::Validation {
                        element: "fundus line",
                        index: line,
                        message: format!("consecutive vertices {} and {} are not adjacent", pair[0], pair[1]),
                    });
                }
            }
            if let Some(&bad) = chain.iter().find(|v| crest_set.contains(v)) {
                return Err(Error::Validation {
                    element: "fundus vertex",
                    index: bad,
                    message: "vertex is labelled both crest and fundus".into(),
                });
            }
        }
        Ok(Self {
            crests: crest_set.into_iter().collect(),
            fundi,
            directional: Vec::new(),
        })
    }

    /// Sorted, de-duplicated crest vertices.
    pub fn crests(&self) -> &[usize] {
        &self.crests
    }

    pub fn fundi(&self) -> &[Vec<usize>] {
        &self.fundi
    }

    pub fn fundus_vertices(&self) -> BTreeSet<usize> {
        self.fundi.iter().flatten().copied().collect()
    }

    pub fn directional(&self) -> &[GeodesicPath] {
        &self.directional
    }
}

pub fn load_landmarks(mesh: &TriangleMesh, crest_path: &Path, fundi_path: &Path) -> Result<LandmarkSet> {
    let crests = read_rows(crest_path, 1)?.into_iter().map(|r| r[0]).collect();
    let mut order: Vec<usize> = Vec::new();
    let mut lines: HashMap<usize, Vec<usize>> = HashMap::new();
    for row in read_rows(fundi_path, 2)? {
        lines
            .entry(row[1])
            .or_insert_with(|| {
                order.push(row[1]);
                Vec::new()
            })
            .push(row[0]);
    }
    let fundi = order.iter().map(|id| lines.remove(id).unwrap()).collect();
    LandmarkSet::new(mesh, crests, fundi)
}

/// Reads integer CSV rows; a non-numeric first line is taken as a header.
fn read_rows(path: &Path, columns: usize) -> Result<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<usize>, _> = fields.iter().map(|f| f.parse::<usize>()).collect();
        match parsed {
            Ok(values) if values.len() == columns => rows.push(values),
            Ok(values) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected {columns} columns, found {}", values.len()),
                })
            }
            Err(_) if i == 0 && fields.iter().any(|f| f.chars().any(char::is_alphabetic)) => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(rows)
}

pub fn save_landmarks(set: &LandmarkSet, crest_path: &Path, fundi_path: &Path) -> Result<()> {
    let mut crest = String::from("vertex_index\n");
    for v in set.crests() {
        writeln!(crest, "{v}").unwrap();
    }
    let mut fundi = String::from("vertex_index,line_id\n");
    for (id, chain) in set.fundi().iter().enumerate() {
        for v in chain {
            writeln!(fundi, "{v},{id}").unwrap();
        }
    }
    fs::write(crest_path, crest)?;
    fs::write(fundi_path, fundi)?;
    Ok(())
}

pub fn save_directional_lines(set: &LandmarkSet, path: &Path) -> Result<()> {
    let mut out = String::from("path_id,sequence_index,vertex_index\n");
    for (id, p) in set.directional().iter().enumerate() {
        for (k, v) in p.vertices.iter().enumerate() {
            writeln!(out, "{id},{k},{v}").unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed for a min-heap; equal distances pop the smaller index first
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source` to the nearest member of `targets`.
pub fn shortest_path(mesh: &TriangleMesh, source: usize, targets: &BTreeSet<usize>) -> Result<GeodesicPath> {
    let n = mesh.n_vertices();
    if targets.is_empty() {
        return Err(Error::Contract("shortest path needs at least one target".into()));
    }
    if source >= n || targets.iter().any(|&t| t >= n) {
        return Err(Error::Contract("path endpoint out of range".into()));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, vertex: source });
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if targets.contains(&v) {
            let mut vertices = vec![v];
            let mut cur = v;
            while cur != source {
                cur = pred[cur];
                vertices.push(cur);
            }
            vertices.reverse();
            return Ok(GeodesicPath { vertices, length: d });
        }
        for &w in mesh.neighbors(v) {
            if done[w] {
                continue;
            }
            let nd = d + mesh.edge_length(v, w);
            if nd < dist[w] || (nd == dist[w] && v < pred[w]) {
                dist[w] = nd;
                pred[w] = v;
                heap.push(Entry { dist: nd, vertex: w });
            }
        }
    }
    Err(Error::Unreachable {
        from: source,
        to: *targets.iter().next().unwrap(),
    })
}

/// Keeps the crest–fundus shortest paths that are nearest in both directions.
///
/// For each fundus line, every crest vertex is matched to its nearest vertex
/// of that line, and every vertex of the line to its nearest crest vertex;
/// the pairs found from both sides are retained. Paths run fundus → crest.
pub fn directional_lines(mesh: &TriangleMesh, landmarks: &LandmarkSet) -> Result<LandmarkSet> {
    if landmarks.crests.is_empty() || landmarks.fundi.is_empty() {
        return Err(Error::EmptyResult("directional lines need crests and fundi".into()));
    }
    let crest_set: BTreeSet<usize> = landmarks.crests.iter().copied().collect();
    let mut paths = Vec::new();
    let mut seen = BTreeSet::new();
    for line in &landmarks.fundi {
        let line_set: BTreeSet<usize> = line.iter().copied().collect();
        let mut from_crest = BTreeSet::new();
        for &c in &landmarks.crests {
            let p = shortest_path(mesh, c, &line_set)?;
            from_crest.insert((p.target(), c));
        }
        for &f in &line_set {
            let p = shortest_path(mesh, f, &crest_set)?;
            let pair = (f, p.target());
            if from_crest.contains(&pair) && seen.insert(pair) {
                paths.push(p);
            }
        }
    }
    if paths.is_empty() {
        return Err(Error::EmptyResult("no mutually nearest crest/fundus pairs".into()));
    }
    Ok(LandmarkSet {
        directional: paths,
        ..landmarks.clone()
    })
}
