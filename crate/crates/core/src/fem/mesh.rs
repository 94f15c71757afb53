use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Triangulation of the unit square.
///
/// Interior vertices come first (indices `0..num_interior()`), boundary
/// vertices after them, so interior vertex `i` is P1 unknown `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
}

/// Edge `(a, b)` with `a < b` and its one or two adjacent triangles.
#[derive(Debug, Clone)]
pub struct MeshEdge {
    pub vertices: [usize; 2],
    pub triangles: Vec<usize>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }
}

const ON_BOUNDARY_TOL: f64 = 1e-12;

fn on_square_boundary(p: [f64; 2]) -> bool {
    p[0] < ON_BOUNDARY_TOL || p[1] < ON_BOUNDARY_TOL || p[0] > 1.0 - ON_BOUNDARY_TOL || p[1] > 1.0 - ON_BOUNDARY_TOL
}

impl TriMesh {
    /// Validates and reorders vertices so interior ones come first.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let boundary: Vec<bool> = vertices.iter().map(|&p| on_square_boundary(p)).collect();
        let mut order: Vec<usize> = (0..nv).filter(|&i| !boundary[i]).collect();
        order.extend((0..nv).filter(|&i| boundary[i]));
        let mut new_index = vec![0; nv];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for t in triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput("triangle index out of range".into()));
            }
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            let mut t = t.map(|v| new_index[v]);
            if a.abs() < 1e-14 {
                continue;
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
            tris.push(t);
        }
        let vertices: Vec<[f64; 2]> = order.iter().map(|&o| vertices[o]).collect();
        let boundary_vertex = order.iter().map(|&o| boundary[o]).collect();
        let mesh = Self {
            vertices,
            triangles: tris,
            boundary_vertex,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Checks orientation, index range, boundary flags and area coverage.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.boundary_vertex.len() != nv {
            return Err(Error::InvalidInput("boundary flag count".into()));
        }
        for (i, &p) in self.vertices.iter().enumerate() {
            if on_square_boundary(p) != self.boundary_vertex[i] {
                return Err(Error::InvalidInput(format!("vertex {i} has a wrong boundary flag")));
            }
        }
        let mut total = 0.0;
        for t in &self.triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput("triangle index out of range".into()));
            }
            let a = self.area(t);
            if a <= 0.0 {
                return Err(Error::InvalidInput("triangle with non-positive area".into()));
            }
            total += a;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("triangles cover area {total}, expected 1")));
        }
        Ok(())
    }

    /// Uniform right-triangle grid with `m` intervals per side; every square
    /// is split along its `(i, j)–(i+1, j+1)` diagonal.
    pub fn structured(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("structured mesh needs at least 2 intervals".into()));
        }
        let h = 1.0 / m as f64;
        let id = |i: usize, j: usize| j * (m + 1) + i;
        let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::from_parts(vertices, triangles)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_interior(&self) -> usize {
        self.boundary_vertex.iter().filter(|b| !**b).count()
    }

    pub fn area(&self, t: &[usize; 3]) -> f64 {
        signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]])
    }

    /// Unique edges with adjacency, sorted by vertex pair.
    pub fn edges(&self) -> Vec<MeshEdge> {
        let mut map: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                map.entry([a.min(b), a.max(b)]).or_default().push(ti);
            }
        }
        let mut edges: Vec<MeshEdge> = map
            .into_iter()
            .map(|(vertices, triangles)| MeshEdge { vertices, triangles })
            .collect();
        edges.sort_by_key(|e| e.vertices);
        edges
    }

    /// Short content hash of the geometry, used as a mesh identifier.
    pub fn mesh_id(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        for t in &self.triangles {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

const INTERIOR_JITTER: f64 = 0.3;
const EXTRA_JITTER: f64 = 0.1;

/// Delaunay mesh of the unit square with exactly `target_interior_nodes`
/// interior vertices when reachable.
///
/// A `k × k` cell-centred grid (`k = ⌊√target⌋`) is jittered by `0.3/k`;
/// remaining nodes are placed at jittered interior lattice corners. Boundary
/// sides carry `k` segments each. If the remainder does not fit, the mesh
/// falls back to the `k × k` grid and the shortfall is logged.
pub fn generate_mesh(target_interior_nodes: usize, seed: u64) -> Result<TriMesh> {
    if target_interior_nodes == 0 {
        return Err(Error::InvalidInput("target_interior_nodes must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let k = (target_interior_nodes as f64).sqrt().floor() as usize;
    let k = if (k + 1) * (k + 1) <= target_interior_nodes {
        k + 1
    } else {
        k
    };
    let h = 1.0 / k as f64;

    let mut points: Vec<[f64; 2]> = Vec::with_capacity(target_interior_nodes + 4 * k);
    for j in 0..k {
        for i in 0..k {
            let dx = rng.random_range(-INTERIOR_JITTER..=INTERIOR_JITTER) * h;
            let dy = rng.random_range(-INTERIOR_JITTER..=INTERIOR_JITTER) * h;
            points.push([(i as f64 + 0.5) * h + dx, (j as f64 + 0.5) * h + dy]);
        }
    }
    let extra = target_interior_nodes - k * k;
    let lattice = (k - 1) * (k - 1);
    if extra > lattice {
        log::warn!(
            "mesh target {target_interior_nodes} unreachable with {k}x{k} grid; using {} interior nodes",
            k * k
        );
    } else if extra > 0 {
        for idx in sample(&mut rng, lattice, extra).into_vec().into_iter() {
            let (i, j) = (idx % (k - 1) + 1, idx / (k - 1) + 1);
            let dx = rng.random_range(-EXTRA_JITTER..=EXTRA_JITTER) * h;
            let dy = rng.random_range(-EXTRA_JITTER..=EXTRA_JITTER) * h;
            points.push([i as f64 * h + dx, j as f64 * h + dy]);
        }
    }
    for i in 0..k {
        let s = i as f64 * h;
        points.push([s, 0.0]);
        points.push([1.0, s]);
        points.push([1.0 - s, 1.0]);
        points.push([0.0, 1.0 - s]);
    }
    triangulate(points)
}

fn triangulate(points: Vec<[f64; 2]>) -> Result<TriMesh> {
    let dpts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&dpts);
    let triangles = tri.triangles.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    TriMesh::from_parts(points, triangles)
}

/// Interior-node target whose quadratic interior-penalty system has a
/// dimension closest to `target_dofs`.
///
/// For the generated meshes (`4k` boundary vertices, `V` interior vertices)
/// the number of interior P2 unknowns is `4V + 4k - 3` by Euler's formula.
pub fn interior_nodes_for_p2_dofs(target_dofs: usize) -> usize {
    let dofs = |v: usize| {
        let k = (v as f64).sqrt().floor() as usize;
        let k = if (k + 1) * (k + 1) <= v { k + 1 } else { k };
        4 * v + 4 * k - 3
    };
    (1..=target_dofs.max(2))
        .min_by_key(|&v| dofs(v).abs_diff(target_dofs))
        .unwrap_or(1)
}
