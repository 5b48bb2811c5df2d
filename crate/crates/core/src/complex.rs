//! Finite cellular complexes reduced to their vertex/face adherence.
//!
//! Only vertices and top-dimensional faces are stored. Every quantity of the
//! discrete variational theory is indexed by (vertex, face) pairs with the
//! vertex adherent to the face, so intermediate cells never need to exist.
//!
//! The triangulated-plane builder uses a row-major layout:
//! vertex `(i, j)` has id `j * (W + 1) + i` and face `Δ_ij` has id `j * W + i`.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{invalid, Result};

pub type VertexId = usize;
pub type FaceId = usize;

/// Shape of a triangulated grid with `width × height` faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
}

impl GridShape {
    pub fn vertex_id(&self, i: usize, j: usize) -> Option<VertexId> {
        (i <= self.width && j <= self.height).then(|| j * (self.width + 1) + i)
    }

    pub fn face_id(&self, i: usize, j: usize) -> Option<FaceId> {
        (i < self.width && j < self.height).then(|| j * self.width + i)
    }

    pub fn vertex_coords(&self, v: VertexId) -> (usize, usize) {
        (v % (self.width + 1), v / (self.width + 1))
    }

    pub fn face_coords(&self, f: FaceId) -> (usize, usize) {
        (f % self.width, f / self.width)
    }
}

/// Immutable vertex/face incidence structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComplex {
    vertex_count: usize,
    adherence: Vec<Vec<VertexId>>,
    star: Vec<Vec<FaceId>>,
    /// Vertices whose spherical neighborhood extends past the stored faces.
    truncated: Vec<bool>,
    grid: Option<GridShape>,
}

/// Transpose an incidence list: `lists[a]` contains `b` iff the result's `[b]` contains `a`.
pub fn transpose_incidence(lists: &[Vec<usize>], target_count: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); target_count];
    for (a, list) in lists.iter().enumerate() {
        for &b in list {
            out[b].push(a);
        }
    }
    out
}

impl CellComplex {
    /// Build a complex from per-face adherence lists.
    pub fn from_adherence(vertex_count: usize, adherence: Vec<Vec<VertexId>>) -> Result<Self> {
        for (f, list) in adherence.iter().enumerate() {
            if list.is_empty() {
                return Err(invalid(format!("face {f} has no adherent vertex")));
            }
            let mut seen = BTreeSet::new();
            for &v in list {
                if v >= vertex_count {
                    return Err(invalid(format!("face {f} references unknown vertex {v}")));
                }
                if !seen.insert(v) {
                    return Err(invalid(format!("face {f} lists vertex {v} twice")));
                }
            }
        }
        let star = transpose_incidence(&adherence, vertex_count);
        Ok(Self { vertex_count, adherence, star, truncated: vec![false; vertex_count], grid: None })
    }

    /// Triangulated plane window with faces `Δ_ij = [(i,j), (i+1,j), (i,j+1)]`.
    pub fn build_triangulated_grid(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("grid dimensions must be positive, got {width}x{height}")));
        }
        let shape = GridShape { width, height };
        let vid = |i, j| shape.vertex_id(i, j).expect("in range");
        let mut adherence = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                adherence.push(vec![vid(i, j), vid(i + 1, j), vid(i, j + 1)]);
            }
        }
        let mut complex = Self::from_adherence((width + 1) * (height + 1), adherence)?;
        // The window sits inside the unbounded plane: its edge vertices are
        // adherent to faces that exist but are not stored.
        for v in complex.vertices() {
            let (i, j) = shape.vertex_coords(v);
            complex.truncated[v] = i == 0 || j == 0 || i == width || j == height;
        }
        complex.grid = Some(shape);
        Ok(complex)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_count(&self) -> usize {
        self.adherence.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.vertex_count
    }

    pub fn faces(&self) -> impl Iterator<Item = FaceId> {
        0..self.adherence.len()
    }

    /// Adherent vertices of a face, in the complex's fixed order.
    pub fn adherence(&self, face: FaceId) -> &[VertexId] {
        &self.adherence[face]
    }

    /// The spherical neighborhood `S_v`: faces having `v` adherent.
    pub fn star(&self, vertex: VertexId) -> &[FaceId] {
        &self.star[vertex]
    }

    /// Whether `S_v` contains faces outside this complex (a window boundary).
    pub fn is_truncated(&self, vertex: VertexId) -> bool {
        self.truncated[vertex]
    }

    /// Position of `vertex` inside the adherence list of `face`.
    pub fn local_index(&self, face: FaceId, vertex: VertexId) -> Option<usize> {
        self.adherence[face].iter().position(|&v| v == vertex)
    }

    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    /// Rebuild the adherence lists from the star lists.
    pub fn adherence_from_star(&self) -> Vec<Vec<VertexId>> {
        transpose_incidence(&self.star, self.face_count())
    }

    /// Write one record per face: `face <id> <vertex ids...>`.
    pub fn write_faces<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lielag-complex 1")?;
        writeln!(out, "vertices {}", self.vertex_count)?;
        writeln!(out, "faces {}", self.face_count())?;
        for (f, list) in self.adherence.iter().enumerate() {
            write!(out, "face {f}")?;
            for v in list {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A finite set of faces `𝒱` together with its adherent vertices `𝒱_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet {
    faces: BTreeSet<FaceId>,
    adherent_vertices: BTreeSet<VertexId>,
}

impl FaceSet {
    pub fn new(complex: &CellComplex, faces: impl IntoIterator<Item = FaceId>) -> Result<Self> {
        let faces: BTreeSet<FaceId> = faces.into_iter().collect();
        if let Some(&bad) = faces.iter().find(|&&f| f >= complex.face_count()) {
            return Err(invalid(format!("face {bad} is not in the complex")));
        }
        let adherent_vertices = faces
            .iter()
            .flat_map(|&f| complex.adherence(f).iter().copied())
            .collect();
        Ok(Self { faces, adherent_vertices })
    }

    pub fn all(complex: &CellComplex) -> Self {
        Self::new(complex, complex.faces()).expect("faces of the complex")
    }

    pub fn faces(&self) -> &BTreeSet<FaceId> {
        &self.faces
    }

    pub fn adherent_vertices(&self) -> &BTreeSet<VertexId> {
        &self.adherent_vertices
    }

    pub fn contains(&self, face: FaceId) -> bool {
        self.faces.contains(&face)
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

/// Interior / frontier split of `𝒱_0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexClass {
    pub interior: BTreeSet<VertexId>,
    pub frontier: BTreeSet<VertexId>,
}

impl VertexClass {
    pub fn is_interior(&self, v: VertexId) -> bool {
        self.interior.contains(&v)
    }

    pub fn is_frontier(&self, v: VertexId) -> bool {
        self.frontier.contains(&v)
    }
}

/// A vertex is interior when its whole star lies in the face set, frontier when
/// only part of it does.
pub fn classify_vertices(complex: &CellComplex, faceset: &FaceSet) -> Result<VertexClass> {
    if let Some(&bad) = faceset.faces().iter().find(|&&f| f >= complex.face_count()) {
        return Err(invalid(format!("face {bad} is not in the complex")));
    }
    let mut class = VertexClass::default();
    for &v in faceset.adherent_vertices() {
        if !complex.is_truncated(v) && complex.star(v).iter().all(|f| faceset.contains(*f)) {
            class.interior.insert(v);
        } else {
            class.frontier.insert(v);
        }
    }
    Ok(class)
}
