//! Discrete differential operators on triangle meshes.

use serde::{Deserialize, Serialize};

use crate::linalg::CsrMatrix;
use crate::mesh::{TriangleMesh, Unit, Vector, VertexField};

/// Cotangent values are clipped to this magnitude on near-degenerate triangles.
pub const COT_CLAMP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Stiffness,
    Mass,
}

/// Symmetric sparse operator over mesh vertices.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: CsrMatrix,
    kind: OperatorKind,
}

impl SparseOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }
}

fn cot(u: &Vector, v: &Vector) -> f64 {
    let cross = u.cross(v).norm();
    let d = u.dot(v);
    if cross == 0.0 {
        return if d >= 0.0 { COT_CLAMP } else { -COT_CLAMP };
    }
    (d / cross).clamp(-COT_CLAMP, COT_CLAMP)
}

/// Positive semidefinite cotangent stiffness matrix `S = −L`.
///
/// Off-diagonal entries are `−½(cot α + cot β)`; each diagonal entry is
/// minus the sum of its row's off-diagonal entries.
pub fn cotan_stiffness(mesh: &TriangleMesh) -> SparseOperator {
    let n = mesh.n_vertices();
    let mut weights: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.n_faces() * 3);
    for tri in mesh.faces() {
        for k in 0..3 {
            let (i, j, o) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let po = mesh.vertex(o);
            let w = 0.5 * cot(&(mesh.vertex(i) - po), &(mesh.vertex(j) - po));
            weights.push((i.min(j), i.max(j), w));
        }
    }
    // merge the two half-weights of each interior edge before forming the diagonal
    let edges = CsrMatrix::from_triplets(n, &weights);
    let mut triplets = Vec::with_capacity(edges.nnz() * 2 + n);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        for (j, w) in edges.row(i) {
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            diag[i] += w;
            diag[j] += w;
        }
    }
    triplets.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    SparseOperator {
        matrix: CsrMatrix::from_triplets(n, &triplets),
        kind: OperatorKind::Stiffness,
    }
}

/// Diagonal lumped mass matrix from barycentric vertex areas.
pub fn mass_matrix(mesh: &TriangleMesh) -> SparseOperator {
    SparseOperator {
        matrix: CsrMatrix::from_diagonal(mesh.vertex_areas().values()),
        kind: OperatorKind::Mass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    /// Per-face curvature tensor fitted from vertex-normal variation.
    #[default]
    Tensor,
    /// Half the norm of the cotangent Laplacian of positions over mixed Voronoi areas.
    CotanNormal,
}

impl std::str::FromStr for CurvatureMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tensor" => Ok(CurvatureMethod::Tensor),
            "cotan_normal" => Ok(CurvatureMethod::CotanNormal),
            other => Err(format!("unknown curvature method '{other}'")),
        }
    }
}

/// Which side of the surface counts as positive curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Positive where the surface bulges along its outward normal.
    ConvexPositive,
}

/// Per-vertex mean curvature in mm⁻¹.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub field: VertexField,
    pub method: CurvatureMethod,
    pub convention: SignConvention,
}

impl CurvatureField {
    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// Wraps user-supplied curvature values.
    pub fn from_values(mesh: &TriangleMesh, values: Vec<f64>, method: CurvatureMethod) -> crate::Result<Self> {
        Ok(Self {
            field: VertexField::for_mesh(mesh, values, Unit::InverseMillimeter)?,
            method,
            convention: SignConvention::ConvexPositive,
        })
    }
}

pub fn mean_curvature(mesh: &TriangleMesh, method: CurvatureMethod) -> CurvatureField {
    let values = match method {
        CurvatureMethod::Tensor => tensor_mean_curvature(mesh),
        CurvatureMethod::CotanNormal => cotan_mean_curvature(mesh),
    };
    CurvatureField {
        field: VertexField::new(values, Unit::InverseMillimeter).expect("curvature is finite"),
        method,
        convention: SignConvention::ConvexPositive,
    }
}

fn cotan_mean_curvature(mesh: &TriangleMesh) -> Vec<f64> {
    let s = cotan_stiffness(mesh);
    let mut areas = vec![0.0; mesh.n_vertices()];
    for (f, tri) in mesh.faces().iter().enumerate() {
        for (k, w) in corner_areas(mesh, f).into_iter().enumerate() {
            areas[tri[k]] += w;
        }
    }
    let normals = mesh.vertex_normals();
    let boundary = mesh.boundary_vertices();
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|c| mesh.vertices().iter().map(|p| p[c]).collect())
        .collect();
    let lap: Vec<Vec<f64>> = coords.iter().map(|x| s.apply(x)).collect();
    (0..mesh.n_vertices())
        .map(|i| {
            let a = areas[i];
            if a <= 0.0 {
                return 0.0;
            }
            let hn = Vector::new(lap[0][i], lap[1][i], lap[2][i]) / a;
            let along = hn.dot(&normals[i]);
            if boundary[i] {
                // only the normal component is geometric on a boundary
                0.5 * along
            } else {
                0.5 * hn.norm().copysign(along)
            }
        })
        .collect()
}

/// Mixed Voronoi area of each corner of face `f`.
fn corner_areas(mesh: &TriangleMesh, f: usize) -> [f64; 3] {
    let tri = mesh.faces()[f];
    let p = [mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])];
    let area = mesh.face_area(f);
    let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]]; // edge opposite corner k
    let l2 = [e[0].norm_squared(), e[1].norm_squared(), e[2].norm_squared()];
    let obtuse = (0..3).find(|&k| l2[k] > l2[(k + 1) % 3] + l2[(k + 2) % 3]);
    match obtuse {
        Some(k) => {
            let mut w = [area / 4.0; 3];
            w[k] = area / 2.0;
            w
        }
        None => {
            let cots = [
                cot(&(p[1] - p[0]), &(p[2] - p[0])),
                cot(&(p[2] - p[1]), &(p[0] - p[1])),
                cot(&(p[0] - p[2]), &(p[1] - p[2])),
            ];
            // corner k touches edges opposite k+1 and k+2
            std::array::from_fn(|k| {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                (l2[a] * cots[a] + l2[b] * cots[b]) / 8.0
            })
        }
    }
}

/// Vertex normals with Max's weights, exact for vertices on a sphere.
fn max_weighted_normals(mesh: &TriangleMesh) -> Vec<Vector> {
    let mut normals = vec![Vector::zeros(); mesh.n_vertices()];
    for tri in mesh.faces() {
        for k in 0..3 {
            let p = mesh.vertex(tri[k]);
            let a = mesh.vertex(tri[(k + 1) % 3]) - p;
            let b = mesh.vertex(tri[(k + 2) % 3]) - p;
            let w = a.norm_squared() * b.norm_squared();
            if w > 0.0 {
                normals[tri[k]] += a.cross(&b) / w;
            }
        }
    }
    for n in &mut normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    normals
}

fn tensor_mean_curvature(mesh: &TriangleMesh) -> Vec<f64> {
    let normals = max_weighted_normals(mesh);
    let mut sum = vec![0.0; mesh.n_vertices()];
    let mut weight = vec![0.0; mesh.n_vertices()];
    for (f, tri) in mesh.faces().iter().enumerate() {
        let nf = mesh.face_normal(f);
        if nf.norm_squared() == 0.0 {
            continue;
        }
        let u = (mesh.vertex(tri[1]) - mesh.vertex(tri[0])).normalize();
        let v = nf.cross(&u);
        // least squares for II = [[a, b], [b, c]] from II·e = Δn on each edge
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for k in 0..3 {
            let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let e = mesh.vertex(j) - mesh.vertex(i);
            let dn = normals[j] - normals[i];
            let (eu, ev) = (e.dot(&u), e.dot(&v));
            let rows = [
                (nalgebra::Vector3::new(eu, ev, 0.0), dn.dot(&u)),
                (nalgebra::Vector3::new(0.0, eu, ev), dn.dot(&v)),
            ];
            for (r, rhs) in rows {
                ata += r * r.transpose();
                atb += r * rhs;
            }
        }
        let Some(sol) = ata.cholesky().map(|c| c.solve(&atb)) else {
            continue;
        };
        let h = 0.5 * (sol[0] + sol[2]);
        // trace is invariant under the rotation into each vertex frame
        for (k, w) in corner_areas(mesh, f).into_iter().enumerate() {
            sum[tri[k]] += w * h;
            weight[tri[k]] += w;
        }
    }
    sum.iter()
        .zip(&weight)
        .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
        .collect()
}

/// Per-vertex gradient: per-face linear gradients averaged with face-area weights.
pub fn field_gradient(mesh: &TriangleMesh, field: &[f64]) -> crate::Result<Vec<Vector>> {
    if field.len() != mesh.n_vertices() {
        return Err(crate::Error::Contract(format!(
            "field has {} values but mesh has {} vertices",
            field.len(),
            mesh.n_vertices()
        )));
    }
    let mut grad = vec![Vector::zeros(); mesh.n_vertices()];
    let mut weight = vec![0.0; mesh.n_vertices()];
    for (f, &[i, j, k]) in mesh.faces().iter().enumerate() {
        let area_vec = mesh.face_area_vector(f);
        let twice_area = area_vec.norm();
        if twice_area == 0.0 {
            continue;
        }
        let n = area_vec / twice_area;
        let (pi, pj, pk) = (mesh.vertex(i), mesh.vertex(j), mesh.vertex(k));
        let grad_j = n.cross(&(pi - pk)) / twice_area;
        let grad_k = n.cross(&(pj - pi)) / twice_area;
        let g = grad_j * (field[j] - field[i]) + grad_k * (field[k] - field[i]);
        let a = 0.5 * twice_area;
        for v in [i, j, k] {
            grad[v] += g * a;
            weight[v] += a;
        }
    }
    for (g, w) in grad.iter_mut().zip(&weight) {
        if *w > 0.0 {
            *g /= *w;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{icosphere, planar_grid, tetrahedron};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn interior(mesh: &TriangleMesh) -> Vec<usize> {
        let b = mesh.boundary_vertices();
        (0..mesh.n_vertices()).filter(|&i| !b[i]).collect()
    }

    /// Dense generalized eigenvalues of (S, M) with diagonal M.
    fn dense_spectrum(mesh: &TriangleMesh) -> Vec<f64> {
        let s = cotan_stiffness(mesh).matrix().to_dense();
        let m = mass_matrix(mesh).diagonal();
        let n = m.len();
        let c = DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (m[i] * m[j]).sqrt());
        let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn linear_function_is_harmonic_on_grid() {
        let m = planar_grid(9, 9, 0.5);
        let s = cotan_stiffness(&m);
        let x: Vec<f64> = m.vertices().iter().map(|p| p.x).collect();
        let sx = s.apply(&x);
        for i in interior(&m) {
            assert!(sx[i].abs() < 1e-9, "vertex {i}: {}", sx[i]);
        }
    }

    #[test]
    fn constants_in_null_space() {
        for m in [tetrahedron(), icosphere(2, 3.0), planar_grid(5, 4, 1.0)] {
            let s = cotan_stiffness(&m);
            let scale = s.matrix().max_abs();
            for v in s.apply(&vec![1.0; m.n_vertices()]) {
                assert!(v.abs() <= 1e-14 * scale);
            }
            assert!(s.matrix().is_symmetric(0.0));
        }
    }

    #[test]
    fn stiffness_is_psd() {
        let ev = dense_spectrum(&icosphere(2, 1.0));
        assert!(ev[0] >= -1e-10 * ev.last().unwrap());
    }

    #[test]
    fn sphere_first_nonzero_eigenvalue() {
        let ev = dense_spectrum(&icosphere(3, 1.0));
        assert!(ev[0].abs() < 1e-8);
        for &l1 in &ev[1..4] {
            assert!((l1 - 2.0).abs() / 2.0 < 0.05, "{l1}");
        }
    }

    #[test]
    fn spectrum_scales_inverse_square() {
        let m = icosphere(2, 1.0);
        let base = dense_spectrum(&m);
        let scaled = dense_spectrum(&m.scale(3.0).unwrap());
        for k in 1..11 {
            assert_relative_eq!(scaled[k], base[k] / 9.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn mass_matrix_properties() {
        let m = icosphere(2, 2.0);
        let mm = mass_matrix(&m);
        assert_eq!(mm.kind(), OperatorKind::Mass);
        assert_relative_eq!(mm.matrix().trace(), m.total_area(), max_relative = 1e-10);
        let scaled = mass_matrix(&m.scale(1.7).unwrap());
        for (a, b) in scaled.diagonal().iter().zip(mm.diagonal()) {
            assert_relative_eq!(*a, 1.7 * 1.7 * b, max_relative = 1e-12);
        }
        let t = mass_matrix(&tetrahedron());
        assert_eq!(t.matrix().nnz(), 4);
        assert!(t.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn sphere_mean_curvature_both_methods() {
        let m = icosphere(3, 2.0);
        for method in [CurvatureMethod::Tensor, CurvatureMethod::CotanNormal] {
            let k = mean_curvature(&m, method);
            for &h in k.values() {
                assert!((h - 0.5).abs() / 0.5 < 0.05, "{method:?}: {h}");
            }
        }
    }

    #[test]
    fn plane_has_zero_curvature() {
        let m = planar_grid(8, 8, 0.7);
        for method in [CurvatureMethod::Tensor, CurvatureMethod::CotanNormal] {
            let k = mean_curvature(&m, method);
            for i in interior(&m) {
                assert!(k.values()[i].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn curvature_scales_inversely() {
        let m = crate::phantom::PhantomSpec::default().with_subdivisions(3).generate().unwrap().mesh;
        for method in [CurvatureMethod::CotanNormal, CurvatureMethod::Tensor] {
            let k = mean_curvature(&m, method);
            let ks = mean_curvature(&m.scale(2.5).unwrap(), method);
            for (a, b) in ks.values().iter().zip(k.values()) {
                assert_relative_eq!(*a, b / 2.5, max_relative = 1e-8, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gradient_of_linear_field_on_grid() {
        let m = planar_grid(7, 6, 0.3);
        let f: Vec<f64> = m.vertices().iter().map(|p| 2.0 * p.x).collect();
        let g = field_gradient(&m, &f).unwrap();
        for i in 0..m.n_vertices() {
            assert!((g[i] - Vector::new(2.0, 0.0, 0.0)).norm() < 1e-9);
        }
        let zero = field_gradient(&m, &vec![3.25; m.n_vertices()]).unwrap();
        assert!(zero.iter().all(|g| *g == Vector::zeros()));
    }

    #[test]
    fn gradient_on_sphere_is_tangential_projection() {
        let m = icosphere(3, 1.0);
        let f: Vec<f64> = m.vertices().iter().map(|p| p.x).collect();
        let g = field_gradient(&m, &f).unwrap();
        let ex = Vector::x();
        for (i, p) in m.vertices().iter().enumerate() {
            let n = p.coords.normalize();
            let expect = ex - n * n.dot(&ex);
            if expect.norm() < 0.2 {
                continue; // direction is ill-defined near the poles of x
            }
            let angle = g[i].angle(&expect).to_degrees();
            assert!(angle < 5.0, "vertex {i}: {angle}°");
        }
    }

    #[test]
    fn gradient_length_mismatch() {
        let m = tetrahedron();
        assert!(field_gradient(&m, &[1.0]).is_err());
    }
}
