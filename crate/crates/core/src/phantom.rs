//! Synthetic folded surfaces with analytically known crests and fundi.
//!
//! A sphere is displaced radially by `A·sin(f·θ)` (θ the polar angle),
//! which produces latitude rings of ridges (`sin = 1`) and valleys
//! (`sin = −1`). An optional per-axis stretch turns the sphere into an
//! ellipsoid so that curvature varies along the rings.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmarks::{shortest_path, LandmarkSet};
use crate::mesh::shapes::{icosphere_directions, planar_grid};
use crate::mesh::{Point, TriangleMesh, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// mm
    pub radius: f64,
    /// mm
    pub amplitude: f64,
    pub frequency: u32,
    pub subdivisions: u32,
    pub seed: u64,
    /// Random tangential displacement of the sample directions, as a
    /// fraction of the local edge length. Zero gives a regular icosphere.
    pub jitter: f64,
    /// Per-axis stretch applied after the radial displacement.
    pub axes: [f64; 3],
    /// Amplitude (mm) of uniform random radial noise added to every vertex.
    pub roughness: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            radius: 30.0,
            amplitude: 3.0,
            frequency: 6,
            subdivisions: 4,
            seed: 0,
            jitter: 0.0,
            axes: [1.0, 1.0, 1.0],
            roughness: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub mesh: TriangleMesh,
    /// `None` when the surface has no ridge or no valley ring.
    pub landmarks: Option<LandmarkSet>,
}

impl Phantom {
    pub fn landmarks(&self) -> Result<&LandmarkSet> {
        self.landmarks
            .as_ref()
            .ok_or_else(|| Error::EmptyResult("phantom has no crest or fundus candidates".into()))
    }
}

impl PhantomSpec {
    pub fn with_subdivisions(mut self, subdivisions: u32) -> Self {
        self.subdivisions = subdivisions;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::domain("phantom radius must be positive"));
        }
        if !(self.amplitude >= 0.0) || self.amplitude >= self.radius / 2.0 {
            return Err(Error::domain("phantom amplitude must lie in [0, radius/2)"));
        }
        if self.frequency < 1 {
            return Err(Error::domain("phantom frequency must be at least 1"));
        }
        if !(self.jitter >= 0.0) || self.jitter >= 0.5 {
            return Err(Error::domain("phantom jitter must lie in [0, 0.5)"));
        }
        if !(self.roughness >= 0.0) || self.roughness >= self.radius / 4.0 {
            return Err(Error::domain("phantom roughness must lie in [0, radius/4)"));
        }
        if self.axes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::domain("phantom axes must be positive"));
        }
        if self.subdivisions > 8 {
            return Err(Error::domain("phantom subdivision level above 8"));
        }
        Ok(())
    }

    fn point(&self, dir: &Vector, noise: f64) -> Point {
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let r = self.radius + self.amplitude * (self.frequency as f64 * theta).sin() + noise;
        let p = dir * r;
        Point::new(p.x * self.axes[0], p.y * self.axes[1], p.z * self.axes[2])
    }

    fn ring_point(&self, theta: f64, phi: f64, r: f64) -> Point {
        let d = Vector::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        Point::new(d.x * r * self.axes[0], d.y * r * self.axes[1], d.z * r * self.axes[2])
    }

    /// Polar angles of the ridge (`sin = 1`) or valley (`sin = −1`) rings,
    /// skipping rings too close to a pole to hold a closed chain.
    fn rings(&self, phase: f64, min_sin: f64) -> Vec<f64> {
        let f = self.frequency as f64;
        (0..self.frequency)
            .map(|k| (phase + 2.0 * PI * k as f64) / f)
            .filter(|&t| t < PI && t.sin() > min_sin)
            .collect()
    }

    pub fn generate(&self) -> Result<Phantom> {
        self.validate()?;
        let (mut dirs, faces) = icosphere_directions(self.subdivisions);
        let edge_angle = mean_edge(&dirs, &faces);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        if self.jitter > 0.0 {
            for d in &mut dirs {
                let helper = if d.x.abs() < 0.9 { Vector::x() } else { Vector::y() };
                let u = d.cross(&helper).normalize();
                let v = d.cross(&u);
                let angle = 2.0 * PI * rng.random::<f64>();
                let mag = self.jitter * edge_angle * rng.random::<f64>();
                *d = (*d + (u * angle.cos() + v * angle.sin()) * mag).normalize();
            }
        }
        let vertices = dirs
            .iter()
            .map(|d| {
                let noise = if self.roughness > 0.0 {
                    self.roughness * (2.0 * rng.random::<f64>() - 1.0)
                } else {
                    0.0
                };
                self.point(d, noise)
            })
            .collect();
        let mesh = TriangleMesh::new(vertices, faces)?;
        let landmarks = if self.amplitude > 0.0 {
            self.landmarks_for(&mesh, &dirs, edge_angle)?
        } else {
            None
        };
        Ok(Phantom {
            spec: *self,
            mesh,
            landmarks,
        })
    }

    fn landmarks_for(&self, mesh: &TriangleMesh, dirs: &[Vector], edge_angle: f64) -> Result<Option<LandmarkSet>> {
        let thetas: Vec<f64> = dirs.iter().map(|d| d.z.clamp(-1.0, 1.0).acos()).collect();
        let min_sin = 3.0 * edge_angle;
        let band = 3.0 * edge_angle;
        let half_edge = 0.5 * mesh.mean_edge_length();
        let samples = 2048;

        let mut crests = BTreeSet::new();
        for theta in self.rings(PI / 2.0, min_sin) {
            let curve: Vec<Point> = (0..samples)
                .map(|j| self.ring_point(theta, 2.0 * PI * j as f64 / samples as f64, self.radius + self.amplitude))
                .collect();
            for v in 0..mesh.n_vertices() {
                if (thetas[v] - theta).abs() > band {
                    continue;
                }
                let p = mesh.vertex(v);
                if curve.iter().any(|c| (c - p).norm() <= half_edge) {
                    crests.insert(v);
                }
            }
        }

        let mut fundi = Vec::new();
        for theta in self.rings(1.5 * PI, min_sin) {
            let ring_r = self.radius - self.amplitude;
            let candidates: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| (thetas[v] - theta).abs() <= band).collect();
            let circumference = 2.0 * PI * ring_r * theta.sin();
            let m = ((circumference / (3.0 * mesh.mean_edge_length())).round() as usize).max(6);
            let mut anchors: Vec<usize> = Vec::with_capacity(m);
            for j in 0..m {
                let c = self.ring_point(theta, 2.0 * PI * j as f64 / m as f64, ring_r);
                let nearest = *candidates
                    .iter()
                    .min_by(|&&a, &&b| (mesh.vertex(a) - c).norm().total_cmp(&(mesh.vertex(b) - c).norm()))
                    .expect("valley band is never empty");
                if anchors.last() != Some(&nearest) {
                    anchors.push(nearest);
                }
            }
            if anchors.len() > 1 && anchors[0] == *anchors.last().unwrap() {
                anchors.pop();
            }
            let mut chain = vec![anchors[0]];
            for k in 0..anchors.len() {
                let next = anchors[(k + 1) % anchors.len()];
                let path = shortest_path(mesh, *chain.last().unwrap(), &BTreeSet::from([next]))?;
                chain.extend_from_slice(&path.vertices[1..]);
            }
            // the loop closes on its first vertex
            chain.pop();
            fundi.push(chain);
        }

        let fundus: BTreeSet<usize> = fundi.iter().flatten().copied().collect();
        let crests: Vec<usize> = crests.difference(&fundus).copied().collect();
        if crests.is_empty() || fundi.is_empty() {
            return Ok(None);
        }
        Ok(Some(LandmarkSet::new(mesh, crests, fundi)?))
    }
}

fn mean_edge(dirs: &[Vector], faces: &[[usize; 3]]) -> f64 {
    let mut total = 0.0;
    for f in faces {
        for k in 0..3 {
            total += (dirs[f[k]] - dirs[f[(k + 1) % 3]]).norm();
        }
    }
    total / (3 * faces.len()) as f64
}

/// Population of phantoms whose size spans `size_span` and whose relative
/// wrinkle amplitude grows with size, ordered from smallest to largest.
pub fn phantom_family(count: usize, base: &PhantomSpec, size_span: f64, relative_amplitude: (f64, f64)) -> Vec<PhantomSpec> {
    (0..count)
        .map(|k| {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            let radius = base.radius * size_span.powf(t);
            let rel = relative_amplitude.0 + (relative_amplitude.1 - relative_amplitude.0) * t;
            PhantomSpec {
                radius,
                amplitude: rel * radius,
                seed: base.seed + k as u64,
                ..*base
            }
        })
        .collect()
}

/// Open heightfield patch with two parallel ridges along x and one valley
/// between them; crests are the ridge rows, the fundus is the valley row.
pub fn two_ridge_patch(nx: usize, ny: usize, h: f64) -> (TriangleMesh, LandmarkSet) {
    assert!(nx >= 2 && ny >= 5, "patch too small");
    let grid = planar_grid(nx, ny, h);
    let height = (ny - 1) as f64 * h;
    let amplitude = height / 8.0;
    let vertices = grid
        .vertices()
        .iter()
        .map(|p| Point::new(p.x, p.y, -amplitude * (4.0 * PI * p.y / height).cos()))
        .collect();
    let mesh = grid.with_positions(vertices);
    let row = |u: f64| ((ny - 1) as f64 * u).round() as usize;
    let crests = [row(0.25), row(0.75)]
        .iter()
        .flat_map(|&j| (0..nx).map(move |i| j * nx + i))
        .collect();
    let fundus = (0..nx).map(|i| row(0.5) * nx + i).collect();
    let set = LandmarkSet::new(&mesh, crests, vec![fundus]).expect("patch landmarks are valid");
    (mesh, set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_phantom_is_annotated() {
        let ph = PhantomSpec::default().generate().unwrap();
        assert!(ph.mesh.is_closed());
        assert_eq!(ph.mesh.n_vertices(), 2562);
        let lm = ph.landmarks().unwrap();
        assert!(lm.fundi().len() >= 3);
        assert!(!lm.crests().is_empty());
        for chain in lm.fundi() {
            let first = chain[0];
            let last = *chain.last().unwrap();
            assert!(ph.mesh.neighbors(last).contains(&first), "fundus loop is closed");
        }
    }

    #[test]
    fn landmarks_sit_on_the_extremal_rings() {
        let spec = PhantomSpec::default();
        let ph = spec.generate().unwrap();
        let lm = ph.landmarks().unwrap();
        let edge = ph.mesh.mean_edge_length();
        for &c in lm.crests() {
            let r = ph.mesh.vertex(c).coords.norm();
            assert!(r > spec.radius + spec.amplitude - edge, "crest radius {r}");
        }
        for &f in &lm.fundus_vertices() {
            let r = ph.mesh.vertex(f).coords.norm();
            assert!(r < spec.radius - spec.amplitude + edge, "fundus radius {r}");
        }
    }

    #[test]
    fn flat_phantom_has_no_landmarks() {
        let spec = PhantomSpec {
            amplitude: 0.0,
            ..PhantomSpec::default()
        };
        let ph = spec.with_subdivisions(2).generate().unwrap();
        assert!(ph.mesh.is_closed());
        assert!(matches!(ph.landmarks(), Err(Error::EmptyResult(_))));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = PhantomSpec {
            jitter: 0.2,
            axes: [1.1, 1.0, 0.9],
            roughness: 0.1,
            ..PhantomSpec::default()
        }
        .with_subdivisions(3);
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        assert_eq!(a.landmarks, b.landmarks);
        let c = spec.with_seed(1).generate().unwrap();
        assert_ne!(a.mesh.vertices(), c.mesh.vertices());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            PhantomSpec { radius: 0.0, ..PhantomSpec::default() },
            PhantomSpec { amplitude: 15.0, ..PhantomSpec::default() },
            PhantomSpec { frequency: 0, ..PhantomSpec::default() },
            PhantomSpec { axes: [1.0, -1.0, 1.0], ..PhantomSpec::default() },
            PhantomSpec { roughness: -0.1, ..PhantomSpec::default() },
        ] {
            assert!(matches!(spec.generate(), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn family_spans_sizes() {
        let fam = phantom_family(5, &PhantomSpec::default(), 4.0, (0.05, 0.1));
        assert_eq!(fam.len(), 5);
        assert!((fam[4].radius / fam[0].radius - 4.0).abs() < 1e-12);
        assert!(fam.windows(2).all(|w| w[1].amplitude / w[1].radius > w[0].amplitude / w[0].radius));
    }

    #[test]
    fn two_ridge_patch_layout() {
        let (m, lm) = two_ridge_patch(5, 33, 1.0);
        assert_eq!(lm.crests().len(), 10);
        assert_eq!(lm.fundi()[0].len(), 5);
        assert!(m.vertex(lm.crests()[0]).z > 0.0);
        assert!(m.vertex(lm.fundi()[0][0]).z < 0.0);
    }
}
