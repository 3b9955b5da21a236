//! Shape descriptors of the ROI mask.
//!
//! Surface area and mesh volume come from the marching-cubes surface. Axis
//! lengths use the eigenvalues λ1 ≥ λ2 ≥ λ3 of the covariance of voxel-centre
//! positions (mm): axis length = 4√λ, Elongation = √(λ2/λ1), Flatness =
//! √(λ3/λ1); both are 1 when λ1 = 0. Diameters are the largest
//! centre-to-centre distances between surface voxels: over the whole ROI
//! (3D), within one axial slice (constant z), within one column plane
//! (constant x) and within one row plane (constant y).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::mesh::mesh_stats;
use crate::error::{Error, Result};
use crate::grid::LabelMask;
use crate::linalg::symmetric_eigenvalues;
use crate::math;

pub const NAMES: [&str; 14] = [
    "MeshVolume",
    "VoxelVolume",
    "SurfaceArea",
    "SurfaceVolumeRatio",
    "Sphericity",
    "Maximum3DDiameter",
    "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn",
    "Maximum2DDiameterRow",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
];

pub fn shape_features(mask: &LabelMask) -> Result<[f64; 14]> {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let sp = g.spacing;
    let inside: Vec<bool> = mask.labels().iter().map(|&l| l != 0).collect();
    let count = inside.iter().filter(|&&b| b).count();
    if count == 0 {
        return Err(Error::EmptyRoi);
    }

    let mesh = mesh_stats(&inside, g.dims, sp);
    let voxel_volume = count as f64 * g.voxel_volume();
    let sphericity = math::cbrt(36.0 * core::f64::consts::PI * mesh.volume * mesh.volume) / mesh.area;

    // Covariance of voxel centres.
    let mut sum = [0.0f64; 3];
    let mut centres: Vec<[f64; 3]> = Vec::with_capacity(count);
    let mut surface: Vec<[usize; 3]> = Vec::new();
    let is_in = |x: isize, y: isize, z: isize| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && inside[g.index(x as usize, y as usize, z as usize)]
    };
    for (i, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
        let [x, y, z] = g.coords(i);
        let p = [x as f64 * sp[0], y as f64 * sp[1], z as f64 * sp[2]];
        for k in 0..3 {
            sum[k] += p[k];
        }
        centres.push(p);
        let (xi, yi, zi) = (x as isize, y as isize, z as isize);
        let exposed = !is_in(xi - 1, yi, zi)
            || !is_in(xi + 1, yi, zi)
            || !is_in(xi, yi - 1, zi)
            || !is_in(xi, yi + 1, zi)
            || !is_in(xi, yi, zi - 1)
            || !is_in(xi, yi, zi + 1);
        if exposed {
            surface.push([x, y, z]);
        }
    }
    let n = count as f64;
    let mean = [sum[0] / n, sum[1] / n, sum[2] / n];
    let mut cov = [0.0f64; 9];
    for p in &centres {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[r * 3 + c] += d[r] * d[c];
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n);
    let eig = symmetric_eigenvalues(&cov, 3);
    let (l1, l2, l3) = (eig[0].max(0.0), eig[1].max(0.0), eig[2].max(0.0));
    let (elongation, flatness) = if l1 > 0.0 { (math::sqrt(l2 / l1), math::sqrt(l3 / l1)) } else { (1.0, 1.0) };

    let physical = |v: &[usize; 3]| [v[0] as f64 * sp[0], v[1] as f64 * sp[1], v[2] as f64 * sp[2]];
    let pts: Vec<[f64; 3]> = surface.iter().map(physical).collect();
    let diameter_3d = max_distance(&pts);
    let planar = |axis: usize| -> f64 {
        let mut groups: BTreeMap<usize, Vec<[f64; 3]>> = BTreeMap::new();
        for (v, p) in surface.iter().zip(&pts) {
            groups.entry(v[axis]).or_default().push(*p);
        }
        groups.values().map(|g| max_distance(g)).fold(0.0, f64::max)
    };

    Ok([
        mesh.volume,
        voxel_volume,
        mesh.area,
        mesh.area / mesh.volume,
        sphericity,
        diameter_3d,
        planar(2),
        planar(0),
        planar(1),
        4.0 * math::sqrt(l1),
        4.0 * math::sqrt(l2),
        4.0 * math::sqrt(l3),
        elongation,
        flatness,
    ])
}

fn max_distance(points: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
            best = best.max(d);
        }
    }
    math::sqrt(best)
}
