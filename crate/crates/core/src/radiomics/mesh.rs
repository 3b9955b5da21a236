//! Iso-0.5 marching-cubes surface of a binary mask.
//!
//! Instead of the usual 256-entry triangle table, each cube configuration is
//! polygonised by tracing the iso-contour around the cube's six faces: every
//! face contributes segments between its sign-changing edges, and the
//! segments close into loops. A face with two diagonal inside corners is
//! resolved by cutting off each inside corner. The rule depends only on the
//! face itself, so neighbouring cubes agree and the surface is closed.
//! With binary input every vertex sits at an edge midpoint.

use alloc::vec::Vec;

use crate::grid::Dims;
use crate::math;

/// Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> [f64; 3] {
    [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64]
}

fn edges() -> [(usize, usize); 12] {
    let mut out = [(0, 0); 12];
    let mut k = 0;
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                out[k] = (c, c | (1 << axis));
                k += 1;
            }
        }
    }
    out
}

fn edge_id(edges: &[(usize, usize); 12], a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    edges.iter().position(|&e| e == key).expect("corners share an edge")
}

/// The six faces as cyclic corner quadruples.
fn faces() -> [[usize; 4]; 6] {
    let mut out = [[0; 4]; 6];
    let mut k = 0;
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let base = side << axis;
            out[k] = [base, base | (1 << b), base | (1 << b) | (1 << c), base | (1 << c)];
            k += 1;
        }
    }
    out
}

type Polygon = Vec<usize>;

/// Oriented polygons (as edge ids) for every corner configuration.
fn polygon_table() -> Vec<Vec<Polygon>> {
    let edges = edges();
    let faces = faces();
    let mut table = Vec::with_capacity(256);
    for config in 0usize..256 {
        let inside = |c: usize| config & (1 << c) != 0;
        let mut links: [Vec<usize>; 12] = Default::default();
        for face in &faces {
            let crossing: Vec<usize> = (0..4).filter(|&k| inside(face[k]) != inside(face[(k + 1) % 4])).collect();
            let mut connect = |k0: usize, k1: usize| {
                let e0 = edge_id(&edges, face[k0], face[(k0 + 1) % 4]);
                let e1 = edge_id(&edges, face[k1], face[(k1 + 1) % 4]);
                links[e0].push(e1);
                links[e1].push(e0);
            };
            match crossing.len() {
                0 => {}
                2 => connect(crossing[0], crossing[1]),
                4 => {
                    // Cut off each inside corner: corner k touches face edges k−1 and k.
                    for k in 0..4 {
                        if inside(face[k]) {
                            connect((k + 3) % 4, k);
                        }
                    }
                }
                _ => unreachable!("a face has an even number of crossings"),
            }
        }
        let mut visited = [false; 12];
        let mut polygons = Vec::new();
        for start in 0..12 {
            if visited[start] || links[start].is_empty() {
                continue;
            }
            let mut poly = alloc::vec![start];
            visited[start] = true;
            let (mut prev, mut cur) = (start, links[start][0]);
            while cur != start {
                poly.push(cur);
                visited[cur] = true;
                let next = if links[cur][0] != prev { links[cur][0] } else { links[cur][1] };
                prev = cur;
                cur = next;
            }
            orient_outward(&mut poly, &edges, &inside);
            polygons.push(poly);
        }
        table.push(polygons);
    }
    table
}

fn midpoint(edges: &[(usize, usize); 12], e: usize) -> [f64; 3] {
    let (a, b) = (corner_offset(edges[e].0), corner_offset(edges[e].1));
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn orient_outward(poly: &mut [usize], edges: &[(usize, usize); 12], inside: &dyn Fn(usize) -> bool) {
    let mut outward = [0.0; 3];
    for &e in poly.iter() {
        let (a, b) = edges[e];
        let (i, o) = if inside(a) { (a, b) } else { (b, a) };
        let (pi, po) = (corner_offset(i), corner_offset(o));
        for k in 0..3 {
            outward[k] += po[k] - pi[k];
        }
    }
    let v0 = midpoint(edges, poly[0]);
    let mut normal = [0.0; 3];
    for k in 1..poly.len() - 1 {
        let c = cross(sub(midpoint(edges, poly[k]), v0), sub(midpoint(edges, poly[k + 1]), v0));
        for d in 0..3 {
            normal[d] += c[d];
        }
    }
    if dot(normal, outward) < 0.0 {
        poly.reverse();
    }
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MeshStats {
    /// mm².
    pub area: f64,
    /// mm³, enclosed by the outward-oriented surface.
    pub volume: f64,
}

/// Surface area and enclosed volume of the iso-0.5 surface of `inside`.
pub(crate) fn mesh_stats(inside: &[bool], dims: Dims, spacing: [f64; 3]) -> MeshStats {
    let edges = edges();
    let table = polygon_table();
    let [nx, ny, nz] = dims;
    let at = |x: isize, y: isize, z: isize| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && inside[x as usize + nx * (y as usize + ny * z as usize)]
    };
    // Vertices are taken relative to the grid centre to keep the signed
    // volume sums well conditioned.
    let centre = [nx as f64 / 2.0, ny as f64 / 2.0, nz as f64 / 2.0];
    let (mut area, mut volume) = (0.0, 0.0);
    for z in -1..nz as isize {
        for y in -1..ny as isize {
            for x in -1..nx as isize {
                let mut config = 0usize;
                for c in 0..8 {
                    if at(x + (c & 1) as isize, y + ((c >> 1) & 1) as isize, z + ((c >> 2) & 1) as isize) {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                let origin = [x as f64, y as f64, z as f64];
                let place = |e: usize| -> [f64; 3] {
                    let m = midpoint(&edges, e);
                    [
                        (origin[0] + m[0] - centre[0]) * spacing[0],
                        (origin[1] + m[1] - centre[1]) * spacing[1],
                        (origin[2] + m[2] - centre[2]) * spacing[2],
                    ]
                };
                for poly in &table[config] {
                    // Fan around the vertex centroid so that non-planar loops
                    // do not depend on where the loop starts.
                    let pts: Vec<[f64; 3]> = poly.iter().map(|&e| place(e)).collect();
                    let k = pts.len() as f64;
                    let c = pts.iter().fold([0.0; 3], |a, p| [a[0] + p[0] / k, a[1] + p[1] / k, a[2] + p[2] / k]);
                    let tri = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
                        let n = cross(sub(b, a), sub(c, a));
                        (math::sqrt(dot(n, n)) / 2.0, dot(a, cross(b, c)) / 6.0)
                    };
                    if pts.len() == 3 {
                        let (a, v) = tri(pts[0], pts[1], pts[2]);
                        area += a;
                        volume += v;
                        continue;
                    }
                    for i in 0..pts.len() {
                        let (a, v) = tri(c, pts[i], pts[(i + 1) % pts.len()]);
                        area += a;
                        volume += v;
                    }
                }
            }
        }
    }
    MeshStats { area, volume }
}
