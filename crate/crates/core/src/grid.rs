//! Voxel grids shared by every stage of the pipeline.
//!
//! Storage order is x fastest, then y, then z (the NIfTI convention):
//! `index = x + nx * (y + ny * z)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::segmentation::SubregionMasks;

pub type Dims = [usize; 3];

/// Tolerance used when comparing spacing (mm) and direction cosines.
pub const CONGRUENCE_TOL: f64 = 1e-5;

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Lattice description: shape, voxel size and placement in scanner space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: Dims,
    /// Millimetres per voxel along each axis.
    pub spacing: [f64; 3],
    /// Direction cosines; column `j` is the unit vector of voxel axis `j`.
    pub direction: [[f64; 3]; 3],
    /// Position of voxel (0,0,0) in millimetres.
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: Dims, spacing: [f64; 3]) -> Result<Self> {
        let g = Geometry { dims, spacing, direction: IDENTITY, origin: [0.0; 3] };
        g.validate()?;
        Ok(g)
    }

    pub fn with_orientation(mut self, direction: [[f64; 3]; 3], origin: [f64; 3]) -> Self {
        self.direction = direction;
        self.origin = origin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("zero-sized dimension in {:?}", self.dims)));
        }
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidGrid(format!("spacing {:?} must be positive", self.spacing)));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Checks that two grids share dims, spacing and orientation.
    pub fn check_congruent(&self, other: &Geometry) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GridMismatch(format!("dims {:?} vs {:?}", self.dims, other.dims)));
        }
        for a in 0..3 {
            if (self.spacing[a] - other.spacing[a]).abs() > CONGRUENCE_TOL {
                return Err(Error::GridMismatch(format!("spacing {:?} vs {:?}", self.spacing, other.spacing)));
            }
            if (self.origin[a] - other.origin[a]).abs() > CONGRUENCE_TOL {
                return Err(Error::GridMismatch(format!("origin {:?} vs {:?}", self.origin, other.origin)));
            }
            for b in 0..3 {
                if (self.direction[a][b] - other.direction[a][b]).abs() > CONGRUENCE_TOL {
                    return Err(Error::GridMismatch(String::from("direction cosines differ")));
                }
            }
        }
        Ok(())
    }
}

/// Scalar intensity volume, one per MRI sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volume3D {
    geometry: Geometry,
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(geometry: Geometry, data: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::Shape { expected: geometry.len(), found: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite intensity at voxel {i}")));
        }
        Ok(Volume3D { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: f64) -> Result<Self> {
        let n = geometry.len();
        Volume3D::new(geometry, alloc::vec![value; n])
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> Dims {
        self.geometry.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geometry.index(x, y, z)]
    }

    /// Resamples onto `target` dims. Nearest-neighbour is allowed here; it is
    /// trilinear on label masks that is refused.
    pub fn resample(&self, target: Dims, mode: Interpolation) -> Result<Volume3D> {
        if target == self.geometry.dims {
            return Ok(self.clone());
        }
        let geometry = resampled_geometry(&self.geometry, target)?;
        let data = match mode {
            Interpolation::Trilinear => trilinear(&self.data, self.geometry.dims, target),
            Interpolation::Nearest => nearest(&self.data, self.geometry.dims, target),
        };
        Ok(Volume3D { geometry, data })
    }
}

/// Which label codes a mask may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelVocabulary {
    /// {0, 1}
    Binary,
    /// {0 background, 1 ET, 2 NET, 3 CC, 4 ED}
    Subregions,
}

impl LabelVocabulary {
    pub fn max_label(self) -> u8 {
        match self {
            LabelVocabulary::Binary => 1,
            LabelVocabulary::Subregions => 4,
        }
    }
}

/// Integer label grid on the same lattice as the volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMask {
    geometry: Geometry,
    labels: Vec<u8>,
    vocabulary: LabelVocabulary,
}

impl LabelMask {
    pub fn new(geometry: Geometry, labels: Vec<u8>, vocabulary: LabelVocabulary) -> Result<Self> {
        geometry.validate()?;
        if labels.len() != geometry.len() {
            return Err(Error::Shape { expected: geometry.len(), found: labels.len() });
        }
        let max = vocabulary.max_label();
        if let Some(&bad) = labels.iter().find(|&&l| l > max) {
            return Err(Error::LabelVocabulary { label: bad });
        }
        Ok(LabelMask { geometry, labels, vocabulary })
    }

    pub fn binary(geometry: Geometry, labels: Vec<u8>) -> Result<Self> {
        LabelMask::new(geometry, labels, LabelVocabulary::Binary)
    }

    pub fn empty(geometry: Geometry, vocabulary: LabelVocabulary) -> Result<Self> {
        let n = geometry.len();
        LabelMask::new(geometry, alloc::vec![0; n], vocabulary)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> Dims {
        self.geometry.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn vocabulary(&self) -> LabelVocabulary {
        self.vocabulary
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.geometry.index(x, y, z)]
    }

    pub fn count_nonzero(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn resample_nearest(&self, target: Dims) -> Result<LabelMask> {
        if target == self.geometry.dims {
            return Ok(self.clone());
        }
        let geometry = resampled_geometry(&self.geometry, target)?;
        let labels = nearest(&self.labels, self.geometry.dims, target);
        Ok(LabelMask { geometry, labels, vocabulary: self.vocabulary })
    }
}

/// Either kind of grid, for callers that dispatch on content.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Intensity(Volume3D),
    Labels(LabelMask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

pub fn resample(image: &Image, target: Dims, mode: Interpolation) -> Result<Image> {
    match (image, mode) {
        (Image::Intensity(v), _) => v.resample(target, mode).map(Image::Intensity),
        (Image::Labels(_), Interpolation::Trilinear) => Err(Error::Mode("trilinear")),
        (Image::Labels(m), Interpolation::Nearest) => m.resample_nearest(target).map(Image::Labels),
    }
}

/// The four sequences of one case, in the order T1, T1CE, T2, FLAIR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sequence {
    T1,
    T1ce,
    T2,
    Flair,
}

impl Sequence {
    pub const ALL: [Sequence; 4] = [Sequence::T1, Sequence::T1ce, Sequence::T2, Sequence::Flair];

    pub fn name(self) -> &'static str {
        match self {
            Sequence::T1 => "t1",
            Sequence::T1ce => "t1ce",
            Sequence::T2 => "t2",
            Sequence::Flair => "flair",
        }
    }
}

/// All imaging for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseBundle {
    pub case_id: String,
    /// Indexed by [`Sequence`] order.
    pub sequences: [Volume3D; 4],
    pub masks: SubregionMasks,
}

impl CaseBundle {
    pub fn new(case_id: String, sequences: [Volume3D; 4], masks: SubregionMasks) -> Result<Self> {
        let b = CaseBundle { case_id, sequences, masks };
        b.check_congruent()?;
        Ok(b)
    }

    pub fn sequence(&self, s: Sequence) -> &Volume3D {
        &self.sequences[s as usize]
    }

    pub fn check_congruent(&self) -> Result<()> {
        let reference = self.sequences[0].geometry();
        for v in &self.sequences[1..] {
            reference.check_congruent(v.geometry())?;
        }
        for m in self.masks.iter() {
            reference.check_congruent(m.geometry())?;
        }
        Ok(())
    }
}

/// Output voxel `i` samples input coordinate `i·(n_in−1)/(n_out−1)`; a
/// single output voxel samples the centre of the input axis.
#[inline]
fn source_coordinate(i: usize, n_in: usize, n_out: usize) -> f64 {
    if n_out > 1 {
        (i * (n_in - 1)) as f64 / (n_out - 1) as f64
    } else {
        (n_in - 1) as f64 / 2.0
    }
}

fn resampled_geometry(src: &Geometry, target: Dims) -> Result<Geometry> {
    if target.contains(&0) {
        return Err(Error::InvalidGrid(format!("target dims {target:?} must be positive")));
    }
    let mut g = src.clone();
    g.dims = target;
    for a in 0..3 {
        let (n_in, n_out) = (src.dims[a], target[a]);
        g.spacing[a] = if n_in > 1 && n_out > 1 {
            src.spacing[a] * (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            src.spacing[a] * n_in as f64 / n_out as f64
        };
        if n_out == 1 {
            let shift = source_coordinate(0, n_in, 1) * src.spacing[a];
            for r in 0..3 {
                g.origin[r] += src.direction[r][a] * shift;
            }
        }
    }
    g.validate()?;
    Ok(g)
}

/// Per-axis lookup: lower neighbour, upper neighbour (clamped) and weight.
fn axis_table(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    (0..n_out)
        .map(|i| {
            let c = source_coordinate(i, n_in, n_out);
            let lo = (math::floor(c) as usize).min(n_in - 1);
            let hi = (lo + 1).min(n_in - 1);
            (lo, hi, c - lo as f64)
        })
        .collect()
}

pub(crate) fn trilinear(src: &[f64], dims_in: Dims, dims_out: Dims) -> Vec<f64> {
    let tx = axis_table(dims_in[0], dims_out[0]);
    let ty = axis_table(dims_in[1], dims_out[1]);
    let tz = axis_table(dims_in[2], dims_out[2]);
    let (nx, ny) = (dims_in[0], dims_in[1]);
    let at = |x: usize, y: usize, z: usize| src[x + nx * (y + ny * z)];
    let mut out = Vec::with_capacity(dims_out[0] * dims_out[1] * dims_out[2]);
    for &(z0, z1, wz) in &tz {
        for &(y0, y1, wy) in &ty {
            for &(x0, x1, wx) in &tx {
                let c00 = at(x0, y0, z0) * (1.0 - wx) + at(x1, y0, z0) * wx;
                let c10 = at(x0, y1, z0) * (1.0 - wx) + at(x1, y1, z0) * wx;
                let c01 = at(x0, y0, z1) * (1.0 - wx) + at(x1, y0, z1) * wx;
                let c11 = at(x0, y1, z1) * (1.0 - wx) + at(x1, y1, z1) * wx;
                let c0 = c00 * (1.0 - wy) + c10 * wy;
                let c1 = c01 * (1.0 - wy) + c11 * wy;
                out.push(c0 * (1.0 - wz) + c1 * wz);
            }
        }
    }
    out
}

pub(crate) fn nearest<T: Copy>(src: &[T], dims_in: Dims, dims_out: Dims) -> Vec<T> {
    let pick = |n_in: usize, n_out: usize| -> Vec<usize> {
        (0..n_out).map(|i| (math::round(source_coordinate(i, n_in, n_out)) as usize).min(n_in - 1)).collect()
    };
    let px = pick(dims_in[0], dims_out[0]);
    let py = pick(dims_in[1], dims_out[1]);
    let pz = pick(dims_in[2], dims_out[2]);
    let (nx, ny) = (dims_in[0], dims_in[1]);
    let mut out = Vec::with_capacity(dims_out[0] * dims_out[1] * dims_out[2]);
    for &z in &pz {
        for &y in &py {
            for &x in &px {
                out.push(src[x + nx * (y + ny * z)]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn geom(d: Dims) -> Geometry {
        Geometry::new(d, [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Geometry::new([2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(matches!(Volume3D::new(geom([2, 2, 2]), vec![0.0; 7]), Err(Error::Shape { expected: 8, found: 7 })));
        assert!(Volume3D::new(geom([1, 1, 2]), vec![0.0, f64::NAN]).is_err());
        assert!(matches!(LabelMask::binary(geom([1, 1, 2]), vec![0, 2]), Err(Error::LabelVocabulary { label: 2 })));
    }

    #[test]
    fn index_and_coords_are_inverse() {
        let g = geom([3, 4, 5]);
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
    }

    #[test]
    fn constant_volume_stays_constant() {
        let v = Volume3D::filled(geom([3, 4, 5]), 7.0).unwrap();
        for target in [[1, 1, 1], [2, 9, 3], [10, 10, 10]] {
            let r = v.resample(target, Interpolation::Trilinear).unwrap();
            assert_eq!(r.dims(), target);
            assert!(r.data().iter().all(|&x| (x - 7.0).abs() < 1e-12));
        }
    }

    #[test]
    fn same_dims_is_identity() {
        let data: Vec<f64> = (0..60).map(|i| (i * 7 % 11) as f64).collect();
        let v = Volume3D::new(geom([3, 4, 5]), data).unwrap();
        assert_eq!(v.resample([3, 4, 5], Interpolation::Trilinear).unwrap(), v);
    }

    #[test]
    fn corner_aligned_round_trip_keeps_corners() {
        // 2×2×2 → 4×4×4 samples coordinates {0, 1/3, 2/3, 1}; the way back
        // samples coordinates {0, 3}, i.e. exactly the original corners.
        let data: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let v = Volume3D::new(geom([2, 2, 2]), data.clone()).unwrap();
        let up = v.resample([4, 4, 4], Interpolation::Trilinear).unwrap();
        // Hand-evaluated: voxel (1,0,0) = 2/3·v(0,0,0) + 1/3·v(1,0,0) = 1/3.
        assert!((up.get(1, 0, 0) - 1.0 / 3.0).abs() < 1e-12);
        // Voxel (1,1,1) lies at (1/3,1/3,1/3): Σ w·v over the 8 corners.
        let w = |b: usize| if b == 1 { 1.0 / 3.0 } else { 2.0 / 3.0 };
        let expected: f64 = (0..8).map(|i| w(i & 1) * w((i >> 1) & 1) * w(i >> 2) * data[i]).sum();
        assert!((up.get(1, 1, 1) - expected).abs() < 1e-12);
        let down = up.resample([2, 2, 2], Interpolation::Trilinear).unwrap();
        for (a, b) in down.data().iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((up.geometry().spacing[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_never_invents_labels() {
        let labels: Vec<u8> = (0..27).map(|i| [0, 1, 3][i % 3]).collect();
        let m = LabelMask::new(geom([3, 3, 3]), labels, LabelVocabulary::Subregions).unwrap();
        let r = m.resample_nearest([7, 5, 2]).unwrap();
        assert!(r.labels().iter().all(|l| [0, 1, 3].contains(l)));
    }

    #[test]
    fn trilinear_on_labels_is_refused() {
        let m = LabelMask::empty(geom([2, 2, 2]), LabelVocabulary::Binary).unwrap();
        assert_eq!(
            resample(&Image::Labels(m.clone()), [4, 4, 4], Interpolation::Trilinear),
            Err(Error::Mode("trilinear"))
        );
        assert!(resample(&Image::Labels(m), [4, 4, 4], Interpolation::Nearest).is_ok());
    }

    #[test]
    fn congruence_tolerances() {
        let a = Geometry::new([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let b = Geometry::new([2, 2, 2], [1.0 + 5e-6, 1.0, 1.0]).unwrap();
        let c = Geometry::new([2, 2, 2], [1.0 + 5e-5, 1.0, 1.0]).unwrap();
        assert!(a.check_congruent(&b).is_ok());
        assert!(a.check_congruent(&c).is_err());
        let mut d = a.clone();
        d.direction[0][1] = 1e-4;
        assert!(a.check_congruent(&d).is_err());
        assert!(a.check_congruent(&Geometry::new([2, 2, 3], [1.0; 3]).unwrap()).is_err());
    }
}
