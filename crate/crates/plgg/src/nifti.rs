//! NIfTI-1 volumes and label masks (`.nii`, `.nii.gz`).

use std::path::Path;

use ndarray::{Array3, ShapeBuilder};
use nifti::writer::WriterOptions;
use nifti::{IntoNdArray, NiftiError, NiftiHeader, NiftiObject, ReaderOptions};
use plgg_core::grid::{Geometry, LabelMask, LabelVocabulary, Volume3D};

use crate::error::{Error, Result};

/// On-disk voxel types that are read and written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I16 => 4,
            Datatype::I32 => 8,
            Datatype::F32 => 16,
            Datatype::F64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        [Datatype::U8, Datatype::I16, Datatype::I32, Datatype::F32, Datatype::F64]
            .into_iter()
            .find(|d| d.code() == code)
    }

    fn holds(self, v: f64) -> bool {
        let integral = v.fract() == 0.0;
        match self {
            Datatype::U8 => integral && (0.0..=u8::MAX as f64).contains(&v),
            Datatype::I16 => integral && (i16::MIN as f64..=i16::MAX as f64).contains(&v),
            Datatype::I32 => integral && (i32::MIN as f64..=i32::MAX as f64).contains(&v),
            Datatype::F32 => v.is_nan() || v as f32 as f64 == v,
            Datatype::F64 => true,
        }
    }
}

fn nifti_error(path: &Path, e: NiftiError) -> Error {
    match e {
        NiftiError::Io(source) => Error::Io { path: path.into(), source },
        other => Error::Format { path: path.into(), reason: other.to_string() },
    }
}

/// Header-level checks, then the voxel data in x-fastest order with the
/// intensity scaling applied.
fn read_raw(path: &Path) -> Result<(Geometry, Vec<f64>, Datatype)> {
    if !path.exists() {
        return Err(Error::Io { path: path.into(), source: std::io::ErrorKind::NotFound.into() });
    }
    let header = NiftiHeader::from_file(path).map_err(|e| nifti_error(path, e))?;
    let datatype = Datatype::from_code(header.datatype)
        .ok_or(Error::UnsupportedDatatype { path: path.into(), code: header.datatype })?;
    let rank = header.dim[0];
    if !(rank == 3 || rank == 4) {
        return Err(Error::Shape { path: path.into(), reason: format!("dim[0] = {rank}") });
    }
    if rank == 4 && header.dim[4] > 1 {
        return Err(Error::Shape { path: path.into(), reason: format!("{} volumes in dim[4]", header.dim[4]) });
    }
    let geometry = geometry(&header).map_err(|reason| Error::Shape { path: path.into(), reason })?;

    let object = ReaderOptions::new().read_file(path).map_err(|e| nifti_error(path, e))?;
    let array = object.into_volume().into_ndarray::<f64>().map_err(|e| nifti_error(path, e))?;
    // The array is column-major, which is exactly the x-fastest layout.
    let data: Vec<f64> = match array.as_slice_memory_order() {
        Some(s) => s.to_vec(),
        None => array.t().iter().copied().collect(),
    };
    if data.len() != geometry.len() {
        return Err(Error::Shape {
            path: path.into(),
            reason: format!("{} voxels for {:?}", data.len(), geometry.dims),
        });
    }
    Ok((geometry, data, datatype))
}

/// Grid from dim/pixdim, oriented by the sform, else the qform, else the
/// identity.
fn geometry(h: &NiftiHeader) -> std::result::Result<Geometry, String> {
    let dims = [h.dim[1] as usize, h.dim[2] as usize, h.dim[3] as usize];
    let spacing = [h.pixdim[1] as f64, h.pixdim[2] as f64, h.pixdim[3] as f64];
    let base = Geometry::new(dims, spacing).map_err(|e| e.to_string())?;
    let affine: Option<[[f64; 4]; 3]> = if h.sform_code > 0 {
        let row = |r: [f32; 4]| r.map(|v| v as f64);
        Some([row(h.srow_x), row(h.srow_y), row(h.srow_z)])
    } else if h.qform_code > 0 {
        Some(qform(h, spacing))
    } else {
        None
    };
    Ok(match affine {
        None => base,
        Some(a) => {
            let direction = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] / spacing[j]));
            base.with_orientation(direction, [a[0][3], a[1][3], a[2][3]])
        }
    })
}

/// Affine rows from the quaternion fields; pixdim[0] < 0 flips the z axis.
fn qform(h: &NiftiHeader, spacing: [f64; 3]) -> [[f64; 4]; 3] {
    let (b, c, d) = (h.quatern_b as f64, h.quatern_c as f64, h.quatern_d as f64);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let qfac = if h.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let offset = [h.quatern_x as f64, h.quatern_y as f64, h.quatern_z as f64];
    std::array::from_fn(|i| [r[i][0] * scale[0], r[i][1] * scale[1], r[i][2] * scale[2], offset[i]])
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let (geometry, data, _) = read_raw(path)?;
    Ok(Volume3D::new(geometry, data)?)
}

/// Reads an integer-typed file as a label mask. The caller states the
/// vocabulary; the datatype alone never decides it.
pub fn read_mask(path: impl AsRef<Path>, vocabulary: LabelVocabulary) -> Result<LabelMask> {
    let path = path.as_ref();
    let (geometry, data, datatype) = read_raw(path)?;
    if matches!(datatype, Datatype::F32 | Datatype::F64) {
        return Err(Error::UnsupportedDatatype { path: path.into(), code: datatype.code() });
    }
    let mut labels = Vec::with_capacity(data.len());
    for v in data {
        if !Datatype::U8.holds(v) {
            return Err(Error::Format { path: path.into(), reason: format!("label value {v}") });
        }
        labels.push(v as u8);
    }
    Ok(LabelMask::new(geometry, labels, vocabulary)?)
}

fn header_for(g: &Geometry) -> NiftiHeader {
    let [sx, sy, sz] = g.spacing;
    let row = |i: usize| {
        [
            (g.direction[i][0] * sx) as f32,
            (g.direction[i][1] * sy) as f32,
            (g.direction[i][2] * sz) as f32,
            g.origin[i] as f32,
        ]
    };
    NiftiHeader {
        pixdim: [1.0, sx as f32, sy as f32, sz as f32, 1.0, 1.0, 1.0, 1.0],
        sform_code: 1,
        qform_code: 0,
        srow_x: row(0),
        srow_y: row(1),
        srow_z: row(2),
        // Millimetres.
        xyzt_units: 2,
        ..NiftiHeader::default()
    }
}

fn write_raw(path: &Path, g: &Geometry, data: &[f64], datatype: Datatype) -> Result<()> {
    if let Some(v) = data.iter().find(|&&v| !datatype.holds(v)) {
        return Err(Error::Format { path: path.into(), reason: format!("value {v} does not fit {datatype:?}") });
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let header = header_for(g);
    let options = WriterOptions::new(path).reference_header(&header);
    let shape = (g.dims[0], g.dims[1], g.dims[2]).f();
    fn array<T>(shape: ndarray::Shape<ndarray::Ix3>, v: Vec<T>) -> Array3<T> {
        Array3::from_shape_vec(shape, v).expect("length matches the grid")
    }
    let written = match datatype {
        Datatype::U8 => options.write_nifti(&array(shape, data.iter().map(|&v| v as u8).collect())),
        Datatype::I16 => options.write_nifti(&array(shape, data.iter().map(|&v| v as i16).collect())),
        Datatype::I32 => options.write_nifti(&array(shape, data.iter().map(|&v| v as i32).collect())),
        Datatype::F32 => options.write_nifti(&array(shape, data.iter().map(|&v| v as f32).collect())),
        Datatype::F64 => options.write_nifti(&array(shape, data.to_vec())),
    };
    written.map_err(|e| nifti_error(path, e))
}

/// Writes `vol` with the given voxel type. Values that the type cannot hold
/// exactly are rejected rather than rounded.
pub fn write_volume(vol: &Volume3D, path: impl AsRef<Path>, datatype: Datatype) -> Result<()> {
    write_raw(path.as_ref(), vol.geometry(), vol.data(), datatype)
}

pub fn write_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<f64> = mask.labels().iter().map(|&l| l as f64).collect();
    write_raw(path.as_ref(), mask.geometry(), &data, Datatype::U8)
}
