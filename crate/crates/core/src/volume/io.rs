//! Volume file format: a JSON header `{name}.vol.json` plus a raw
//! little-endian binary `{name}.vol.raw` (x fastest, z slowest).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VoxelVolume;
use crate::geometry::Point3;
use crate::{Error, Result, Scalar};

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeDtype {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "i16")]
    I16,
}

#[derive(Serialize, Deserialize)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
    dtype: VolumeDtype,
    data_file: String,
}

fn header_path(base: &Path) -> std::path::PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".vol.json");
    s.into()
}

fn raw_path(base: &Path) -> std::path::PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".vol.raw");
    s.into()
}

impl<T: Scalar> VoxelVolume<T> {
    /// Write `{base}.vol.json` and `{base}.vol.raw`.
    pub fn write(&self, base: &Path, dtype: VolumeDtype) -> Result<()> {
        let raw = raw_path(base);
        let header = VolumeHeader {
            dims: self.dims,
            spacing_mm: [
                self.spacing_mm[0].to_f64().unwrap(),
                self.spacing_mm[1].to_f64().unwrap(),
                self.spacing_mm[2].to_f64().unwrap(),
            ],
            origin_mm: [
                self.origin_mm.x.to_f64().unwrap(),
                self.origin_mm.y.to_f64().unwrap(),
                self.origin_mm.z.to_f64().unwrap(),
            ],
            dtype,
            data_file: raw
                .file_name()
                .expect("raw path has a file name")
                .to_string_lossy()
                .into_owned(),
        };
        let mut w = BufWriter::new(fs::File::create(header_path(base))?);
        serde_json::to_writer_pretty(&mut w, &header)?;
        w.write_all(b"\n")?;
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(raw)?);
        match dtype {
            VolumeDtype::F32 => {
                for v in self.data() {
                    w.write_all(&(v.to_f64().unwrap() as f32).to_le_bytes())?;
                }
            }
            VolumeDtype::I16 => {
                for v in self.data() {
                    let hu = v.to_f64().unwrap().round().clamp(-32768.0, 32767.0) as i16;
                    w.write_all(&hu.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a volume written by [`VoxelVolume::write`]; `base` is the path
    /// without the `.vol.json` suffix.
    pub fn read(base: &Path) -> Result<Self> {
        let header: VolumeHeader = serde_json::from_str(&fs::read_to_string(header_path(base))?)?;
        let dir = base.parent().unwrap_or_else(|| Path::new("."));
        let bytes = fs::read(dir.join(&header.data_file))?;
        let expected = header.dims[0] * header.dims[1] * header.dims[2];

        let data: Vec<T> = match header.dtype {
            VolumeDtype::F32 => {
                if bytes.len() != expected * 4 {
                    return Err(Error::DataSizeMismatch {
                        expected,
                        actual: bytes.len() / 4,
                    });
                }
                bytes
                    .chunks_exact(4)
                    .map(|c| T::cast(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                    .collect()
            }
            VolumeDtype::I16 => {
                if bytes.len() != expected * 2 {
                    return Err(Error::DataSizeMismatch {
                        expected,
                        actual: bytes.len() / 2,
                    });
                }
                bytes
                    .chunks_exact(2)
                    .map(|c| T::cast(i16::from_le_bytes([c[0], c[1]])))
                    .collect()
            }
        };

        VoxelVolume::from_data(
            header.dims,
            [
                T::cast(header.spacing_mm[0]),
                T::cast(header.spacing_mm[1]),
                T::cast(header.spacing_mm[2]),
            ],
            Point3::new(
                T::cast(header.origin_mm[0]),
                T::cast(header.origin_mm[1]),
                T::cast(header.origin_mm[2]),
            ),
            data,
        )
    }
}
