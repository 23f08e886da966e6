//! Binary depth rasters.
//!
//! ```text
//! offset  size       content
//! 0       8          magic "DEPTHF32"
//! 8       4          width, u32 little-endian
//! 12      4          height, u32 little-endian
//! 16      4*w*h      row-major f32 little-endian depths, metres
//! ```
//!
//! Non-finite or non-positive depths mark invalid pixels.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, Result};
use crate::pseudolabel::DepthRaster;

pub const DEPTH_MAGIC: [u8; 8] = *b"DEPTHF32";
const HEADER_LEN: u64 = 16;

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthRaster> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let len = file.metadata().map_err(|e| DataError::io(path, e))?.len();
    if len < HEADER_LEN {
        return Err(DataError::binary(path, len, "file shorter than the 16-byte header"));
    }
    let mut header = [0u8; HEADER_LEN as usize];
    file.read_exact(&mut header).map_err(|e| DataError::io(path, e))?;
    if header[..8] != DEPTH_MAGIC {
        return Err(DataError::binary(path, 0, "bad magic, expected \"DEPTHF32\""));
    }
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let height = u32::from_le_bytes(header[12..16].try_into().unwrap());
    if width == 0 || height == 0 {
        return Err(DataError::binary(path, 8, format!("empty raster {width}x{height}")));
    }
    let expected = (width as u64)
        .checked_mul(height as u64)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| DataError::binary(path, 8, "raster size overflows"))?;
    if len - HEADER_LEN != expected {
        return Err(DataError::binary(
            path,
            len,
            format!(
                "payload is {} bytes, {width}x{height} needs {expected}",
                len - HEADER_LEN
            ),
        ));
    }
    let mut payload = vec![0u8; expected as usize];
    file.read_exact(&mut payload).map_err(|e| DataError::io(path, e))?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DepthRaster::from_values(width, height, values)
        .map_err(|e| DataError::binary(path, HEADER_LEN, e.to_string()))
}

pub fn write_depth(raster: &DepthRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| DataError::io(path, e));
    write(&DEPTH_MAGIC)?;
    write(&raster.width().to_le_bytes())?;
    write(&raster.height().to_le_bytes())?;
    for v in raster.values() {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}
