//! File formats: sRGB PNG images and masks, single-channel PFM depth, and the
//! `URTD` raw tensor container.

mod pfm;
mod png;
mod tensor;

pub use self::pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use self::png::{read_mask_png, read_png, write_mask_png, write_png};
pub use self::tensor::{read_tensor, write_tensor, DType, Tensor, TENSOR_MAGIC};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
        }
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}
