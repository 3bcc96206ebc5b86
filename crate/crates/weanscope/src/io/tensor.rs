//! Binary arrays: image tensors (f64 little-endian, channel-last, with a
//! JSON sidecar) and PSD maps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weanscope_core::cwt::{MotherWavelet, PsdMap};
use weanscope_core::imaging::ImageTensor;
use weanscope_core::series::{ClassLabel, VariableId};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub channel_order: Vec<VariableId>,
    pub patient_id: String,
    pub class_label: Option<ClassLabel>,
}

pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_tensor(path: &Path, t: &ImageTensor) -> Result<()> {
    let header = TensorHeader {
        h: t.h,
        w: t.w,
        c: t.c,
        channel_order: t.channel_order.clone(),
        patient_id: t.patient_id.clone(),
        class_label: t.class_label,
    };
    super::write_bytes(path, &super::f64s_to_le(&t.data))?;
    super::write_json(&sidecar(path), &header)
}

pub fn read_tensor(path: &Path) -> Result<ImageTensor> {
    let header: TensorHeader = super::read_json(&sidecar(path))?;
    let data = super::le_to_f64s(path, &super::read_bytes(path)?)?;
    if data.len() != header.h * header.w * header.c || header.channel_order.len() != header.c {
        return Err(PipelineError::format(path, "tensor size does not match its header"));
    }
    Ok(ImageTensor {
        h: header.h,
        w: header.w,
        c: header.c,
        data,
        channel_order: header.channel_order,
        patient_id: header.patient_id,
        class_label: header.class_label,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdHeader {
    pub rows: usize,
    pub cols: usize,
    pub patient_id: String,
    pub variable: VariableId,
    pub class_label: Option<ClassLabel>,
    pub wavelet: MotherWavelet,
    pub fs_hz: f64,
    /// Pseudo-frequency of each row, Hz.
    pub frequencies_hz: Vec<f64>,
    pub ridge_hz: f64,
}

pub fn write_psd(path: &Path, header: &PsdHeader, map: &PsdMap) -> Result<()> {
    super::write_bytes(path, &super::f64s_to_le(&map.power))?;
    super::write_json(&sidecar(path), header)
}

pub fn read_psd(path: &Path) -> Result<(PsdHeader, PsdMap)> {
    let header: PsdHeader = super::read_json(&sidecar(path))?;
    let power = super::le_to_f64s(path, &super::read_bytes(path)?)?;
    let map = PsdMap::new(header.rows, header.cols, power).map_err(|e| PipelineError::format(path, e))?;
    Ok((header, map))
}
