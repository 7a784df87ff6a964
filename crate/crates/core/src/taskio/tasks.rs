//! Mapping between tasks/images and containers.
//!
//! Task containers hold `support_features` `[K,H,W,C]` f32, `support_masks`
//! `[K,H,W]` u8, `query_features` `[H,W,C]` f32 and optionally `query_mask`
//! `[H,W]` u8 and `class_id` `[1]` u8. Per-image containers referenced by a
//! dataset index hold `features` `[H,W,C]` f32 and `mask` `[H,W]` u8.

use std::path::Path;

use super::container::{read_container, write_container, ContainerError, ContainerFile, NamedArray};
use crate::error::{RepriError, Result};
use crate::types::{FeatureMap, PixelMask, ProbMap, TaskInstance};

pub const SUPPORT_FEATURES: &str = "support_features";
pub const SUPPORT_MASKS: &str = "support_masks";
pub const QUERY_FEATURES: &str = "query_features";
pub const QUERY_MASK: &str = "query_mask";
pub const CLASS_ID: &str = "class_id";
pub const IMAGE_FEATURES: &str = "features";
pub const IMAGE_MASK: &str = "mask";
pub const QUERY_PROBS: &str = "query_probs";
pub const QUERY_PRED: &str = "query_pred";

pub fn task_to_container(task: &TaskInstance, class_id: Option<u8>) -> Result<ContainerFile> {
    let q = task.query();
    let (k, h, w, c) = (task.shots(), q.height(), q.width(), q.channels());
    let mut sf = Vec::with_capacity(k * h * w * c);
    let mut sm = Vec::with_capacity(k * h * w);
    for (f, m) in task.supports() {
        sf.extend(f.values().iter().map(|&v| v as f32));
        sm.extend_from_slice(m.values());
    }
    let mut arrays = vec![
        NamedArray::f32(SUPPORT_FEATURES, &[k, h, w, c], sf)?,
        NamedArray::u8(SUPPORT_MASKS, &[k, h, w], sm)?,
        NamedArray::f32(QUERY_FEATURES, &[h, w, c], to_f32(q.values()))?,
    ];
    if let Some(gt) = task.query_gt() {
        arrays.push(NamedArray::u8(QUERY_MASK, &[h, w], gt.values().to_vec())?);
    }
    if let Some(id) = class_id {
        arrays.push(NamedArray::u8(CLASS_ID, &[1], vec![id])?);
    }
    Ok(ContainerFile::new(arrays)?)
}

/// Decodes a task container; returns the task and its class id if present.
pub fn task_from_container(file: &ContainerFile) -> Result<(TaskInstance, Option<u8>)> {
    let sf = file.require(SUPPORT_FEATURES)?;
    let [k, h, w, c] = dims::<4>(sf)?;
    let sm = file.require(SUPPORT_MASKS)?;
    expect_dims(sm, &[k, h, w])?;
    let qf = file.require(QUERY_FEATURES)?;
    expect_dims(qf, &[h, w, c])?;

    let feats = sf.as_f32()?;
    let masks = sm.as_u8()?;
    let plane = h * w;
    let supports = (0..k)
        .map(|i| {
            let f = FeatureMap::new(h, w, c, to_f64(&feats[i * plane * c..(i + 1) * plane * c]))?;
            let m = PixelMask::new(h, w, masks[i * plane..(i + 1) * plane].to_vec())?;
            Ok((f, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let query = FeatureMap::new(h, w, c, to_f64(qf.as_f32()?))?;
    let query_gt = match file.get(QUERY_MASK) {
        Some(a) => {
            expect_dims(a, &[h, w])?;
            Some(PixelMask::new(h, w, a.as_u8()?.to_vec())?)
        }
        None => None,
    };
    let class_id = match file.get(CLASS_ID) {
        Some(a) => {
            expect_dims(a, &[1])?;
            Some(a.as_u8()?[0])
        }
        None => None,
    };
    Ok((TaskInstance::new(supports, query, query_gt)?, class_id))
}

pub fn write_task(path: impl AsRef<Path>, task: &TaskInstance, class_id: Option<u8>) -> Result<()> {
    write_container(path, &task_to_container(task, class_id)?)?;
    Ok(())
}

pub fn read_task(path: impl AsRef<Path>) -> Result<(TaskInstance, Option<u8>)> {
    task_from_container(&read_container(path)?)
}

pub fn image_to_container(features: &FeatureMap, mask: &PixelMask) -> Result<ContainerFile> {
    let (h, w, c) = (features.height(), features.width(), features.channels());
    if (mask.height(), mask.width()) != (h, w) {
        return Err(RepriError::ShapeMismatch(format!(
            "mask {}x{} vs features {h}x{w}",
            mask.height(),
            mask.width()
        )));
    }
    Ok(ContainerFile::new(vec![
        NamedArray::f32(IMAGE_FEATURES, &[h, w, c], to_f32(features.values()))?,
        NamedArray::u8(IMAGE_MASK, &[h, w], mask.values().to_vec())?,
    ])?)
}

pub fn image_from_container(file: &ContainerFile) -> Result<(FeatureMap, PixelMask)> {
    let f = file.require(IMAGE_FEATURES)?;
    let [h, w, c] = dims::<3>(f)?;
    let m = file.require(IMAGE_MASK)?;
    expect_dims(m, &[h, w])?;
    Ok((
        FeatureMap::new(h, w, c, to_f64(f.as_f32()?))?,
        PixelMask::new(h, w, m.as_u8()?.to_vec())?,
    ))
}

/// Query posterior as `[H,W,2]` f32 (bg, fg) plus the hard mask.
pub fn probs_to_container(probs: &ProbMap, mask: &PixelMask) -> Result<ContainerFile> {
    let (h, w) = (probs.height(), probs.width());
    Ok(ContainerFile::new(vec![
        NamedArray::f32(QUERY_PROBS, &[h, w, 2], to_f32(&probs.to_pairs()))?,
        NamedArray::u8(QUERY_PRED, &[h, w], mask.values().to_vec())?,
    ])?)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn dims<const N: usize>(a: &NamedArray) -> Result<[usize; N]> {
    let d = a.dims();
    if d.len() != N {
        return Err(bad_dims(a, format!("expected {N} dimensions, found {}", d.len())));
    }
    let mut out = [0usize; N];
    for (o, &v) in out.iter_mut().zip(d) {
        *o = usize::try_from(v).map_err(|_| bad_dims(a, "dimension overflow".into()))?;
    }
    Ok(out)
}

fn expect_dims(a: &NamedArray, expected: &[usize]) -> Result<()> {
    let ok = a.dims().len() == expected.len()
        && a.dims().iter().zip(expected).all(|(&d, &e)| d == e as u64);
    if !ok {
        return Err(bad_dims(a, format!("dims {:?}, expected {expected:?}", a.dims())));
    }
    Ok(())
}

fn bad_dims(a: &NamedArray, reason: String) -> RepriError {
    RepriError::Container(ContainerError::BadArray {
        name: a.name().to_string(),
        reason,
    })
}
