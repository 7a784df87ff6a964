use crate::error::{RepriError, Result};
use crate::types::PixelMask;

/// Average-pools a binary mask onto a coarser `height x width` grid and
/// thresholds at 0.5 (ties go to foreground).
///
/// Target cell `i` covers the source interval `[i*H0/H, (i+1)*H0/H)`, which
/// may cut source pixels fractionally. Working in units of `1/(H*W)` keeps
/// every overlap an integer, so the threshold test is exact.
pub fn downsample_mask(full: &PixelMask, height: usize, width: usize) -> Result<PixelMask> {
    let (h0, w0) = (full.height(), full.width());
    if height == 0 || width == 0 || height > h0 || width > w0 {
        return Err(RepriError::invalid(
            "downsample target",
            format!("{height}x{width} from a {h0}x{w0} mask"),
        ));
    }
    let row_weights = overlaps(h0, height);
    let col_weights = overlaps(w0, width);
    let mut out = Vec::with_capacity(height * width);
    for rows in &row_weights {
        for cols in &col_weights {
            let mut covered: u128 = 0;
            for &(r, wr) in rows {
                for &(c, wc) in cols {
                    if full.is_fg(r * w0 + c) {
                        covered += (wr * wc) as u128;
                    }
                }
            }
            // cell area is h0 * w0 in these units; foreground iff >= half
            out.push((2 * covered >= (h0 * w0) as u128) as u8);
        }
    }
    PixelMask::new(height, width, out)
}

/// For each of `target` cells, the `(source index, overlap)` pairs, with
/// source pixel `s` spanning `[s*target, (s+1)*target)` and target cell `i`
/// spanning `[i*source, (i+1)*source)`.
fn overlaps(source: usize, target: usize) -> Vec<Vec<(usize, u64)>> {
    (0..target)
        .map(|i| {
            let lo = i * source;
            let hi = (i + 1) * source;
            (lo / target..hi.div_ceil(target))
                .filter_map(|s| {
                    let a = (s * target).max(lo);
                    let b = ((s + 1) * target).min(hi);
                    (b > a).then(|| (s, (b - a) as u64))
                })
                .collect()
        })
        .collect()
}
