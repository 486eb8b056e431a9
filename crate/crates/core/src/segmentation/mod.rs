//! Priors for disentangling materials: class statistics, room segmentation from an
//! occupancy grid, and virtual-highlight detection.

mod rooms;
mod vhl;

pub use rooms::{compute_rooms, label_free_cells, OccupancyGrid, RoomMap, RoomParams};
pub use vhl::{detect_vhl, vhl_mask, VhlConfig, VhlMasks, VhlView};

use crate::error::{Error, Result};

/// Mean and count of the masked entries; an empty mask gives `(0, 0)`.
pub fn class_stats(values: &[f64], mask: &[bool]) -> (f64, usize) {
    debug_assert_eq!(values.len(), mask.len());
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Linear-interpolation quantile of the masked entries at position `q·(n−1)` of the sorted
/// values.
pub fn quantile(values: &[f64], mask: &[bool], q: f64) -> Result<f64> {
    let mut v: Vec<f64> = values.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
    quantile_of(&mut v, q)
}

/// Quantile of an unmasked sample; sorts `values` in place.
pub fn quantile_of(values: &mut [f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level {q} outside [0, 1]")));
    }
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    Ok(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}
