//! Feature-space foreground mask: keep the 3×3 block of the 7×7 grid with
//! the largest summed response, zero everything else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureGrid, CELLS, GRID};

pub const WINDOW: usize = 3;
/// Window origins per axis, `7 - 3 + 1`.
pub const ORIGINS: usize = GRID - WINDOW + 1;

/// Top-left cell of a 3×3 window inside the 7×7 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaskWindow {
    row: u8,
    col: u8,
}

impl MaskWindow {
    pub fn new(row: usize, col: usize) -> Result<Self> {
        if row >= ORIGINS || col >= ORIGINS {
            return Err(Error::InvalidFeatures(format!(
                "window origin ({row}, {col}) leaves the 7x7 grid"
            )));
        }
        Ok(MaskWindow {
            row: row as u8,
            col: col as u8,
        })
    }

    pub fn row(self) -> usize {
        self.row as usize
    }

    pub fn col(self) -> usize {
        self.col as usize
    }

    pub fn contains(self, row: usize, col: usize) -> bool {
        (self.row()..self.row() + WINDOW).contains(&row)
            && (self.col()..self.col() + WINDOW).contains(&col)
    }

    /// Sum of `response` over the window's nine cells.
    pub fn sum(self, response: &[f32; CELLS]) -> f64 {
        let mut s = 0.0;
        for r in self.row()..self.row() + WINDOW {
            for c in self.col()..self.col() + WINDOW {
                s += response[r * GRID + c] as f64;
            }
        }
        s
    }
}

/// Argmax of the window sum over all 25 origins; ties go to the first
/// origin in row-major order.
pub fn select_window(response: &[f32; CELLS]) -> MaskWindow {
    let mut best = MaskWindow { row: 0, col: 0 };
    let mut best_sum = best.sum(response);
    for row in 0..ORIGINS {
        for col in 0..ORIGINS {
            let w = MaskWindow {
                row: row as u8,
                col: col as u8,
            };
            let s = w.sum(response);
            if s > best_sum {
                best = w;
                best_sum = s;
            }
        }
    }
    best
}

/// Zeroes data and response outside `window`; shape is preserved.
pub fn apply_mask(features: &FeatureGrid, window: MaskWindow) -> FeatureGrid {
    let mut out = features.clone();
    let (t_bins, channels) = (out.t_bins(), out.channels());
    let (data, response) = out.parts_mut();
    for cell in 0..CELLS {
        if window.contains(cell / GRID, cell % GRID) {
            continue;
        }
        response[cell] = 0.0;
        for t in 0..t_bins {
            let start = (t * CELLS + cell) * channels;
            data[start..start + channels].fill(0.0);
        }
    }
    out.set_mask(Some(window));
    out
}

/// `select_window` then `apply_mask`; the window is returned for logging.
pub fn mask_pipeline(features: &FeatureGrid) -> (FeatureGrid, MaskWindow) {
    let window = select_window(features.response());
    (apply_mask(features, window), window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with_cell_energy(energy: impl Fn(usize, usize) -> f32) -> FeatureGrid {
        let mut data = Vec::new();
        for _t in 0..2 {
            for r in 0..GRID {
                for c in 0..GRID {
                    data.extend([energy(r, c), -energy(r, c) * 0.5]);
                }
            }
        }
        FeatureGrid::new(2, 2, data, None).unwrap()
    }

    #[test]
    fn uniform_response_picks_origin() {
        assert_eq!(select_window(&[1.0; CELLS]), MaskWindow::new(0, 0).unwrap());
        assert_eq!(select_window(&[0.0; CELLS]), MaskWindow::new(0, 0).unwrap());
    }

    #[test]
    fn single_hot_cell_picks_first_covering_window() {
        let mut r = [0f32; CELLS];
        r[3 * GRID + 3] = 5.0;
        assert_eq!(select_window(&r), MaskWindow::new(1, 1).unwrap());
    }

    #[test]
    fn diagonal_ramp_picks_bottom_right() {
        let mut r = [0f32; CELLS];
        for (i, v) in r.iter_mut().enumerate() {
            *v = (i / GRID + i % GRID) as f32;
        }
        assert_eq!(select_window(&r), MaskWindow::new(4, 4).unwrap());
    }

    #[test]
    fn window_bounds_checked() {
        assert!(MaskWindow::new(4, 4).is_ok());
        assert!(MaskWindow::new(5, 0).is_err());
        assert!(MaskWindow::new(0, 5).is_err());
    }

    #[test]
    fn apply_is_idempotent_and_keeps_nine_cells() {
        let g = grid_with_cell_energy(|r, c| (r * 7 + c) as f32 + 1.0);
        let w = MaskWindow::new(2, 3).unwrap();
        let once = apply_mask(&g, w);
        assert_eq!(apply_mask(&once, w), once);
        let alive = once.response().iter().filter(|&&v| v > 0.0).count();
        assert_eq!(alive, 9);
        for r in 0..GRID {
            for c in 0..GRID {
                for t in 0..2 {
                    if w.contains(r, c) {
                        assert_eq!(once.cell(t, r, c), g.cell(t, r, c));
                    } else {
                        assert_eq!(once.cell(t, r, c), &[0.0, 0.0]);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_grid_stays_zero() {
        let z = FeatureGrid::zeros(3, 4);
        let out = apply_mask(&z, MaskWindow::new(1, 2).unwrap());
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_inside_window_is_untouched() {
        let w = MaskWindow::new(2, 1).unwrap();
        let g = grid_with_cell_energy(|r, c| if w.contains(r, c) { 3.0 } else { 0.0 });
        let (masked, chosen) = mask_pipeline(&g);
        assert_eq!(chosen, w);
        assert_eq!(masked.data(), g.data());
        assert_eq!(masked.response(), g.response());
    }

    #[test]
    fn pipeline_hot_cell_keeps_center_block() {
        let g = grid_with_cell_energy(|r, c| if (r, c) == (3, 3) { 4.0 } else { 0.5 });
        let (masked, w) = mask_pipeline(&g);
        assert_eq!(w, MaskWindow::new(1, 1).unwrap());
        for r in 0..GRID {
            for c in 0..GRID {
                let kept = masked.response_at(r, c) > 0.0;
                assert_eq!(kept, (1..=3).contains(&r) && (1..=3).contains(&c));
            }
        }
        assert!(masked.total_l1() <= g.total_l1());
    }

    #[test]
    fn uniform_features_keep_nine_cells_at_origin() {
        let g = grid_with_cell_energy(|_, _| 1.0);
        let (masked, w) = mask_pipeline(&g);
        assert_eq!(w, MaskWindow::new(0, 0).unwrap());
        assert_eq!(masked.response().iter().filter(|&&v| v > 0.0).count(), 9);
    }
}
