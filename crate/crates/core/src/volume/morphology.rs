//! Grayscale morphology on axial slices with a flat disk structuring
//! element.
//!
//! Pixels outside the slice are ignored (treated as +∞ for erosion and
//! -∞ for dilation), so borders are not artificially darkened.
//!
//! The disk is decomposed into horizontal runs: a sliding min/max pass per
//! distinct run width followed by a vertical combine. This is equivalent
//! to the direct min/max over the full disk footprint (the unit tests
//! check against that brute-force form) but costs O(radius) instead of
//! O(radius²) per pixel.

use std::collections::VecDeque;

use super::Slice2D;
use crate::Scalar;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extreme {
    Min,
    Max,
}

/// Half-widths of the disk's horizontal runs, indexed by |dy|.
fn disk_half_widths(radius_px: usize) -> Vec<usize> {
    let r2 = (radius_px * radius_px) as f64;
    (0..=radius_px)
        .map(|dy| (r2 - (dy * dy) as f64).sqrt().floor() as usize)
        .collect()
}

/// Sliding-window extreme over one row, window `[x-w, x+w]` truncated at
/// the row ends. Monotonic-deque algorithm, O(n) per row.
fn sliding_row<T: Scalar>(row: &[T], w: usize, which: Extreme, out: &mut [T]) {
    let n = row.len();
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for x in 0..n {
        let hi = (x + w).min(n - 1);
        while next <= hi {
            while let Some(&back) = deque.back() {
                let dominated = match which {
                    Extreme::Min => row[next] <= row[back],
                    Extreme::Max => row[next] >= row[back],
                };
                if dominated {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = x.saturating_sub(w);
        while *deque.front().expect("window is never empty") < lo {
            deque.pop_front();
        }
        out[x] = row[*deque.front().expect("window is never empty")];
    }
}

fn disk_filter<T: Scalar>(slice: &Slice2D<T>, radius_px: usize, which: Extreme) -> Slice2D<T> {
    assert!(radius_px >= 1, "structuring element radius must be >= 1");
    let [nx, ny] = slice.dims;
    let widths = disk_half_widths(radius_px);

    // one horizontally filtered copy per distinct run width
    let mut by_width: Vec<(usize, Vec<T>)> = Vec::new();
    for &w in &widths {
        if by_width.iter().all(|(bw, _)| *bw != w) {
            let mut filtered = vec![T::zero(); nx * ny];
            for j in 0..ny {
                let row = &slice.data[j * nx..(j + 1) * nx];
                sliding_row(row, w, which, &mut filtered[j * nx..(j + 1) * nx]);
            }
            by_width.push((w, filtered));
        }
    }
    let plane_for = |w: usize| -> &[T] {
        &by_width
            .iter()
            .find(|(bw, _)| *bw == w)
            .expect("width cached")
            .1
    };

    let mut out = slice.clone();
    for j in 0..ny {
        let dy_lo = (-(radius_px as isize)).max(-(j as isize));
        let dy_hi = (radius_px as isize).min((ny - 1 - j) as isize);
        let row0 = (j as isize + dy_lo) as usize;
        let first = plane_for(widths[dy_lo.unsigned_abs()]);
        out.data[j * nx..(j + 1) * nx].copy_from_slice(&first[row0 * nx..(row0 + 1) * nx]);
        for dy in (dy_lo + 1)..=dy_hi {
            let jj = (j as isize + dy) as usize;
            let src = &plane_for(widths[dy.unsigned_abs()])[jj * nx..(jj + 1) * nx];
            let dst = &mut out.data[j * nx..(j + 1) * nx];
            match which {
                Extreme::Min => {
                    for x in 0..nx {
                        dst[x] = dst[x].min(src[x]);
                    }
                }
                Extreme::Max => {
                    for x in 0..nx {
                        dst[x] = dst[x].max(src[x]);
                    }
                }
            }
        }
    }
    out
}

/// Grayscale erosion by a flat disk of the given pixel radius.
pub fn erode<T: Scalar>(slice: &Slice2D<T>, radius_px: usize) -> Slice2D<T> {
    disk_filter(slice, radius_px, Extreme::Min)
}

/// Grayscale dilation by a flat disk of the given pixel radius.
pub fn dilate<T: Scalar>(slice: &Slice2D<T>, radius_px: usize) -> Slice2D<T> {
    disk_filter(slice, radius_px, Extreme::Max)
}

/// Grayscale opening: erosion followed by dilation.
pub fn opening<T: Scalar>(slice: &Slice2D<T>, radius_px: usize) -> Slice2D<T> {
    dilate(&erode(slice, radius_px), radius_px)
}

/// White top-hat: input minus its opening. Non-negative everywhere;
/// bright structures narrower than the disk are retained, wider ones are
/// suppressed.
pub fn white_top_hat<T: Scalar>(slice: &Slice2D<T>, radius_px: usize) -> Slice2D<T> {
    let opened = opening(slice, radius_px);
    let mut out = slice.clone();
    for (o, value) in out.data.iter_mut().zip(opened.data.iter()) {
        *o = *o - *value;
    }
    out
}
