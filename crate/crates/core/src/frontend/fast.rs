use rayon::prelude::*;

use crate::{GrayImage, Point2};

/// Bresenham circle of radius 3, clockwise from the top.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC: usize = 9;
const BORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    /// Integer pixel position (`u` = column, `v` = row).
    pub position: Point2,
    pub score: f64,
}

impl Corner {
    fn row(&self) -> usize {
        self.position.v as usize
    }

    fn col(&self) -> usize {
        self.position.u as usize
    }

    /// Higher score first, then smaller row, then smaller column.
    fn precedes(&self, other: &Corner) -> bool {
        match self.score.total_cmp(&other.score) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => (self.row(), self.col()) < (other.row(), other.col()),
        }
    }
}

/// Segment-test score at `(x, y)`, or `None` when no arc of 9 contiguous
/// circle pixels is uniformly brighter or darker than the center by more
/// than `threshold`. At most one such arc can exist.
fn segment_score(img: &GrayImage, x: usize, y: usize, threshold: i32) -> Option<f64> {
    let c = img.get(x, y) as i32;
    let mut diff = [0i32; 16];
    let mut class = [0i8; 16];
    for (k, (dx, dy)) in CIRCLE.iter().enumerate() {
        let p = img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as i32;
        diff[k] = p - c;
        class[k] = if p > c + threshold {
            1
        } else if p < c - threshold {
            -1
        } else {
            0
        };
    }
    for sign in [1i8, -1] {
        if class.iter().all(|&s| s == sign) {
            return Some(diff.iter().map(|d| d.abs() as f64).sum());
        }
        // start right after a non-member so runs are not split by the wrap
        let Some(start) = (0..16).find(|&k| class[k] != sign) else {
            continue;
        };
        let mut k = 0;
        while k < 16 {
            let idx = (start + 1 + k) % 16;
            if class[idx] != sign {
                k += 1;
                continue;
            }
            let mut len = 0;
            let mut sum = 0.0;
            while k < 16 && class[(start + 1 + k) % 16] == sign {
                sum += diff[(start + 1 + k) % 16].abs() as f64;
                len += 1;
                k += 1;
            }
            if len >= ARC {
                return Some(sum);
            }
        }
    }
    None
}

fn raw_corners(img: &GrayImage, threshold: u8) -> Vec<Corner> {
    let (w, h) = (img.width(), img.height());
    if w <= 2 * BORDER || h <= 2 * BORDER {
        return Vec::new();
    }
    (BORDER..h - BORDER)
        .into_par_iter()
        .flat_map_iter(|y| {
            (BORDER..w - BORDER).filter_map(move |x| {
                segment_score(img, x, y, threshold as i32).map(|score| Corner {
                    position: Point2::new(x as f64, y as f64),
                    score,
                })
            })
        })
        .collect()
}

/// Keeps corners that precede every other corner within `radius`.
fn non_max_suppression(
    corners: &[Corner],
    width: usize,
    height: usize,
    radius: f64,
) -> Vec<Corner> {
    let mut grid: Vec<Option<usize>> = vec![None; width * height];
    for (i, c) in corners.iter().enumerate() {
        grid[c.row() * width + c.col()] = Some(i);
    }
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    corners
        .par_iter()
        .filter(|c| {
            for dy in -r..=r {
                for dx in -r..=r {
                    if (dx == 0 && dy == 0) || ((dx * dx + dy * dy) as f64) > r2 {
                        continue;
                    }
                    let (x, y) = (c.col() as isize + dx, c.row() as isize + dy);
                    if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
                        continue;
                    }
                    if let Some(j) = grid[y as usize * width + x as usize] {
                        if corners[j].precedes(c) {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}

/// FAST-9 corners after non-maximal suppression, ordered by descending
/// score, then row, then column.
pub fn fast_detect(img: &GrayImage, threshold: u8, nms_radius: f64) -> Vec<Corner> {
    let raw = raw_corners(img, threshold.max(1));
    let mut kept = non_max_suppression(&raw, img.width(), img.height(), nms_radius);
    kept.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.row().cmp(&b.row()))
            .then(a.col().cmp(&b.col()))
    });
    kept
}
