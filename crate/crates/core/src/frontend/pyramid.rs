use super::FrontendError;
use crate::GrayImage;

pub const MIN_LEVEL_SIZE: usize = 32;

/// Level 0 is the input; each further level halves both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevels {
    pub levels: Vec<GrayImage>,
}

impl PyramidLevels {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, i: usize) -> &GrayImage {
        &self.levels[i]
    }
}

/// 2×2 box filter with round-half-up, `floor(sum / 4 + 0.5)`.
pub fn downsample_half(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width() / 2, img.height() / 2);
    GrayImage::from_fn(w, h, |x, y| {
        let s = img.get(2 * x, 2 * y) as u32
            + img.get(2 * x + 1, 2 * y) as u32
            + img.get(2 * x, 2 * y + 1) as u32
            + img.get(2 * x + 1, 2 * y + 1) as u32;
        ((s + 2) / 4) as u8
    })
}

pub fn build_pyramid(img: &GrayImage, levels: usize) -> Result<PyramidLevels, FrontendError> {
    let too_small = FrontendError::TooSmall {
        width: img.width(),
        height: img.height(),
        levels,
    };
    if levels == 0 {
        return Err(too_small);
    }
    let coarsest = (img.width() >> (levels - 1), img.height() >> (levels - 1));
    if coarsest.0 < MIN_LEVEL_SIZE || coarsest.1 < MIN_LEVEL_SIZE {
        return Err(too_small);
    }
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let next = downsample_half(out.last().expect("non-empty"));
        out.push(next);
    }
    Ok(PyramidLevels { levels: out })
}
