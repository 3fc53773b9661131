//! Rasters and coarse-to-fine pyramids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major 8-bit raster with one (gray) or three (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::Image(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Image::new(width, height, channels, vec![value; len])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u32, u32, u8) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> u8 {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Channel samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let ch = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * ch;
        &self.data[i..i + ch]
    }

    /// Samples of row `y`, all channels interleaved.
    #[inline]
    pub fn row(&self, y: u32) -> &[u8] {
        let stride = self.width as usize * self.channels as usize;
        let start = y as usize * stride;
        &self.data[start..start + stride]
    }

    /// Mean brightness over the whole image, brightness being the channel mean.
    pub fn mean_brightness(&self) -> f64 {
        let total: u64 = self.data.iter().map(|&v| v as u64).sum();
        total as f64 / (self.pixel_count() as f64 * self.channels as f64)
    }
}

/// Box-mean downsample by an integer factor.
///
/// Coarse pixel `(X, Y)` covers fine pixels `[X*ratio, min((X+1)*ratio, w))`
/// horizontally and likewise vertically, so a partial remainder block at the
/// right and bottom is averaged over the pixels it really has. This keeps
/// `ceil(fine / ratio) == coarse`, which is what label upsampling expects.
pub fn downsample(img: &Image, ratio: u32) -> Result<Image> {
    if ratio == 0 {
        return Err(Error::Dimension("compression ratio must be >= 1".into()));
    }
    if ratio == 1 {
        return Ok(img.clone());
    }
    let w = img.width();
    let h = img.height();
    let cw = w.div_ceil(ratio);
    let ch = h.div_ceil(ratio);
    let channels = img.channels() as usize;
    let mut data = vec![0u8; cw as usize * ch as usize * channels];
    let mut sums = vec![0u64; cw as usize * channels];
    for cy in 0..ch {
        sums.iter_mut().for_each(|s| *s = 0);
        let y0 = cy * ratio;
        let y1 = (y0 + ratio).min(h);
        for y in y0..y1 {
            let row = img.row(y);
            for x in 0..w as usize {
                let cx = x / ratio as usize;
                for c in 0..channels {
                    sums[cx * channels + c] += row[x * channels + c] as u64;
                }
            }
        }
        let rows = (y1 - y0) as u64;
        for cx in 0..cw {
            let x0 = cx * ratio;
            let x1 = (x0 + ratio).min(w);
            let count = rows * (x1 - x0) as u64;
            for c in 0..channels {
                let s = sums[cx as usize * channels + c];
                let out = (cy as usize * cw as usize + cx as usize) * channels + c;
                data[out] = ((s + count / 2) / count) as u8;
            }
        }
    }
    Image::new(cw, ch, img.channels(), data)
}

/// Resolution stack. Index 0 is the coarsest level, the last index is the
/// original image.
#[derive(Clone, Debug)]
pub struct Pyramid {
    levels: Vec<Image>,
    ratio: u32,
}

impl Pyramid {
    /// Wraps a single image as a one-level pyramid.
    pub fn single(img: Image) -> Self {
        Pyramid { levels: vec![img], ratio: 1 }
    }

    #[inline]
    pub fn ratio(&self) -> u32 {
        self.ratio
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `index`, 0 being the coarsest.
    #[inline]
    pub fn level(&self, index: usize) -> &Image {
        &self.levels[index]
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn coarsest(&self) -> &Image {
        &self.levels[0]
    }

    pub fn finest(&self) -> &Image {
        &self.levels[self.levels.len() - 1]
    }
}

/// Builds an `levels`-deep pyramid whose finest level is `img` and whose
/// adjacent levels differ by `ratio` in each dimension.
pub fn build_pyramid(img: Image, ratio: u32, levels: usize) -> Result<Pyramid> {
    if ratio == 0 {
        return Err(Error::Dimension("compression ratio must be >= 1".into()));
    }
    if levels == 0 {
        return Err(Error::Dimension("pyramid needs at least one level".into()));
    }
    let span = (ratio as u64).checked_pow(levels as u32 - 1).unwrap_or(u64::MAX);
    if (img.width() as u64) < span || (img.height() as u64) < span {
        return Err(Error::Dimension(format!(
            "{}x{} image cannot be reduced {} times by ratio {ratio}",
            img.width(),
            img.height(),
            levels - 1
        )));
    }
    let mut stack = Vec::with_capacity(levels);
    stack.push(img);
    for _ in 1..levels {
        let next = downsample(stack.last().unwrap(), ratio)?;
        stack.push(next);
    }
    stack.reverse();
    Ok(Pyramid { levels: stack, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::new(0, 2, 1, vec![]).is_err());
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0; 3]).is_err());
    }

    #[test]
    fn constant_pyramid() {
        let img = Image::filled(4, 4, 1, 100).unwrap();
        let p = build_pyramid(img, 2, 2).unwrap();
        assert_eq!(p.level(0), &Image::filled(2, 2, 1, 100).unwrap());
    }

    #[test]
    fn two_tone_mean() {
        let img = Image::new(2, 2, 1, vec![0, 0, 200, 200]).unwrap();
        let p = build_pyramid(img, 2, 2).unwrap();
        assert_eq!(p.level(0).data(), &[100]);
    }

    #[test]
    fn identity_ratio() {
        let img = Image::from_fn(3, 2, 3, |x, y, c| (x * 10 + y * 3 + c as u32) as u8).unwrap();
        let p = build_pyramid(img.clone(), 1, 3).unwrap();
        assert_eq!(p.len(), 3);
        for l in p.levels() {
            assert_eq!(l, &img);
        }
    }

    #[test]
    fn remainder_block_uses_true_count() {
        // 3x1 row [10, 20, 90]: coarse pixels cover {10,20} and {90}.
        let img = Image::new(3, 1, 1, vec![10, 20, 90]).unwrap();
        let d = downsample(&img, 2).unwrap();
        assert_eq!((d.width(), d.height()), (2, 1));
        assert_eq!(d.data(), &[15, 90]);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let img = Image::filled(4, 4, 1, 0).unwrap();
        assert!(matches!(build_pyramid(img, 3, 3), Err(Error::Dimension(_))));
    }
}
