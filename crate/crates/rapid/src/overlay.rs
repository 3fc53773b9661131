//! Superpixel boundary overlay and ROI mask images.

use rapid_core::metrics::{boundary_pixels, BinaryMask};
use rapid_core::{Image, LabelMap};

pub const BOUNDARY_RGB: [u8; 3] = [255, 0, 0];

/// The source image as RGB with every pixel that has a differently labeled
/// 4-neighbor painted red.
pub fn boundary_overlay(img: &Image, lm: &LabelMap) -> Image {
    let edges = boundary_pixels(lm.labels(), lm.width(), lm.height());
    let ch = img.channels() as usize;
    let mut data = Vec::with_capacity(img.pixel_count() * 3);
    for (px, &edge) in img.data().chunks_exact(ch).zip(&edges) {
        if edge {
            data.extend_from_slice(&BOUNDARY_RGB);
        } else if ch == 1 {
            data.extend_from_slice(&[px[0]; 3]);
        } else {
            data.extend_from_slice(px);
        }
    }
    Image::new(img.width(), img.height(), 3, data).expect("overlay dimensions")
}

/// 255 for ROI pixels, 0 elsewhere.
pub fn mask_image(mask: &BinaryMask) -> Image {
    let data = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    Image::new(mask.width, mask.height, 1, data).expect("mask dimensions")
}

/// Reads a mask back: any nonzero sample is ROI.
pub fn mask_from_image(img: &Image) -> BinaryMask {
    let ch = img.channels() as usize;
    let bits = img.data().chunks_exact(ch).map(|p| p.iter().any(|&v| v != 0)).collect();
    BinaryMask { width: img.width(), height: img.height(), bits }
}

/// Ground-truth segment ids from a gray image: distinct sample values are
/// renumbered densely from 0 in increasing order.
pub fn segments_from_image(img: &Image) -> LabelMap {
    let ch = img.channels() as usize;
    let mut ids = [u32::MAX; 256];
    for px in img.data().chunks_exact(ch) {
        ids[px[0] as usize] = 0;
    }
    let mut next = 0;
    for id in ids.iter_mut().filter(|v| **v == 0) {
        *id = next;
        next += 1;
    }
    let labels = img.data().chunks_exact(ch).map(|p| ids[p[0] as usize]).collect();
    LabelMap::new(img.width(), img.height(), next, labels).expect("dense ids")
}
