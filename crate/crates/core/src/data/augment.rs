//! Label-preserving image augmentation: shifted crops, small rotations,
//! and axis flips. All transforms keep the input shape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentOps {
    /// Zero-pad width for the random crop; 0 disables cropping.
    pub crop_pad: usize,
    /// Maximum absolute rotation in degrees; 0 disables rotation.
    pub rotate_deg: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl AugmentOps {
    pub fn none() -> AugmentOps {
        AugmentOps { crop_pad: 0, rotate_deg: 0.0, hflip: false, vflip: false }
    }

    pub fn standard() -> AugmentOps {
        AugmentOps { crop_pad: 4, rotate_deg: 15.0, hflip: true, vflip: true }
    }

    pub fn is_noop(&self) -> bool {
        self.crop_pad == 0 && self.rotate_deg == 0.0 && !self.hflip && !self.vflip
    }
}

/// Mirror each row of every channel.
pub fn hflip_image(img: &mut [f64], c: usize, h: usize, w: usize) {
    for ch in 0..c {
        for y in 0..h {
            img[(ch * h + y) * w..(ch * h + y + 1) * w].reverse();
        }
    }
}

/// Reverse the row order of every channel.
pub fn vflip_image(img: &mut [f64], c: usize, h: usize, w: usize) {
    for ch in 0..c {
        for y in 0..h / 2 {
            let top = (ch * h + y) * w;
            let bottom = (ch * h + (h - 1 - y)) * w;
            for x in 0..w {
                img.swap(top + x, bottom + x);
            }
        }
    }
}

/// Zero-pad by `pad` on every side, then crop back to `h x w` at offset
/// `(dy, dx)` into the padded image; `dy = dx = pad` is the identity.
pub fn crop_shift(src: &[f64], c: usize, h: usize, w: usize, pad: usize, dy: usize, dx: usize) -> Vec<f64> {
    debug_assert!(dy <= 2 * pad && dx <= 2 * pad);
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        for y in 0..h {
            let sy = y as isize + dy as isize - pad as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..w {
                let sx = x as isize + dx as isize - pad as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                out[(ch * h + y) * w + x] = src[(ch * h + sy as usize) * w + sx as usize];
            }
        }
    }
    out
}

/// Rotate around the image center with bilinear sampling and zero
/// padding outside the frame. Exactly 0 degrees is a copy.
pub fn rotate_image(src: &[f64], c: usize, h: usize, w: usize, degrees: f64) -> Vec<f64> {
    if degrees == 0.0 {
        return src.to_vec();
    }
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let rx = x as f64 - cx;
                let ry = y as f64 - cy;
                let sx = cos * rx + sin * ry + cx;
                let sy = -sin * rx + cos * ry + cy;
                out[(ch * h + y) * w + x] = bilinear(plane, h, w, sy, sx);
            }
        }
    }
    out
}

fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let mut acc = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        let yy = y0 as isize + dy;
        if wy == 0.0 || yy < 0 || yy >= h as isize {
            continue;
        }
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let xx = x0 as isize + dx;
            if wx == 0.0 || xx < 0 || xx >= w as isize {
                continue;
            }
            acc += wy * wx * plane[yy as usize * w + xx as usize];
        }
    }
    acc
}

/// Apply the configured transforms to every image in `[n, c, h, w]`.
/// Disabled ops draw nothing from `rng`, so a fully disabled config is
/// a bitwise identity.
pub fn augment_batch(images: &Tensor, ops: &AugmentOps, rng: &mut ChaCha8Rng) -> Tensor {
    if ops.is_noop() {
        return images.clone();
    }
    let shape = images.shape().to_vec();
    let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let sz = c * h * w;
    let mut data = Vec::with_capacity(images.numel());
    for i in 0..n {
        let mut img = images.data()[i * sz..(i + 1) * sz].to_vec();
        if ops.crop_pad > 0 {
            let dy = rng.random_range(0..=2 * ops.crop_pad);
            let dx = rng.random_range(0..=2 * ops.crop_pad);
            img = crop_shift(&img, c, h, w, ops.crop_pad, dy, dx);
        }
        if ops.rotate_deg > 0.0 {
            let angle = rng.random_range(-ops.rotate_deg..=ops.rotate_deg);
            img = rotate_image(&img, c, h, w, angle);
        }
        if ops.hflip && rng.random::<bool>() {
            hflip_image(&mut img, c, h, w);
        }
        if ops.vflip && rng.random::<bool>() {
            vflip_image(&mut img, c, h, w);
        }
        data.extend_from_slice(&img);
    }
    Tensor::from_parts(shape, data)
}
