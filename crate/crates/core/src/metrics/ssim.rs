//! Mean structural similarity over an 11x11 Gaussian window (sigma 1.5).
//!
//! Images are reduced to Rec.601 luma first. Only windows lying fully inside
//! the image contribute, so the map is `(w - 10) x (h - 10)`.

use crate::error::{ForgeError, Result};
use crate::model::ImageBuffer;
use crate::scalar::Scalar;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_DYNAMIC_RANGE: f64 = 255.0;

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Stabilizing constants `(C1, C2)`.
pub fn ssim_constants<T: Scalar>() -> (T, T) {
    let c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE).powi(2);
    (T::from_f64_lossy(c1), T::from_f64_lossy(c2))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_kernel<T: Scalar>() -> [T; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut taps = [T::zero(); SSIM_WINDOW];
    for (t, r) in taps.iter_mut().zip(raw) {
        *t = T::from_f64_lossy(r / total);
    }
    taps
}

/// Luma plane of `image` as a flat row-major vector.
pub fn luma<T: Scalar>(image: &ImageBuffer) -> Vec<T> {
    match image.channels() {
        1 => image
            .data()
            .iter()
            .map(|&v| T::from_f64_lossy(v as f64))
            .collect(),
        _ => {
            let [wr, wg, wb] = LUMA_WEIGHTS.map(T::from_f64_lossy);
            image
                .data()
                .chunks_exact(3)
                .map(|p| {
                    wr * T::from_f64_lossy(p[0] as f64)
                        + wg * T::from_f64_lossy(p[1] as f64)
                        + wb * T::from_f64_lossy(p[2] as f64)
                })
                .collect()
        }
    }
}

// Separable "valid" correlation of a w x h plane with the window.
fn filter_valid<T: Scalar>(plane: &[T], w: usize, h: usize, taps: &[T; SSIM_WINDOW]) -> Vec<T> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horizontal = vec![T::zero(); ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * row[x + k];
            }
            horizontal[y * ow + x] = acc;
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * horizontal[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Local SSIM values for every fully-contained window position.
pub fn ssim_map<T: Scalar>(img_a: &ImageBuffer, img_b: &ImageBuffer) -> Result<Vec<T>> {
    if img_a.dims() != img_b.dims() {
        return Err(ForgeError::dims(img_a.dims(), img_b.dims()));
    }
    let (w, h) = (img_a.width() as usize, img_a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(ForgeError::ImageTooSmall {
            width: img_a.width(),
            height: img_a.height(),
            window: SSIM_WINDOW,
        });
    }
    let a = luma::<T>(img_a);
    let b = luma::<T>(img_b);
    let taps = gaussian_kernel::<T>();

    let aa: Vec<T> = a.iter().map(|&v| v * v).collect();
    let bb: Vec<T> = b.iter().map(|&v| v * v).collect();
    let ab: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| x * y).collect();

    let mu_a = filter_valid(&a, w, h, &taps);
    let mu_b = filter_valid(&b, w, h, &taps);
    let e_aa = filter_valid(&aa, w, h, &taps);
    let e_bb = filter_valid(&bb, w, h, &taps);
    let e_ab = filter_valid(&ab, w, h, &taps);

    let (c1, c2) = ssim_constants::<T>();
    let two = T::one() + T::one();
    Ok((0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((two * ma * mb + c1) * (two * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .collect())
}

/// Mean SSIM between two images of equal size.
pub fn ssim<T: Scalar>(img_a: &ImageBuffer, img_b: &ImageBuffer) -> Result<T> {
    let map = ssim_map::<T>(img_a, img_b)?;
    let n = T::from_usize_lossy(map.len());
    Ok(map.into_iter().sum::<T>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel::<f64>();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
        assert!(k[5] > k[4]);
    }

    #[test]
    fn constants() {
        let (c1, c2) = ssim_constants::<f64>();
        assert!((c1 - 6.5025).abs() < 1e-12);
        assert!((c2 - 58.5225).abs() < 1e-12);
    }

    #[test]
    fn identical_images_score_one() {
        let data: Vec<u8> = (0..(20 * 17 * 3)).map(|i| (i * 37 % 251) as u8).collect();
        let img = ImageBuffer::new(20, 17, 3, data).unwrap();
        assert_eq!(ssim::<f64>(&img, &img).unwrap(), 1.0);
        assert_eq!(ssim::<f32>(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn black_vs_white_closed_form() {
        // zero variance everywhere: SSIM = C1 / (255^2 + C1)
        let black = ImageBuffer::filled(16, 16, 1, 0).unwrap();
        let white = ImageBuffer::filled(16, 16, 1, 255).unwrap();
        let (c1, _) = ssim_constants::<f64>();
        let expected = c1 / (255.0 * 255.0 + c1);
        let got = ssim::<f64>(&black, &white).unwrap();
        assert!(
            (got - expected).abs() / expected < 1e-9,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn luma_weights_rgb() {
        let img = ImageBuffer::new(1, 1, 3, vec![100, 200, 50]).unwrap();
        let y = luma::<f64>(&img)[0];
        assert!((y - (29.9 + 117.4 + 5.7)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = ImageBuffer::filled(10, 30, 1, 0).unwrap();
        assert!(matches!(
            ssim::<f64>(&a, &a),
            Err(ForgeError::ImageTooSmall { .. })
        ));
        let b = ImageBuffer::filled(11, 11, 1, 0).unwrap();
        let c = ImageBuffer::filled(12, 11, 1, 0).unwrap();
        assert!(matches!(
            ssim::<f64>(&b, &c),
            Err(ForgeError::DimensionMismatch { .. })
        ));
        assert_eq!(ssim_map::<f64>(&b, &b).unwrap().len(), 1);
    }
}
