//! CIE-L\*u\*v\* to sRGB conversion and patch rendering.

use crate::error::{invalid, Result};
use crate::stimulus::ColorPoint;

/// Reference white in CIE XYZ with Y normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WhitePoint {
    pub const D65: WhitePoint = WhitePoint {
        x: 0.95047,
        y: 1.0,
        z: 1.08883,
    };

    fn uv_prime(&self) -> (f64, f64) {
        let d = self.x + 15.0 * self.y + 3.0 * self.z;
        (4.0 * self.x / d, 9.0 * self.y / d)
    }
}

const EPSILON_L: f64 = 8.0;
// (3/29)^3
const KAPPA_INV: f64 = 27.0 / 24389.0;

/// L\*u\*v\* to XYZ (same scale as the white point).
pub fn luv_to_xyz(p: ColorPoint, white: WhitePoint) -> [f64; 3] {
    if p.l <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let y = if p.l > EPSILON_L {
        white.y * ((p.l + 16.0) / 116.0).powi(3)
    } else {
        white.y * p.l * KAPPA_INV
    };
    let (un, vn) = white.uv_prime();
    let up = p.u / (13.0 * p.l) + un;
    let vp = p.v / (13.0 * p.l) + vn;
    if vp == 0.0 {
        return [0.0, y, 0.0];
    }
    let x = y * 9.0 * up / (4.0 * vp);
    let z = y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp);
    [x, y, z]
}

fn srgb_gamma(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// L\*u\*v\* to gamma-encoded sRGB, each channel clamped to `[0, 1]`.
pub fn luv_to_srgb(p: ColorPoint, white: WhitePoint) -> [f64; 3] {
    let [x, y, z] = luv_to_xyz(p, white);
    let lin = [
        3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z,
        -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z,
        0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z,
    ];
    lin.map(|c| srgb_gamma(c.clamp(0.0, 1.0)).clamp(0.0, 1.0))
}

/// Patch layout. The defaults are a mid-gray square with a circle spanning
/// 80% of the side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchStyle {
    pub background: [u8; 3],
    pub radius_fraction: f64,
    pub white: WhitePoint,
}

impl Default for PatchStyle {
    fn default() -> Self {
        Self {
            background: [128, 128, 128],
            radius_fraction: 0.4,
            white: WhitePoint::D65,
        }
    }
}

/// An 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }
}

fn to_byte(c: f64) -> u8 {
    (c * 255.0).round() as u8
}

/// Renders a filled circle of color `p` on the style's background.
pub fn render_patch(p: ColorPoint, size_px: u32, style: &PatchStyle) -> Result<Raster> {
    if size_px < 16 {
        return Err(invalid(format!(
            "patch size {size_px} is below the 16 px minimum"
        )));
    }
    let fill = luv_to_srgb(p, style.white).map(to_byte);
    let center = size_px as f64 / 2.0;
    let radius = style.radius_fraction * size_px as f64;
    let mut pixels = Vec::with_capacity(3 * (size_px * size_px) as usize);
    for y in 0..size_px {
        for x in 0..size_px {
            let dx = x as f64 + 0.5 - center;
            let dy = y as f64 + 0.5 - center;
            let color = if dx * dx + dy * dy <= radius * radius {
                fill
            } else {
                style.background
            };
            pixels.extend_from_slice(&color);
        }
    }
    Ok(Raster {
        width: size_px,
        height: size_px,
        pixels,
    })
}

/// File name of a rendered stimulus (`<dataset>_<index>.png`).
pub fn patch_file_name(dataset: &str, index: usize) -> String {
    format!("{dataset}_{index}.png")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn black_and_white() {
        assert_eq!(
            luv_to_srgb(ColorPoint::new(0.0, 0.0, 0.0), WhitePoint::D65),
            [0.0; 3]
        );
        let white = luv_to_srgb(ColorPoint::new(100.0, 0.0, 0.0), WhitePoint::D65);
        assert!(close(white, [1.0; 3], 1e-3), "{white:?}");
    }

    #[test]
    fn out_of_gamut_is_clamped() {
        let c = luv_to_srgb(ColorPoint::new(60.0, 400.0, -400.0), WhitePoint::D65);
        assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        let c = luv_to_srgb(ColorPoint::new(140.0, 0.0, 0.0), WhitePoint::D65);
        assert!(close(c, [1.0; 3], 1e-12), "{c:?}");
    }

    #[test]
    fn white_patch_center() {
        let r = render_patch(ColorPoint::new(100.0, 0.0, 0.0), 64, &PatchStyle::default()).unwrap();
        assert_eq!(r.pixel(32, 32), [255, 255, 255]);
        assert_eq!(r.pixel(0, 0), [128, 128, 128]);
    }

    #[test]
    fn deterministic_png() {
        let p = ColorPoint::new(60.0, 30.0, 30.0);
        let a = render_patch(p, 48, &PatchStyle::default())
            .unwrap()
            .to_png()
            .unwrap();
        let b = render_patch(p, 48, &PatchStyle::default())
            .unwrap()
            .to_png()
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }

    #[test]
    fn small_patch_rejected() {
        assert!(render_patch(ColorPoint::new(50.0, 0.0, 0.0), 15, &PatchStyle::default()).is_err());
    }

    #[test]
    fn warm_patch_is_red_dominant() {
        // easy dataset, component 1 (positive u and v): a warm orange hue
        let [r, g, b] = luv_to_srgb(ColorPoint::new(60.0, 30.0, 30.0), WhitePoint::D65);
        assert!(r > g && g > b, "{r} {g} {b}");
    }

    #[test]
    fn matches_reference_converter() {
        // frozen from scikit-image `luv2rgb` (D65, sRGB companding)
        let cases = [
            (
                (60.0, -10.0, 20.0),
                [0.511_288_970, 0.590_114_849, 0.474_714_336],
            ),
            (
                (60.0, 30.0, 30.0),
                [0.697_108_083, 0.535_399_439, 0.393_665_617],
            ),
            (
                (60.0, -30.0, -30.0),
                [0.330_906_932, 0.601_307_757, 0.709_322_939],
            ),
            (
                (45.0, 12.0, -33.0),
                [0.486_557_253, 0.375_115_452, 0.556_249_326],
            ),
        ];
        for ((l, u, v), expected) in cases {
            let got = luv_to_srgb(ColorPoint::new(l, u, v), WhitePoint::D65);
            assert!(
                close(got, expected, 1e-3),
                "{l} {u} {v}: {got:?} vs {expected:?}"
            );
        }
    }
}
