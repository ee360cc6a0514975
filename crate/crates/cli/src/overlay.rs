//! Frame-1 overlay for choosing the seed instance.

use handseg::{PixelSet, RgbFrame};

const PALETTE: [[u8; 3]; 6] =
    [[230, 60, 60], [60, 110, 230], [240, 200, 40], [200, 70, 220], [40, 210, 220], [250, 140, 40]];

/// 3x5 digit glyphs, one row per byte, high three bits used.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const SCALE: usize = 3;

fn blend(a: [u8; 3], b: [u8; 3]) -> [u8; 3] {
    [0, 1, 2].map(|i| ((a[i] as u16 + b[i] as u16) / 2) as u8)
}

fn fill(img: &mut RgbFrame, row: i64, col: i64, h: usize, w: usize, color: [u8; 3]) {
    for r in row.max(0)..(row + h as i64).min(img.height as i64) {
        for c in col.max(0)..(col + w as i64).min(img.width as i64) {
            img.set(r as usize, c as usize, color);
        }
    }
}

/// Draws `text` (digits only) on a black plate with its top-left at `(row, col)`.
pub fn draw_tag(img: &mut RgbFrame, row: i64, col: i64, text: &str, color: [u8; 3]) {
    let glyph_w = 4 * SCALE;
    let plate_w = text.len() * glyph_w + SCALE;
    fill(img, row - SCALE as i64, col - SCALE as i64, 7 * SCALE, plate_w + SCALE, [0, 0, 0]);
    for (i, ch) in text.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        for (gr, bits) in DIGITS[d as usize].iter().enumerate() {
            for gc in 0..3 {
                if bits & (0b100 >> gc) != 0 {
                    let r = row + (gr * SCALE) as i64;
                    let c = col + (i * glyph_w + gc * SCALE) as i64;
                    fill(img, r, c, SCALE, SCALE, color);
                }
            }
        }
    }
}

/// Tints each instance and tags it with its 1-based number at its
/// top-left bounding-box corner.
pub fn render(base: &RgbFrame, instances: &[PixelSet]) -> RgbFrame {
    let mut img = base.clone();
    for (i, pixels) in instances.iter().enumerate() {
        let tint = PALETTE[i % PALETTE.len()];
        for p in pixels {
            let (r, c) = (p.row as usize, p.col as usize);
            img.set(r, c, blend(img.get(r, c), tint));
        }
    }
    for (i, pixels) in instances.iter().enumerate() {
        let (row, col) = pixels.iter().fold((u32::MAX, u32::MAX), |(r, c), p| (r.min(p.row), c.min(p.col)));
        draw_tag(&mut img, row as i64, col as i64, &(i + 1).to_string(), PALETTE[i % PALETTE.len()]);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use handseg::Pixel;

    #[test]
    fn tags_are_drawn_inside_the_image() {
        let base = RgbFrame::filled(40, 30, [128, 128, 128]);
        let a: PixelSet = (10..14).flat_map(|r| (10..14).map(move |c| Pixel::new(r, c))).collect();
        let b: PixelSet = (30..33).map(|c| Pixel::new(0, c)).collect();
        let img = render(&base, &[a, b]);
        assert_ne!(img, base);
        // the "1" glyph's top row center
        assert_eq!(img.get(10, 10 + SCALE), PALETTE[0]);
    }
}
