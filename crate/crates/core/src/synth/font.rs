//! Built-in 5×7 bitmap font for `A–Z` and `0–9`, shared by the scene
//! renderer and the template OCR.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Characters a plate may contain, in template order.
pub const ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

// One row per byte, bit 4 is the leftmost column.
const GLYPHS: [(char, [u8; GLYPH_H]); 36] = [
    (
        'A',
        [
            0b01110, 0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001,
        ],
    ),
    (
        'B',
        [
            0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110,
        ],
    ),
    (
        'C',
        [
            0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110,
        ],
    ),
    (
        'D',
        [
            0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100,
        ],
    ),
    (
        'E',
        [
            0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111,
        ],
    ),
    (
        'F',
        [
            0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000,
        ],
    ),
    (
        'G',
        [
            0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111,
        ],
    ),
    (
        'H',
        [
            0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001,
        ],
    ),
    (
        'I',
        [
            0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110,
        ],
    ),
    (
        'J',
        [
            0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100,
        ],
    ),
    (
        'K',
        [
            0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001,
        ],
    ),
    (
        'L',
        [
            0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111,
        ],
    ),
    (
        'M',
        [
            0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001,
        ],
    ),
    (
        'N',
        [
            0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001,
        ],
    ),
    (
        'O',
        [
            0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110,
        ],
    ),
    (
        'P',
        [
            0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000,
        ],
    ),
    (
        'Q',
        [
            0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101,
        ],
    ),
    (
        'R',
        [
            0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001,
        ],
    ),
    (
        'S',
        [
            0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110,
        ],
    ),
    (
        'T',
        [
            0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100,
        ],
    ),
    (
        'U',
        [
            0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110,
        ],
    ),
    (
        'V',
        [
            0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100,
        ],
    ),
    (
        'W',
        [
            0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010,
        ],
    ),
    (
        'X',
        [
            0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001,
        ],
    ),
    (
        'Y',
        [
            0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100,
        ],
    ),
    (
        'Z',
        [
            0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111,
        ],
    ),
    (
        '0',
        [
            0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110,
        ],
    ),
    (
        '1',
        [
            0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110,
        ],
    ),
    (
        '2',
        [
            0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111,
        ],
    ),
    (
        '3',
        [
            0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110,
        ],
    ),
    (
        '4',
        [
            0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010,
        ],
    ),
    (
        '5',
        [
            0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110,
        ],
    ),
    (
        '6',
        [
            0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110,
        ],
    ),
    (
        '7',
        [
            0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000,
        ],
    ),
    (
        '8',
        [
            0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110,
        ],
    ),
    (
        '9',
        [
            0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100,
        ],
    ),
];

/// Row bitmaps for `c`, or `None` outside the alphabet.
pub fn glyph(c: char) -> Option<&'static [u8; GLYPH_H]> {
    GLYPHS.iter().find(|(g, _)| *g == c).map(|(_, rows)| rows)
}

#[inline]
pub fn ink(rows: &[u8; GLYPH_H], col: usize, row: usize) -> bool {
    rows[row] >> (GLYPH_W - 1 - col) & 1 == 1
}

/// Iterates `(char, rows)` in alphabet order.
pub fn glyphs() -> impl Iterator<Item = (char, &'static [u8; GLYPH_H])> {
    GLYPHS.iter().map(|(c, rows)| (*c, rows))
}

/// Horizontal advance of one glyph including its one-column gap.
pub const ADVANCE: usize = GLYPH_W + 1;

/// Width in font pixels of `n` glyphs laid out with one-column gaps.
pub fn text_width(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        n * ADVANCE - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_matches_table() {
        let from_table: String = glyphs().map(|(c, _)| c).collect();
        assert_eq!(from_table, ALPHABET);
        assert!(glyph('a').is_none());
    }

    #[test]
    fn every_glyph_spans_full_height() {
        for (c, rows) in glyphs() {
            assert!(rows[0] != 0 && rows[GLYPH_H - 1] != 0, "{c}");
            assert!(rows.iter().all(|r| *r < 32), "{c}");
        }
    }

    #[test]
    fn inked_columns_are_contiguous_and_centered() {
        // Segmentation relies on glyphs never splitting into two column runs,
        // and on the ink centroid sitting on the middle column.
        for (c, rows) in glyphs() {
            let cols: Vec<bool> = (0..GLYPH_W)
                .map(|x| (0..GLYPH_H).any(|y| ink(rows, x, y)))
                .collect();
            let first = cols.iter().position(|&v| v).unwrap();
            let last = cols.iter().rposition(|&v| v).unwrap();
            assert!(cols[first..=last].iter().all(|&v| v), "{c}");
            assert_eq!(first + last, GLYPH_W - 1, "{c}");
        }
    }

    #[test]
    fn templates_are_pairwise_distinct() {
        let all: Vec<_> = glyphs().collect();
        for (i, (a, ra)) in all.iter().enumerate() {
            for (b, rb) in &all[i + 1..] {
                let diff: u32 = ra
                    .iter()
                    .zip(rb.iter())
                    .map(|(x, y)| (x ^ y).count_ones())
                    .sum();
                assert!(diff >= 2, "{a} vs {b} differ in {diff} cells");
            }
        }
    }

    #[test]
    fn text_width_counts_gaps() {
        assert_eq!(text_width(0), 0);
        assert_eq!(text_width(1), 5);
        assert_eq!(text_width(7), 41);
    }
}
