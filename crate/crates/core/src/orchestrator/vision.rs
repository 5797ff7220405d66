//! Small grayscale helpers shared by the OCR and the connected-component
//! detector.

pub fn histogram(gray: &[u8]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in gray {
        h[v as usize] += 1;
    }
    h
}

/// Otsu threshold over a histogram: values `<= t` form the dark class.
/// Also returns the two class means. `None` for an empty or single-valued
/// histogram.
pub fn otsu(hist: &[u64; 256]) -> Option<(u8, f64, f64)> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0u64, 0f64);
    let mut best: Option<(u8, f64, f64, f64)> = None;
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|b| between > b.3) {
            best = Some((t as u8, m0, m1, between));
        }
    }
    best.map(|(t, m0, m1, _)| (t, m0, m1))
}

/// Inclusive pixel bounds and size of a 4-connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Component {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    /// Fraction of the bounding rectangle covered by the component.
    pub fn fill(&self) -> f64 {
        self.area as f64 / (self.width() * self.height()) as f64
    }
}

/// 4-connected components of `mask` in raster-scan discovery order.
pub fn components(mask: &[bool], width: usize, height: usize) -> Vec<Component> {
    debug_assert_eq!(mask.len(), width * height);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (sx, sy) = (start % width, start / width);
        let mut c = Component {
            area: 0,
            x0: sx,
            y0: sy,
            x1: sx,
            y1: sy,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            c.area += 1;
            c.x0 = c.x0.min(x);
            c.x1 = c.x1.max(x);
            c.y0 = c.y0.min(y);
            c.y1 = c.y1.max(y);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        out.push(c);
    }
    out
}
