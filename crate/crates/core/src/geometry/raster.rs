//! Point-sampled triangle coverage shared by the atlas and depth rasterizers.
//!
//! A sample belongs to a triangle iff it lies strictly inside, or on an edge
//! the triangle owns under the top-left rule. Two triangles sharing an edge
//! traverse it in opposite directions, so exactly one of them owns it.

/// Triangle prepared for repeated coverage queries.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeTriangle {
    pts: [[f64; 2]; 3],
    // Maps the (possibly reordered) corner slots back to the caller's order.
    order: [usize; 3],
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn owns_edge(a: [f64; 2], b: [f64; 2]) -> bool {
    let dy = b[1] - a[1];
    let dx = b[0] - a[0];
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

impl EdgeTriangle {
    /// Returns `None` when twice the signed area has magnitude `<= 2 * min_area`.
    pub fn new(pts: [[f64; 2]; 3], min_area: f64) -> Option<Self> {
        let area2 = edge(pts[0], pts[1], pts[2]);
        if !area2.is_finite() || area2.abs() <= 2.0 * min_area {
            return None;
        }
        let (pts, order) = if area2 < 0.0 {
            ([pts[0], pts[2], pts[1]], [0, 2, 1])
        } else {
            (pts, [0, 1, 2])
        };
        Some(Self { pts, order })
    }

    /// Bounds of the triangle in continuous coordinates.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = self.pts[0];
        let mut hi = self.pts[0];
        for p in &self.pts[1..] {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Barycentric coordinates of `p` in the caller's corner order, or `None`
    /// if `p` is not covered.
    pub fn cover(&self, p: [f64; 2]) -> Option<[f64; 3]> {
        let [a, b, c] = self.pts;
        let w = [edge(b, c, p), edge(c, a, p), edge(a, b, p)];
        let owners = [owns_edge(b, c), owns_edge(c, a), owns_edge(a, b)];
        for k in 0..3 {
            if w[k] < 0.0 || (w[k] == 0.0 && !owners[k]) {
                return None;
            }
        }
        let sum = w[0] + w[1] + w[2];
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[self.order[k]] = w[k] / sum;
        }
        Some(out)
    }

    /// Inclusive integer sample range along one axis, for samples located at
    /// `index + offset`, clipped to `[0, len)`.
    pub fn sample_span(lo: f64, hi: f64, offset: f64, len: usize) -> Option<(usize, usize)> {
        if len == 0 {
            return None;
        }
        let first = (lo - offset).ceil().max(0.0);
        let last = (hi - offset).floor().min(len as f64 - 1.0);
        if !(first <= last) {
            return None;
        }
        Some((first as usize, last as usize))
    }
}
