use super::{PlotFrame, Region, SNAP};
use crate::{Error, Result};

/// Axis-aligned box given by its center and full extents, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectShape {
    pub x_c: f64,
    pub y_c: f64,
    /// Extent along x.
    pub l: f64,
    /// Extent along y.
    pub h: f64,
}

impl RectShape {
    pub fn new(x_c: f64, y_c: f64, l: f64, h: f64) -> Result<Self> {
        if ![x_c, y_c, l, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "rectangle values must be finite".into(),
            ));
        }
        if !(l > 0.0 && h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rectangle extents must be positive, got {l} x {h}"
            )));
        }
        Ok(RectShape { x_c, y_c, l, h })
    }

    /// Box with corners `(x0, y0)` and `(x1, y1)`.
    pub fn from_bounds(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        RectShape::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    /// `(x0, y0, x1, y1)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.x_c - self.l / 2.0,
            self.y_c - self.h / 2.0,
            self.x_c + self.l / 2.0,
            self.y_c + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.l * self.h
    }

    /// Cells of the box grown outward by `d` meters on every side
    /// (`d < 0` shrinks it).
    pub fn rasterize_grown(&self, d: f64, frame: &PlotFrame) -> Region {
        let mut r = Region::empty(frame);
        let (cols, rows) = self.grown_spans(d, frame);
        r.fill_block(cols, rows);
        r
    }

    /// Pixel count of [`Self::rasterize_grown`] without building the region.
    pub fn count_grown(&self, d: f64, frame: &PlotFrame) -> u64 {
        let (cols, rows) = self.grown_spans(d, frame);
        (cols.len() * rows.len()) as u64
    }

    fn grown_spans(
        &self,
        d: f64,
        frame: &PlotFrame,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (x0, y0, x1, y1) = self.bounds();
        (
            frame.column_span(x0 - d, x1 + d),
            frame.row_span(y0 - d, y1 + d),
        )
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (x0, y0, x1, y1) = self.bounds();
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }
}

/// Simple polygon with optional holes. Rings are stored open (the closing
/// vertex is not repeated).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyShape {
    exterior: Vec<[f64; 2]>,
    holes: Vec<Vec<[f64; 2]>>,
}

impl PolyShape {
    /// Validates and builds a polygon. Rings may be given open or closed.
    pub fn new(exterior: Vec<[f64; 2]>, holes: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let exterior = open_ring(exterior);
        let holes: Vec<_> = holes.into_iter().map(open_ring).collect();
        for ring in std::iter::once(&exterior).chain(&holes) {
            if ring.len() < 3 {
                return Err(Error::Validation(
                    "polygon ring has fewer than 3 vertices".into(),
                ));
            }
            if !ring.iter().flatten().all(|v| v.is_finite()) {
                return Err(Error::Validation(
                    "polygon coordinates must be finite".into(),
                ));
            }
        }
        let poly = PolyShape { exterior, holes };
        if poly.self_intersects() {
            return Err(Error::Validation("polygon is self-intersecting".into()));
        }
        if !(poly.area() > 0.0) {
            return Err(Error::Validation("polygon has no positive area".into()));
        }
        Ok(poly)
    }

    pub fn exterior(&self) -> &[[f64; 2]] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<[f64; 2]>] {
        &self.holes
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<[f64; 2]>> {
        std::iter::once(&self.exterior).chain(&self.holes)
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.rings()
            .flat_map(|ring| (0..ring.len()).map(move |k| (ring[k], ring[(k + 1) % ring.len()])))
    }

    pub fn area(&self) -> f64 {
        let holes: f64 = self.holes.iter().map(|h| signed_area(h).abs()).sum();
        signed_area(&self.exterior).abs() - holes
    }

    pub fn centroid(&self) -> (f64, f64) {
        let mut total = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for (k, ring) in self.rings().enumerate() {
            let a = signed_area(ring);
            // exterior counts positive, holes negative, whatever the winding
            let w = if k == 0 { 1.0 } else { -1.0 };
            let (rx, ry) = ring_centroid_moments(ring);
            total += w * a.abs();
            cx += w * a.signum() * rx;
            cy += w * a.signum() * ry;
        }
        (cx / total, cy / total)
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.exterior.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
        )
    }

    /// Even-odd point test with half-open crossings.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > y) != (b[1] > y) {
                let xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x < xi {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from a point to the nearest polygon edge.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance([x, y], a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> PolyShape {
        let mv = |r: &Vec<[f64; 2]>| r.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
        PolyShape {
            exterior: mv(&self.exterior),
            holes: self.holes.iter().map(mv).collect(),
        }
    }

    fn rasterize(&self, frame: &PlotFrame) -> Region {
        let mut region = Region::empty(frame);
        let (_, y0, _, y1) = self.bbox();
        let mut xs = Vec::new();
        for j in frame.row_span(y0 - frame.resolution(), y1 + frame.resolution()) {
            let cy = frame.row_center(j);
            xs.clear();
            for (a, b) in self.edges() {
                if (a[1] > cy) != (b[1] > cy) {
                    xs.push(a[0] + (cy - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let cols = exact_columns(frame, pair[0], pair[1]);
                region.set_run(j, cols.start, cols.end);
            }
        }
        region
    }

    fn self_intersects(&self) -> bool {
        let edges: Vec<_> = self
            .rings()
            .enumerate()
            .flat_map(|(r, ring)| {
                (0..ring.len())
                    .map(move |k| (r, k, ring.len(), ring[k], ring[(k + 1) % ring.len()]))
            })
            .collect();
        for (x, &(ra, ka, na, a0, a1)) in edges.iter().enumerate() {
            for &(rb, kb, nb, b0, b1) in &edges[x + 1..] {
                let adjacent = ra == rb && (kb == (ka + 1) % na || ka == (kb + 1) % nb);
                if adjacent {
                    // consecutive edges may only share their vertex; a collinear
                    // fold-back is a spike
                    let (d1, d2) = if kb == (ka + 1) % na {
                        (sub(a1, a0), sub(b1, b0))
                    } else {
                        (sub(b1, b0), sub(a1, a0))
                    };
                    if cross(d1, d2) == 0.0 && dot(d1, d2) < 0.0 {
                        return true;
                    }
                    continue;
                }
                if segments_intersect(a0, a1, b0, b1) {
                    return true;
                }
            }
        }
        false
    }
}

fn open_ring(mut ring: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|k| {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// First moments `(∫x, ∫y)` of a ring, signed by its winding.
fn ring_centroid_moments(ring: &[[f64; 2]]) -> (f64, f64) {
    let n = ring.len();
    let (mut mx, mut my) = (0.0, 0.0);
    for k in 0..n {
        let (a, b) = (ring[k], ring[(k + 1) % n]);
        let c = a[0] * b[1] - b[0] * a[1];
        mx += (a[0] + b[0]) * c;
        my += (a[1] + b[1]) * c;
    }
    (mx / 6.0, my / 6.0)
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, touching included.
fn segments_intersect(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b0, b1, a0))
        || (d2 == 0.0 && on_segment(b0, b1, a1))
        || (d3 == 0.0 && on_segment(a0, a1, b0))
        || (d4 == 0.0 && on_segment(a0, a1, b1))
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d = sub(p, q);
    d[0].hypot(d[1])
}

/// Columns whose computed center `c` satisfies `lo <= c < hi` exactly.
fn exact_columns(frame: &PlotFrame, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let w = frame.width();
    let guess = |x: f64| {
        (((x - frame.x_min()) / frame.resolution() - 0.5)
            .ceil()
            .max(0.0) as usize)
            .min(w)
    };
    let settle = |x: f64| {
        let mut i = guess(x);
        while i < w && frame.column_center(i) < x {
            i += 1;
        }
        while i > 0 && frame.column_center(i - 1) >= x {
            i -= 1;
        }
        i
    };
    let (a, b) = (settle(lo), settle(hi));
    if b > a {
        a..b
    } else {
        0..0
    }
}

/// A desired target or delineation footprint.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect(RectShape),
    Poly(PolyShape),
}

impl Shape {
    /// Cells whose centers fall inside the shape; cells outside the frame are dropped.
    pub fn rasterize(&self, frame: &PlotFrame) -> Region {
        match self {
            Shape::Rect(r) => r.rasterize_grown(0.0, frame),
            Shape::Poly(p) => p.rasterize(frame),
        }
    }

    /// Inward erosion by `alpha` meters: cells whose center lies at least
    /// `alpha` inside the shape boundary.
    pub fn eroded(&self, alpha: f64, frame: &PlotFrame) -> Region {
        match self {
            Shape::Rect(r) => {
                if 2.0 * alpha >= r.l.min(r.h) {
                    Region::empty(frame)
                } else {
                    r.rasterize_grown(-alpha, frame)
                }
            }
            Shape::Poly(p) => {
                let inside = p.rasterize(frame);
                let min_d = alpha - SNAP * frame.resolution();
                let cells: Vec<_> = inside
                    .cells()
                    .filter(|&(i, j)| {
                        let (x, y) = frame.cell_center(i, j);
                        p.boundary_distance(x, y) >= min_d
                    })
                    .collect();
                Region::from_cells(frame, cells)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Rect(r) => r.area(),
            Shape::Poly(p) => p.area(),
        }
    }

    pub fn centroid(&self) -> (f64, f64) {
        match self {
            Shape::Rect(r) => (r.x_c, r.y_c),
            Shape::Poly(p) => p.centroid(),
        }
    }

    /// `(x0, y0, x1, y1)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Rect(r) => r.bounds(),
            Shape::Poly(p) => p.bbox(),
        }
    }

    /// Shortest side of the bounding box; erosion by half of it empties a box.
    pub fn min_extent(&self) -> f64 {
        let (x0, y0, x1, y1) = self.bbox();
        (x1 - x0).min(y1 - y0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Shape {
        match self {
            Shape::Rect(r) => Shape::Rect(RectShape {
                x_c: r.x_c + dx,
                y_c: r.y_c + dy,
                ..*r
            }),
            Shape::Poly(p) => Shape::Poly(p.translated(dx, dy)),
        }
    }

    /// Exterior ring (open) of the shape.
    pub fn exterior(&self) -> Vec<[f64; 2]> {
        match self {
            Shape::Rect(r) => r.corners().to_vec(),
            Shape::Poly(p) => p.exterior().to_vec(),
        }
    }
}

impl From<RectShape> for Shape {
    fn from(r: RectShape) -> Self {
        Shape::Rect(r)
    }
}

impl From<PolyShape> for Shape {
    fn from(p: PolyShape) -> Self {
        Shape::Poly(p)
    }
}
