//! Independent brute-force oracles and proptest strategies shared by the
//! integration tests. Nothing here calls into the rasterizer or the distance
//! transform under test.
#![allow(dead_code)]

use proptest::prelude::*;
use randcrowns::{PlotFrame, PolyShape, RectShape, Region, Shape};

pub fn centers(frame: &PlotFrame) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
    let res = frame.resolution();
    (0..frame.height()).flat_map(move |j| {
        (0..frame.width()).map(move |i| {
            (
                i,
                j,
                frame.x_min() + (i as f64 + 0.5) * res,
                frame.y_min() + (j as f64 + 0.5) * res,
            )
        })
    })
}

/// Even-odd point-in-ring test over every ring of a polygon.
pub fn point_in_rings(rings: &[Vec<[f64; 2]>], x: f64, y: f64) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        for k in 0..n {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            if (a[1] > y) != (b[1] > y) {
                let xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x < xi {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

pub fn oracle_cells(frame: &PlotFrame, member: impl Fn(f64, f64) -> bool) -> Vec<(usize, usize)> {
    centers(frame)
        .filter(|&(_, _, x, y)| member(x, y))
        .map(|(i, j, _, _)| (i, j))
        .collect()
}

pub fn oracle_rect(frame: &PlotFrame, r: &RectShape) -> Vec<(usize, usize)> {
    let (x0, y0, x1, y1) = r.bounds();
    oracle_cells(frame, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
}

pub fn oracle_poly(frame: &PlotFrame, p: &PolyShape) -> Vec<(usize, usize)> {
    let mut rings = vec![p.exterior().to_vec()];
    rings.extend(p.holes().iter().cloned());
    oracle_cells(frame, |x, y| point_in_rings(&rings, x, y))
}

pub fn cells_of(r: &Region) -> Vec<(usize, usize)> {
    let f = r.frame();
    (0..f.height())
        .flat_map(|j| (0..f.width()).map(move |i| (i, j)))
        .filter(|&(i, j)| r.contains(i, j))
        .collect()
}

/// Cells whose center lies within `dist` meters of some member center,
/// by enumerating every (cell, member) pair.
pub fn oracle_buffer(r: &Region, dist: f64) -> Vec<(usize, usize)> {
    let f = r.frame();
    let res = f.resolution();
    let members = cells_of(r);
    let lim = dist / res + 1e-9;
    let lim2 = lim * lim;
    (0..f.height())
        .flat_map(|j| (0..f.width()).map(move |i| (i, j)))
        .filter(|&(i, j)| {
            members.iter().any(|&(mi, mj)| {
                let dx = i as f64 - mi as f64;
                let dy = j as f64 - mj as f64;
                dx * dx + dy * dy <= lim2
            })
        })
        .collect()
}

/// Boundary length of a pixel set in meters, frame edges included.
pub fn perimeter(r: &Region) -> f64 {
    let f = r.frame();
    let (w, h) = (f.width() as i64, f.height() as i64);
    let has =
        |i: i64, j: i64| i >= 0 && j >= 0 && i < w && j < h && r.contains(i as usize, j as usize);
    let mut edges = 0u64;
    for (i, j) in cells_of(r) {
        let (i, j) = (i as i64, j as i64);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if !has(i + di, j + dj) {
                edges += 1;
            }
        }
    }
    edges as f64 * f.resolution()
}

pub fn frame_strategy(max_cells: usize) -> impl Strategy<Value = PlotFrame> {
    (
        1..=max_cells,
        1..=max_cells,
        prop::sample::select(vec![0.1, 0.25, 0.3, 0.5, 1.0, 2.0]),
        -50.0..50.0f64,
        -50.0..50.0f64,
    )
        .prop_map(|(w, h, res, x0, y0)| {
            PlotFrame::new(x0, y0, x0 + w as f64 * res, y0 + h as f64 * res, res).unwrap()
        })
}

/// A box somewhere around the frame, possibly hanging over its edges.
pub fn rect_in(frame: PlotFrame) -> impl Strategy<Value = RectShape> {
    let (w, h) = (frame.x_max() - frame.x_min(), frame.y_max() - frame.y_min());
    (-0.2..1.2f64, -0.2..1.2f64, 0.01..0.8f64, 0.01..0.8f64).prop_map(move |(u, v, sl, sh)| {
        RectShape::new(frame.x_min() + u * w, frame.y_min() + v * h, sl * w, sh * h).unwrap()
    })
}

/// A star-shaped polygon (vertices at increasing angles), which is always simple.
pub fn star_in(frame: PlotFrame) -> impl Strategy<Value = PolyShape> {
    let (w, h) = (frame.x_max() - frame.x_min(), frame.y_max() - frame.y_min());
    (
        0.0..1.0f64,
        0.0..1.0f64,
        prop::collection::vec(0.1..0.5f64, 3..10),
        0.0..1.0f64,
    )
        .prop_map(move |(u, v, radii, phase)| {
            let (cx, cy) = (frame.x_min() + u * w, frame.y_min() + v * h);
            let n = radii.len();
            let ring = radii
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let t = (k as f64 + phase * 0.9) / n as f64 * std::f64::consts::TAU;
                    [cx + r * w * t.cos(), cy + r * h * t.sin()]
                })
                .collect();
            PolyShape::new(ring, vec![]).unwrap()
        })
}

pub fn shape_in(frame: PlotFrame) -> impl Strategy<Value = Shape> {
    prop_oneof![
        rect_in(frame).prop_map(Shape::Rect),
        star_in(frame).prop_map(Shape::Poly)
    ]
}

pub fn region_strategy(frame: PlotFrame, density: f64) -> impl Strategy<Value = Region> {
    prop::collection::vec(prop::bool::weighted(density), frame.cell_count()).prop_map(move |bits| {
        let w = frame.width();
        Region::from_predicate(&frame, |i, j| bits[j * w + i])
    })
}
