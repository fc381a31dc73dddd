//! Interface curves and their panel discretization.

mod boundary;
mod curve;

pub use boundary::{
    adaptive_chunk, adaptive_chunk_with, balance_chunks, extend_with_buffers, panel_tail,
    suggest_window, uniform_panels, Boundary, BufferSpec, ChunkOptions, Panel, MAX_SPLIT_DEPTH,
    NODES_PER_PANEL,
};
pub use curve::{build_curve, Curve, CurveFamily, CurvePoint, Point};

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}
