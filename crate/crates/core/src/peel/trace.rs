//! Clockwise tracing of one-pixel shell rings in an xz cross-section.

use std::f64::consts::SQRT_2;

use super::PeelError;
use crate::grid::Image2;

/// The eight moves as `(dx, dz)`, consecutive entries 45° apart.
const DIRS: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Search budget for the backtracking tracer, in moves per ring pixel.
const MOVES_PER_PIXEL: usize = 64;

/// One revolution around a shell cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct RingTrace {
    pub slice_index: usize,
    /// `(x, z)` positions in traversal order, starting at the start pixel.
    pub points: Vec<[usize; 2]>,
    /// Length of the step arriving at each point: 1 for axis-aligned moves,
    /// √2 for diagonal ones, 0 for the first point.
    pub step_len: Vec<f64>,
    /// Length of the closing step from the last point back to the first.
    pub closing_len: f64,
}

impl RingTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the closed ring in pixels.
    pub fn perimeter(&self) -> f64 {
        self.step_len.iter().sum::<f64>() + self.closing_len
    }

    /// Shoelace area over `(x, z)`; the trace convention keeps it `<= 0`.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }
}

fn signed_area(points: &[[usize; 2]]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        a += p[0] as f64 * q[1] as f64 - q[0] as f64 * p[1] as f64;
    }
    0.5 * a
}

fn step(a: [usize; 2], b: [usize; 2]) -> f64 {
    if a[0] != b[0] && a[1] != b[1] {
        SQRT_2
    } else {
        1.0
    }
}

/// Candidate directions after moving along `prev`: axis-aligned moves
/// before diagonal ones, and within each group the counterclockwise
/// rotation of `prev` before the clockwise one, nearest rotation first.
fn preference(prev: usize) -> [usize; 8] {
    let mut order = [0usize; 8];
    let mut n = 0;
    let rotations = [0i32, -1, 1, -2, 2, -3, 3, 4];
    for diagonal in [false, true] {
        for r in rotations {
            let d = (prev as i32 + r).rem_euclid(8) as usize;
            if (d % 2 == 1) == diagonal {
                order[n] = d;
                n += 1;
            }
        }
    }
    order
}

struct Ring<'a> {
    img: &'a Image2<bool>,
    /// Position in `pixels` per image pixel, or usize::MAX.
    slot: Vec<usize>,
    pixels: Vec<[usize; 2]>,
}

impl<'a> Ring<'a> {
    fn new(img: &'a Image2<bool>) -> Self {
        let mut slot = vec![usize::MAX; img.len()];
        let mut pixels = Vec::new();
        for z in 0..img.height {
            for x in 0..img.width {
                if *img.get(z, x) {
                    slot[img.index(z, x)] = pixels.len();
                    pixels.push([x, z]);
                }
            }
        }
        Self { img, slot, pixels }
    }

    fn at(&self, p: [usize; 2], d: usize) -> Option<usize> {
        let (dx, dz) = DIRS[d];
        let x = p[0] as i64 + dx as i64;
        let z = p[1] as i64 + dz as i64;
        if x < 0 || z < 0 || x >= self.img.width as i64 || z >= self.img.height as i64 {
            return None;
        }
        let s = self.slot[self.img.index(z as usize, x as usize)];
        (s != usize::MAX).then_some(s)
    }

    fn neighbors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.pixels[s];
        (0..8).filter_map(move |d| self.at(p, d))
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        let (p, q) = (self.pixels[a], self.pixels[b]);
        a != b && p[0].abs_diff(q[0]) <= 1 && p[1].abs_diff(q[1]) <= 1
    }
}

/// Greedy walk without backtracking; returns how many ring pixels it missed
/// when it got stuck or closed early.
fn greedy_orphans(ring: &Ring, start: usize) -> usize {
    let mut visited = vec![false; ring.pixels.len()];
    visited[start] = true;
    let (mut cur, mut prev_dir, mut count) = (start, 4usize, 1usize);
    'walk: loop {
        for d in preference(prev_dir) {
            if let Some(n) = ring.at(ring.pixels[cur], d) {
                if !visited[n] {
                    visited[n] = true;
                    cur = n;
                    prev_dir = d;
                    count += 1;
                    continue 'walk;
                }
            }
        }
        break;
    }
    ring.pixels.len() - count
}

/// Visits every pixel of a one-pixel ring exactly once, starting at `start`
/// (an `(x, z)` ring pixel), and returns to a neighbour of the start.
///
/// Moves follow a Moore-style preference (see [`preference`]); when the
/// preferred move strands ring pixels the walk backs up and tries the next
/// candidate. The finished trace is reversed if needed so its shoelace area
/// over `(x, z)` is non-positive.
pub fn trace_slice_ring(shell_slice: &Image2<bool>, slice_index: usize, start: [usize; 2]) -> Result<RingTrace, PeelError> {
    let ring = Ring::new(shell_slice);
    let n = ring.pixels.len();
    if start[0] >= shell_slice.width || start[1] >= shell_slice.height || !*shell_slice.get(start[1], start[0]) {
        return Err(PeelError::StartNotOnRing { slice: slice_index, x: start[0], z: start[1] });
    }
    if n < 3 {
        return Err(PeelError::BrokenRing { slice: slice_index, visited: n, total: n });
    }
    let s0 = ring.slot[shell_slice.index(start[1], start[0])];

    let mut visited = vec![false; n];
    // unvisited-neighbour count per pixel, kept in sync with `visited`
    let mut free: Vec<u8> = (0..n).map(|s| ring.neighbors(s).count() as u8).collect();
    let mark = |s: usize, on: bool, visited: &mut Vec<bool>, free: &mut Vec<u8>| {
        visited[s] = on;
        for q in ring.neighbors(s) {
            if on {
                free[q] -= 1;
            } else {
                free[q] += 1;
            }
        }
    };
    mark(s0, true, &mut visited, &mut free);

    // each frame: pixel, the direction it was entered with, next candidate
    let mut path: Vec<(usize, usize, usize)> = vec![(s0, 4, 0)];
    let budget = n.saturating_mul(MOVES_PER_PIXEL).max(10_000);
    let mut moves = 0usize;
    let mut max_depth = 1usize;

    // Moving the head from `old` to `head` can only strand unvisited
    // neighbours of `old`: each still needs two path neighbours among the
    // unvisited pixels, the new head and (for the closing step) the start.
    let feasible = |old: usize, head: usize, visited: &[bool], free: &[u8], depth: usize| -> bool {
        if depth == n {
            return ring.adjacent(head, s0);
        }
        for u in ring.neighbors(old) {
            if visited[u] {
                continue;
            }
            let avail = free[u] as usize + usize::from(ring.adjacent(u, head)) + usize::from(ring.adjacent(u, s0));
            if avail < 2 {
                return false;
            }
        }
        free[s0] as usize + usize::from(ring.adjacent(head, s0)) >= 1
    };

    loop {
        let depth = path.len();
        let (head, entered, next) = *path.last().unwrap();
        if depth == n && ring.adjacent(head, s0) {
            break;
        }
        let order = preference(entered);
        let mut advanced = false;
        for (k, &d) in order.iter().enumerate().skip(next) {
            let Some(q) = ring.at(ring.pixels[head], d) else { continue };
            if visited[q] {
                continue;
            }
            path.last_mut().unwrap().2 = k + 1;
            mark(q, true, &mut visited, &mut free);
            if feasible(head, q, &visited, &free, depth + 1) {
                path.push((q, d, 0));
                max_depth = max_depth.max(path.len());
                advanced = true;
                break;
            }
            mark(q, false, &mut visited, &mut free);
        }
        if advanced {
            moves += 1;
            if moves > budget {
                return Err(fail(&ring, s0, slice_index, max_depth));
            }
            continue;
        }
        // exhausted this pixel's candidates
        if path.len() == 1 {
            return Err(fail(&ring, s0, slice_index, max_depth));
        }
        let (dead, _, _) = path.pop().unwrap();
        mark(dead, false, &mut visited, &mut free);
    }

    let mut points: Vec<[usize; 2]> = path.iter().map(|&(s, _, _)| ring.pixels[s]).collect();
    if signed_area(&points) > 0.0 {
        points[1..].reverse();
    }
    let mut step_len = Vec::with_capacity(n);
    step_len.push(0.0);
    step_len.extend(points.windows(2).map(|w| step(w[0], w[1])));
    let closing_len = step(points[n - 1], points[0]);
    Ok(RingTrace { slice_index, points, step_len, closing_len })
}

fn fail(ring: &Ring, s0: usize, slice: usize, max_depth: usize) -> PeelError {
    let orphans = greedy_orphans(ring, s0);
    if orphans > 0 {
        PeelError::Orphans { slice, orphans, total: ring.pixels.len() }
    } else {
        PeelError::BrokenRing { slice, visited: max_depth, total: ring.pixels.len() }
    }
}
