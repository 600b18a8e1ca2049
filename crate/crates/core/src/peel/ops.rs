use serde::{Deserialize, Serialize};

use super::{PeelError, PeelImage, RingTrace};

/// Points clicked along the furrow, `(row, col)` in peel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurrowLine {
    pub points: Vec<[f64; 2]>,
}

impl FurrowLine {
    pub fn validate(&self) -> Result<(), PeelError> {
        if self.points.len() < 2 {
            return Err(PeelError::Furrow(format!("need at least 2 points, got {}", self.points.len())));
        }
        if self.points.windows(2).any(|w| w[1][0] < w[0][0]) {
            return Err(PeelError::Furrow("rows must be non-decreasing".into()));
        }
        if self.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(PeelError::Furrow("non-finite point".into()));
        }
        Ok(())
    }

    /// Furrow column at `row`: linear between clicks, constant beyond the
    /// first and last clicked rows.
    pub fn column_at(&self, row: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if row <= first[0] {
            return first[1];
        }
        if row >= last[0] {
            return last[1];
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if row >= a[0] && row <= b[0] {
                if b[0] == a[0] {
                    return a[1];
                }
                let f = (row - a[0]) / (b[0] - a[0]);
                return a[1] + f * (b[1] - a[1]);
            }
        }
        last[1]
    }
}

/// Fills invalid pixels inside each row's ring with the harmonic
/// interpolation of the surrounding valid pixels: every hole pixel converges
/// to the mean of its in-domain 4-neighbours. Padding past a row's ring and
/// the `valid` channel are left alone.
pub fn fill_holes(peel: &PeelImage) -> PeelImage {
    let mut out = peel.clone();
    let (w, h) = (peel.width, peel.height);
    let holes: Vec<(usize, usize)> =
        (0..h).flat_map(|r| (0..peel.row_len[r]).map(move |c| (r, c))).filter(|&(r, c)| !*peel.valid.get(r, c)).collect();
    if holes.is_empty() {
        return out;
    }

    // seed holes breadth-first from the valid border inwards
    let mut known = peel.valid.clone();
    let mut frontier = holes.clone();
    loop {
        let mut next = Vec::new();
        let mut newly = Vec::new();
        for &(r, c) in &frontier {
            let vals: Vec<f64> = neighbours(peel, r, c, w, h).filter(|&(rr, cc)| *known.get(rr, cc)).map(|(rr, cc)| *out.intensity.get(rr, cc)).collect();
            if vals.is_empty() {
                next.push((r, c));
            } else {
                newly.push((r, c, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        if newly.is_empty() {
            break;
        }
        for (r, c, v) in newly {
            out.intensity.set(r, c, v);
            known.set(r, c, true);
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }

    // Gauss-Seidel sweeps to the fixed point
    let reachable: Vec<(usize, usize)> = holes.into_iter().filter(|&(r, c)| *known.get(r, c)).collect();
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for &(r, c) in &reachable {
            let (sum, n) = neighbours(peel, r, c, w, h)
                .filter(|&(rr, cc)| *known.get(rr, cc))
                .fold((0.0, 0usize), |(s, n), (rr, cc)| (s + *out.intensity.get(rr, cc), n + 1));
            let v = sum / n as f64;
            change = change.max((v - *out.intensity.get(r, c)).abs());
            out.intensity.set(r, c, v);
        }
        if change < 1e-10 {
            break;
        }
    }
    out
}

fn neighbours(peel: &PeelImage, r: usize, c: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let cand = [
        (r.wrapping_sub(1), c),
        (r + 1, c),
        (r, c.wrapping_sub(1)),
        (r, c + 1),
    ];
    cand.into_iter().filter(move |&(rr, cc)| rr < h && cc < w && peel.in_domain(rr, cc))
}

/// Length along a traced ring from point `i0` to point `i1`, in µm.
pub fn measure_length(trace: &RingTrace, i0: usize, i1: usize, lateral_spacing: f64) -> Result<f64, PeelError> {
    if i0 > i1 || i1 >= trace.len() {
        return Err(PeelError::Index(format!("need 0 <= i0 <= i1 < {}, got {i0}..{i1}", trace.len())));
    }
    Ok(trace.step_len[i0 + 1..=i1].iter().sum::<f64>() * lateral_spacing)
}

/// Cyclically shifts every row within its ring length so the furrow lands
/// at the row's centre column. All three channels move together.
pub fn rectify(peel: &PeelImage, furrow: &FurrowLine) -> Result<PeelImage, PeelError> {
    furrow.validate()?;
    let mut out = peel.clone();
    for row in 0..peel.height {
        let len = peel.row_len[row];
        if len == 0 {
            continue;
        }
        let c = furrow.column_at(row as f64);
        if c < 0.0 || c >= len as f64 {
            return Err(PeelError::Furrow(format!("row {row}: furrow column {c} outside [0, {len})")));
        }
        let shift = (len as f64 / 2.0 - c).round() as i64;
        let shift = shift.rem_euclid(len as i64) as usize;
        for col in 0..len {
            let dst = (col + shift) % len;
            out.intensity.set(row, dst, *peel.intensity.get(row, col));
            out.metric.set(row, dst, *peel.metric.get(row, col));
            out.valid.set(row, dst, *peel.valid.get(row, col));
        }
    }
    Ok(out)
}
