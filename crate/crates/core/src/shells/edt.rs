//! Exact squared Euclidean distance transform by separable lower envelopes
//! of parabolas, one 1D pass per axis.

/// Which volume faces count as background when measuring distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdmBorder {
    /// Per axis: voxels just beyond the two faces perpendicular to the axis
    /// are background.
    pub outside_is_background: [bool; 3],
}

impl Default for EdmBorder {
    fn default() -> Self {
        Self { outside_is_background: [true; 3] }
    }
}

impl EdmBorder {
    /// Every face borders background.
    pub fn closed() -> Self {
        Self::default()
    }

    /// The two y faces are crop boundaries, not tissue surfaces: distances
    /// are measured only to true background and to the x/z faces.
    pub fn open_along_y() -> Self {
        Self { outside_is_background: [true, false, true] }
    }

    /// No face counts; distances go to in-volume features only.
    pub fn none() -> Self {
        Self { outside_is_background: [false; 3] }
    }
}

/// Squared distance from every grid point to the nearest feature point.
/// Grid points with no reachable feature get `f64::INFINITY`.
pub fn squared_distance_to_features(dims: [usize; 3], is_feature: &[bool], border: EdmBorder) -> Vec<f64> {
    let n: usize = dims.iter().product();
    assert_eq!(is_feature.len(), n);
    let mut d: Vec<f64> = is_feature.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();

    let longest = dims.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Envelope::with_capacity(longest + 2);

    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[a2] {
            for i in 0..dims[a1] {
                let base = i * strides[a1] + j * strides[a2];
                for k in 0..len {
                    line[k] = d[base + k * stride];
                }
                scratch.transform(&line[..len], &mut out[..len], border.outside_is_background[axis]);
                for k in 0..len {
                    d[base + k * stride] = out[k];
                }
            }
        }
    }
    d
}

/// Reusable buffers for the 1D pass.
struct Envelope {
    sites: Vec<(f64, f64)>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(cap: usize) -> Self {
        Self { sites: Vec::with_capacity(cap), v: Vec::with_capacity(cap), z: Vec::with_capacity(cap + 1) }
    }

    /// `out[q] = min_p (q - p)^2 + f[p]`, optionally with zero-valued sites
    /// at positions -1 and len.
    fn transform(&mut self, f: &[f64], out: &mut [f64], virtual_ends: bool) {
        let len = f.len();
        self.sites.clear();
        if virtual_ends {
            self.sites.push((-1.0, 0.0));
        }
        self.sites.extend(f.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(p, &v)| (p as f64, v)));
        if virtual_ends {
            self.sites.push((len as f64, 0.0));
        }
        if self.sites.is_empty() {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }

        self.v.clear();
        self.z.clear();
        self.v.push(0);
        self.z.push(f64::NEG_INFINITY);
        self.z.push(f64::INFINITY);
        let sites = &self.sites;
        let intersect = |a: (f64, f64), b: (f64, f64)| ((b.1 + b.0 * b.0) - (a.1 + a.0 * a.0)) / (2.0 * (b.0 - a.0));
        for s in 1..sites.len() {
            let mut k = self.v.len() - 1;
            let mut x = intersect(sites[self.v[k]], sites[s]);
            while x <= self.z[k] {
                self.v.pop();
                self.z.pop();
                k -= 1;
                x = intersect(sites[self.v[k]], sites[s]);
            }
            self.v.push(s);
            self.z[k + 1] = x;
            self.z.push(f64::INFINITY);
        }

        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while self.z[k + 1] < qf {
                k += 1;
            }
            let (p, fp) = sites[self.v[k]];
            *o = (qf - p) * (qf - p) + fp;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_line() {
        // feature at index 2 only, no border sites
        let mut feat = vec![false; 6];
        feat[2] = true;
        let d = squared_distance_to_features([6, 1, 1], &feat, EdmBorder::none());
        assert_eq!(d, vec![4.0, 1.0, 0.0, 1.0, 4.0, 9.0]);
    }

    #[test]
    fn border_sites_along_selected_axes() {
        let feat = vec![false; 5];
        let x_only = EdmBorder { outside_is_background: [true, false, false] };
        let d = squared_distance_to_features([5, 1, 1], &feat, x_only);
        assert_eq!(d, vec![1.0, 4.0, 9.0, 4.0, 1.0]);
        // a one-voxel slab is one step from the outside everywhere
        let d = squared_distance_to_features([5, 1, 1], &feat, EdmBorder::closed());
        assert!(d.iter().all(|&v| v == 1.0));
        let d = squared_distance_to_features([5, 1, 1], &feat, EdmBorder::none());
        assert!(d.iter().all(|v| v.is_infinite()));
    }
}
