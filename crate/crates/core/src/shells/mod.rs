//! Distance maps of masks and apical/basal shell extraction.

mod components;
mod edt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Volume;
use crate::volume_io::MaskVolume;

pub use components::{component_sizes, connected_components, connected_components_2d, Connectivity2, Connectivity3};
pub use edt::{squared_distance_to_features, EdmBorder};

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("mask has no foreground voxels")]
    EmptyMask,
    #[error("distance band holds {0} component(s), need at least 2")]
    TooFewComponents(usize),
    #[error("invalid shell parameters: {0}")]
    Params(String),
}

/// Distance in voxels to the nearest background voxel; 0 on background.
pub type DistanceVolume = Volume<f64>;

/// Distance band around the target depth `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellParams {
    pub t: f64,
    pub tol: f64,
    #[serde(skip, default)]
    pub connectivity: Connectivity3,
}

impl Default for ShellParams {
    fn default() -> Self {
        Self { t: 5.0, tol: 0.5, connectivity: Connectivity3::TwentySix }
    }
}

impl ShellParams {
    pub fn new(t: f64, tol: f64) -> Result<Self, ShellError> {
        let p = Self { t, tol, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ShellError> {
        if !(self.tol >= 0.0) || !(self.t > self.tol) {
            return Err(ShellError::Params(format!("need t > tol >= 0, got t = {}, tol = {}", self.t, self.tol)));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, d: f64) -> bool {
        d >= self.t - self.tol && d <= self.t + self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellPair {
    pub apical: MaskVolume,
    pub basal: MaskVolume,
}

/// What [`extract_shells`] saw in the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDiagnostics {
    pub component_count: usize,
    /// Component sizes, largest first.
    pub sizes: Vec<usize>,
    pub apical_voxels: usize,
    pub basal_voxels: usize,
    /// Voxels in components beyond the two kept ones.
    pub discarded_voxels: usize,
}

/// Exact Euclidean distance map with every volume face bordering
/// background.
pub fn euclidean_distance_map(mask: &MaskVolume) -> Result<DistanceVolume, ShellError> {
    euclidean_distance_map_with(mask, EdmBorder::closed())
}

/// Exact Euclidean distance map with a chosen treatment of the volume faces.
/// Foreground voxels with no reachable background get `f64::INFINITY`.
pub fn euclidean_distance_map_with(mask: &MaskVolume, border: EdmBorder) -> Result<DistanceVolume, ShellError> {
    if !mask.data.iter().any(|&b| b) {
        return Err(ShellError::EmptyMask);
    }
    let background: Vec<bool> = mask.data.iter().map(|&b| !b).collect();
    let sq = squared_distance_to_features(mask.meta.dims, &background, border);
    Ok(Volume { meta: mask.meta.clone(), data: sq.into_iter().map(f64::sqrt).collect() })
}

/// Cuts the band `t ± tol` out of a distance map and keeps its two largest
/// components: the largest is the apical shell, the second the basal one.
/// Equal sizes are ordered by the smaller first voxel index.
pub fn extract_shells(edm: &DistanceVolume, p: &ShellParams) -> Result<(ShellPair, ShellDiagnostics), ShellError> {
    p.validate()?;
    let band = edm.map(|&d| d > 0.0 && p.contains(d));
    let (labels, count) = connected_components(&band, p.connectivity);
    let sizes = component_sizes(&labels.data, count);

    // scan-order labels: a smaller label means a smaller first voxel index
    let mut order: Vec<u32> = (1..=count).collect();
    order.sort_by(|&a, &b| sizes[b as usize].cmp(&sizes[a as usize]).then(a.cmp(&b)));
    if order.len() < 2 {
        return Err(ShellError::TooFewComponents(order.len()));
    }
    let (apical_label, basal_label) = (order[0], order[1]);
    let apical = labels.map(|&l| l == apical_label);
    let basal = labels.map(|&l| l == basal_label);

    let sorted_sizes: Vec<usize> = order.iter().map(|&l| sizes[l as usize]).collect();
    let diag = ShellDiagnostics {
        component_count: order.len(),
        apical_voxels: sorted_sizes[0],
        basal_voxels: sorted_sizes[1],
        discarded_voxels: sorted_sizes[2..].iter().sum(),
        sizes: sorted_sizes,
    };
    if diag.component_count > 2 {
        log::info!("shell band: discarding {} extra component(s), {} voxels", diag.component_count - 2, diag.discarded_voxels);
    }
    Ok((ShellPair { apical, basal }, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::VolumeMeta;
    use proptest::prelude::*;

    /// Minimum distance to any background voxel, volume exterior included.
    fn brute_force_edm(mask: &MaskVolume) -> Vec<f64> {
        let [nx, ny, nz] = mask.meta.dims;
        let bg: Vec<[i64; 3]> = (0..mask.data.len())
            .filter(|&i| !mask.data[i])
            .map(|i| {
                let c = mask.coords(i);
                [c[0] as i64, c[1] as i64, c[2] as i64]
            })
            .collect();
        (0..mask.data.len())
            .map(|i| {
                if !mask.data[i] {
                    return 0.0;
                }
                let c = mask.coords(i);
                let c = [c[0] as i64, c[1] as i64, c[2] as i64];
                let dims = [nx as i64, ny as i64, nz as i64];
                // nearest exterior voxel is straight across the closest face
                let mut best = (0..3).map(|a| (c[a] + 1).min(dims[a] - c[a])).min().unwrap().pow(2);
                for b in &bg {
                    let d = (0..3).map(|a| (c[a] - b[a]).pow(2)).sum::<i64>();
                    best = best.min(d);
                }
                (best as f64).sqrt()
            })
            .collect()
    }

    fn mask_from(dims: [usize; 3], data: Vec<bool>) -> MaskVolume {
        Volume::from_vec(VolumeMeta::unit(dims), data).unwrap()
    }

    #[test]
    fn single_voxel_is_one_from_background() {
        let mut m = Volume::filled(VolumeMeta::unit([5, 5, 5]), false);
        m.set(2, 2, 2, true);
        let edm = euclidean_distance_map(&m).unwrap();
        assert_eq!(*edm.get(2, 2, 2), 1.0);
        assert_eq!(edm.data.iter().filter(|&&d| d > 0.0).count(), 1);
    }

    #[test]
    fn solid_cube_centre_is_three() {
        let m = mask_from([5, 5, 5], vec![true; 125]);
        let edm = euclidean_distance_map(&m).unwrap();
        assert_eq!(*edm.get(2, 2, 2), 3.0);
        assert_eq!(edm.data, brute_force_edm(&m));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = mask_from([3, 3, 3], vec![false; 27]);
        assert!(matches!(euclidean_distance_map(&m), Err(ShellError::EmptyMask)));
    }

    #[test]
    fn open_y_faces_ignore_crop_ends() {
        // a bar along y: with open y faces the distance is purely lateral
        let m = mask_from([3, 9, 3], vec![true; 81]);
        let edm = euclidean_distance_map_with(&m, EdmBorder::open_along_y()).unwrap();
        for y in 0..9 {
            assert_eq!(*edm.get(1, y, 1), 2.0);
        }
    }

    #[test]
    fn too_few_components() {
        // a solid rod has a single band component
        let (nx, ny, nz) = (31, 4, 31);
        let mut m = Volume::filled(VolumeMeta::unit([nx, ny, nz]), false);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let (dx, dz) = (x as f64 - 15.0, z as f64 - 15.0);
                    if dx * dx + dz * dz <= 144.0 {
                        m.set(x, y, z, true);
                    }
                }
            }
        }
        let edm = euclidean_distance_map_with(&m, EdmBorder::open_along_y()).unwrap();
        let err = extract_shells(&edm, &ShellParams::default()).unwrap_err();
        assert!(matches!(err, ShellError::TooFewComponents(1)), "{err}");
    }

    #[test]
    fn equal_sized_components_ordered_by_first_voxel() {
        // two identical band blobs: values 5 at two separate spots
        let mut edm = Volume::filled(VolumeMeta::unit([7, 1, 1]), 1.0);
        edm.data[1] = 5.0;
        edm.data[5] = 5.0;
        let (pair, diag) = extract_shells(&edm, &ShellParams::default()).unwrap();
        assert_eq!(diag.sizes, vec![1, 1]);
        assert!(pair.apical.data[1] && pair.basal.data[5]);
    }

    #[test]
    fn params_validation() {
        assert!(ShellParams::new(0.5, 0.5).is_err());
        assert!(ShellParams::new(5.0, -0.1).is_err());
        assert!(ShellParams::new(5.0, 0.0).is_ok());
    }

    fn arb_mask() -> impl Strategy<Value = MaskVolume> {
        (1usize..9, 1usize..9, 1usize..9, any::<u64>()).prop_map(|(nx, ny, nz, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = nx * ny * nz;
            let mut data: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
            data[0] = true;
            mask_from([nx, ny, nz], data)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn edm_matches_brute_force(m in arb_mask()) {
            let edm = euclidean_distance_map(&m).unwrap();
            let oracle = brute_force_edm(&m);
            for (a, b) in edm.data.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn edm_is_one_lipschitz(m in arb_mask()) {
            let edm = euclidean_distance_map(&m).unwrap();
            for i in 0..edm.data.len() {
                for j in (i + 1)..edm.data.len() {
                    let (a, b) = (edm.coords(i), edm.coords(j));
                    let dist = (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum::<f64>().sqrt();
                    prop_assert!((edm.data[i] - edm.data[j]).abs() <= dist + 1e-9);
                }
            }
        }
    }
}
