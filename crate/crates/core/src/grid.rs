//! Dense 2D and 3D grids shared by every stage.
//!
//! Storage is row-major with x fastest: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`; pixel `(row, col)` lives at `col + width * row`.

use crate::volume_io::{VolumeIoError, VolumeMeta};

/// A 3D grid carrying physical metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    pub meta: VolumeMeta,
    pub data: Vec<T>,
}

impl<T: Clone> Volume<T> {
    pub fn filled(meta: VolumeMeta, value: T) -> Self {
        let n = meta.voxel_count();
        Self { meta, data: vec![value; n] }
    }

    pub fn from_vec(meta: VolumeMeta, data: Vec<T>) -> Result<Self, VolumeIoError> {
        if data.len() != meta.voxel_count() {
            return Err(VolumeIoError::Shape(format!(
                "expected {} voxels for dims {:?}, got {}",
                meta.voxel_count(),
                meta.dims,
                data.len()
            )));
        }
        Ok(Self { meta, data })
    }

    /// Same dims and spacing, new contents.
    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Volume<U> {
        Volume { meta: self.meta.clone(), data: self.data.iter().map(f).collect() }
    }

    /// Extracts the xz cross-section at `y` as an image with `width = nx`
    /// and `height = nz` (rows are z).
    pub fn slice_y(&self, y: usize) -> Image2<T> {
        let [nx, _, nz] = self.meta.dims;
        let mut data = Vec::with_capacity(nx * nz);
        for z in 0..nz {
            for x in 0..nx {
                data.push(self.data[self.index(x, y, z)].clone());
            }
        }
        Image2 { width: nx, height: nz, data }
    }

    pub fn set_slice_y(&mut self, y: usize, img: &Image2<T>) {
        let [nx, _, nz] = self.meta.dims;
        debug_assert_eq!((img.width, img.height), (nx, nz));
        for z in 0..nz {
            for x in 0..nx {
                let i = self.index(x, y, z);
                self.data[i] = img.data[x + nx * z].clone();
            }
        }
    }
}

impl<T> Volume<T> {
    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.meta.dims
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let [nx, ny, _] = self.meta.dims;
        x + nx * (y + ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.meta.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    /// True when the voxel lies on any face of the volume.
    #[inline]
    pub fn on_border(&self, index: usize) -> bool {
        let c = self.coords(index);
        let d = self.meta.dims;
        (0..3).any(|a| c[a] == 0 || c[a] + 1 == d[a])
    }

    pub fn same_shape<U>(&self, other: &Volume<U>) -> bool {
        self.meta.dims == other.meta.dims
    }
}

/// A plain 2D grid addressed as `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Image2<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Image2<U> {
        Image2 { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

impl<T> Image2<T> {
    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer does not match {width}x{height}");
        Self { width, height, data }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        col + self.width * row
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[col + self.width * row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = col + self.width * row;
        self.data[i] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// In-bounds 4- or 8-neighbours of `(row, col)`.
    pub fn neighbors(&self, row: usize, col: usize, eight: bool) -> impl Iterator<Item = (usize, usize)> + '_ {
        const N4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const N8: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        let offsets: &'static [(isize, isize)] = if eight { &N8 } else { &N4 };
        let (h, w) = (self.height as isize, self.width as isize);
        offsets.iter().filter_map(move |&(dr, dc)| {
            let r = row as isize + dr;
            let c = col as isize + dc;
            (r >= 0 && r < h && c >= 0 && c < w).then_some((r as usize, c as usize))
        })
    }
}
