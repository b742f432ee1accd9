use crate::error::{ensure_same_dims, Error, Result};

/// Row-major rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Unconstrained real-valued grid: gradients, distances, guide images.
pub type RealGrid = Grid<f64>;

impl<T> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(
                "dims",
                format!("grid must be at least 1x1, got {width}x{height}"),
            ));
        }
        if data.len() != width * height {
            return Err(Error::invalid(
                "data",
                format!(
                    "expected {} values for {width}x{height}, got {}",
                    width * height,
                    data.len()
                ),
            ));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V>(&self, other: &Grid<U>, mut f: impl FnMut(&T, &U) -> V) -> Result<Grid<V>> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "grid must be at least 1x1");
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

macro_rules! unit_interval_map {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Grid<f64>);

        impl $name {
            /// Fails if any value lies outside `[0, 1]` (NaN included).
            pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
                Self::from_grid(Grid::new(width, height, values)?)
            }

            pub fn from_grid(grid: Grid<f64>) -> Result<Self> {
                if let Some(i) = grid.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::invalid(
                        "values",
                        format!("value {} at index {i} outside [0, 1]", grid.as_slice()[i]),
                    ));
                }
                Ok($name(grid))
            }

            /// Clamps every value into `[0, 1]`; NaN maps to 0.
            pub fn from_grid_clamped(mut grid: Grid<f64>) -> Self {
                for v in grid.as_mut_slice() {
                    *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
                }
                $name(grid)
            }

            pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::invalid("value", format!("{value} outside [0, 1]")));
                }
                Ok($name(Grid::filled(width, height, value)))
            }

            #[inline]
            pub fn grid(&self) -> &Grid<f64> {
                &self.0
            }

            pub fn into_grid(self) -> Grid<f64> {
                self.0
            }

            #[inline]
            pub fn width(&self) -> usize {
                self.0.width()
            }

            #[inline]
            pub fn height(&self) -> usize {
                self.0.height()
            }

            #[inline]
            pub fn dims(&self) -> (usize, usize) {
                self.0.dims()
            }

            #[inline]
            pub fn values(&self) -> &[f64] {
                self.0.as_slice()
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> f64 {
                *self.0.get(x, y)
            }
        }
    };
}

unit_interval_map! {
    /// Per-pixel probabilities in `[0, 1]`.
    ProbMap
}

unit_interval_map! {
    /// Per-pixel gate between the foreground- and background-conditioned heads.
    WeightMap
}

impl WeightMap {
    /// `1 - w` at every pixel.
    pub fn complement(&self) -> WeightMap {
        WeightMap(self.0.map(|w| 1.0 - w))
    }
}

impl From<ProbMap> for WeightMap {
    fn from(p: ProbMap) -> Self {
        WeightMap(p.0)
    }
}

impl From<WeightMap> for ProbMap {
    fn from(w: WeightMap) -> Self {
        ProbMap(w.0)
    }
}

/// Rectangular boolean mask, `true` = foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        let g = Grid::new(width, height, bits)?;
        Ok(Self::from_grid(g))
    }

    pub fn from_grid(grid: Grid<bool>) -> Self {
        let (width, height) = grid.dims();
        BinaryMask {
            width,
            height,
            bits: grid.into_vec(),
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::from_grid(Grid::filled(width, height, false))
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::from_grid(Grid::filled(width, height, true))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> bool) -> Self {
        Self::from_grid(Grid::from_fn(width, height, f))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a && b)
    }

    /// Pixels in `self` but not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a && !b)
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    fn combine(&self, other: &BinaryMask, op: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// Indicator as reals: 1.0 on foreground, 0.0 elsewhere.
    pub fn to_real(&self) -> RealGrid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Grows the mask by `steps` iterations of 4-neighbour dilation.
    pub fn dilate(&self, steps: usize) -> BinaryMask {
        let mut cur = self.clone();
        for _ in 0..steps {
            cur = cur.morph_step(true);
        }
        cur
    }

    /// Shrinks the mask by `steps` iterations of 4-neighbour erosion.
    /// Out-of-bounds neighbours count as foreground, so a full mask stays full.
    pub fn erode(&self, steps: usize) -> BinaryMask {
        let mut cur = self.clone();
        for _ in 0..steps {
            cur = cur.morph_step(false);
        }
        cur
    }

    fn morph_step(&self, dilate: bool) -> BinaryMask {
        let (w, h) = self.dims();
        BinaryMask::from_fn(w, h, |x, y| {
            let mut acc = self.get(x, y);
            for (nx, ny) in neighbours4(x, y, w, h) {
                let v = self.get(nx, ny);
                acc = if dilate { acc || v } else { acc && v };
            }
            acc
        })
    }
}

/// In-bounds 4-neighbours of `(x, y)`.
pub(crate) fn neighbours4(
    x: usize,
    y: usize,
    w: usize,
    h: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let cand = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    cand.into_iter().filter(move |&(nx, ny)| nx < w && ny < h)
}

/// Per-pixel feature vectors, stored pixel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelFeatures {
    width: usize,
    height: usize,
    dim: usize,
    values: Vec<f64>,
}

impl PixelFeatures {
    pub fn new(width: usize, height: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::invalid(
                "dims",
                format!("features need width, height, dim >= 1, got {width}x{height}x{dim}"),
            ));
        }
        if values.len() != width * height * dim {
            return Err(Error::invalid(
                "values",
                format!(
                    "expected {} values, got {}",
                    width * height * dim,
                    values.len()
                ),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("non-finite feature at index {i}"),
            ));
        }
        Ok(PixelFeatures {
            width,
            height,
            dim,
            values,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of the pixel at row-major index `i`.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn channel(&self, c: usize) -> RealGrid {
        assert!(c < self.dim, "channel {c} out of range for dim {}", self.dim);
        Grid {
            width: self.width,
            height: self.height,
            data: (0..self.pixel_count()).map(|i| self.pixel(i)[c]).collect(),
        }
    }

    /// Guide intensity: Rec. 601 luma of channels 0..3 when `dim >= 3`, else channel 0.
    pub fn luminance(&self) -> RealGrid {
        if self.dim < 3 {
            return self.channel(0);
        }
        Grid {
            width: self.width,
            height: self.height,
            data: (0..self.pixel_count())
                .map(|i| {
                    let p = self.pixel(i);
                    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
                })
                .collect(),
        }
    }
}
