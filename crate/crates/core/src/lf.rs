//! Light-field data model: the 4D intensity tensor, 2D planes, channel
//! stacks and training patch extraction.

use crate::error::{Error, Result};

/// A row-major 2D plane of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T = f32> {
    pub w: usize,
    pub h: usize,
    pub data: Vec<T>,
}

pub type Image = Plane<f32>;

impl<T: Copy + Default> Plane<T> {
    pub fn new(w: usize, h: usize) -> Self {
        Self::filled(w, h, T::default())
    }

    pub fn filled(w: usize, h: usize, value: T) -> Self {
        Plane {
            w,
            h,
            data: vec![value; w * h],
        }
    }

    pub fn from_vec(w: usize, h: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != w * h {
            return Err(Error::Dimension(format!(
                "plane {w}x{h} needs {} samples, got {}",
                w * h,
                data.len()
            )));
        }
        Ok(Plane { w, h, data })
    }

    pub fn from_fn(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Plane { w, h, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.w + x] = v;
    }

    pub fn same_dims<U>(&self, other: &Plane<U>) -> bool {
        self.w == other.w && self.h == other.h
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, cw: usize, ch: usize) -> Plane<T> {
        let mut data = Vec::with_capacity(cw * ch);
        for y in y0..y0 + ch {
            data.extend_from_slice(&self.data[y * self.w + x0..y * self.w + x0 + cw]);
        }
        Plane { w: cw, h: ch, data }
    }
}

pub(crate) fn check_same<T, U>(a: &Plane<T>, b: &Plane<U>, what: &str) -> Result<()> {
    if a.w != b.w || a.h != b.h {
        return Err(Error::Dimension(format!(
            "{what}: {}x{} vs {}x{}",
            a.w, a.h, b.w, b.h
        )));
    }
    Ok(())
}

/// Channel-major stack of equally sized planes, laid out `[channel][y][x]`.
/// This is exactly the per-item layout the network engine consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub w: usize,
    pub h: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Stack {
    pub fn zeros(w: usize, h: usize, channels: usize) -> Self {
        Stack {
            w,
            h,
            channels,
            data: vec![0.0; w * h * channels],
        }
    }

    pub fn from_planes(planes: &[Image]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Dimension("empty plane list".into()))?;
        let (w, h) = (first.w, first.h);
        let mut data = Vec::with_capacity(w * h * planes.len());
        for p in planes {
            check_same(first, p, "stack planes")?;
            data.extend_from_slice(&p.data);
        }
        Ok(Stack {
            w,
            h,
            channels: planes.len(),
            data,
        })
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.w * self.h;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.w * self.h;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn plane(&self, c: usize) -> Image {
        Plane {
            w: self.w,
            h: self.h,
            data: self.channel(c).to_vec(),
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, cw: usize, ch: usize) -> Stack {
        let mut data = Vec::with_capacity(cw * ch * self.channels);
        for c in 0..self.channels {
            let src = self.channel(c);
            for y in y0..y0 + ch {
                data.extend_from_slice(&src[y * self.w + x0..y * self.w + x0 + cw]);
            }
        }
        Stack {
            w: cw,
            h: ch,
            channels: self.channels,
            data,
        }
    }
}

/// 4D light field. Samples are stored `[v][s][y][x]`: vertical angular index
/// outermost, then horizontal angular index, then the spatial raster.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    w: usize,
    h: usize,
    n_h: usize,
    n_v: usize,
    data: Vec<f32>,
}

/// One sub-aperture view with its 1-based angular position.
#[derive(Debug, Clone, PartialEq)]
pub struct Sai {
    pub pixels: Image,
    pub s: usize,
    pub v: usize,
}

impl LightField {
    pub fn new(w: usize, h: usize, n_h: usize, n_v: usize, data: Vec<f32>) -> Result<Self> {
        if w == 0 || h == 0 || n_h == 0 || n_v == 0 {
            return Err(Error::Dimension(format!(
                "light field dims must be positive, got w={w} h={h} n_h={n_h} n_v={n_v}"
            )));
        }
        let expected = w * h * n_h * n_v;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "light field {w}x{h}x{n_h}x{n_v} needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(LightField {
            w,
            h,
            n_h,
            n_v,
            data,
        })
    }

    pub fn filled(w: usize, h: usize, n_h: usize, n_v: usize, value: f32) -> Result<Self> {
        Self::new(w, h, n_h, n_v, vec![value; w * h * n_h * n_v])
    }

    /// Builds a light field from a per-sample function of 1-based `(s, v)` and
    /// 0-based `(x, y)`.
    pub fn from_fn(
        w: usize,
        h: usize,
        n_h: usize,
        n_v: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(w * h * n_h * n_v);
        for v in 1..=n_v {
            for s in 1..=n_h {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(s, v, x, y));
                    }
                }
            }
        }
        Self::new(w, h, n_h, n_v, data)
    }

    /// Assembles a light field from views given in `[v][s]` row-major order.
    pub fn from_views(n_h: usize, n_v: usize, views: &[Image]) -> Result<Self> {
        if views.len() != n_h * n_v {
            return Err(Error::Dimension(format!(
                "expected {} views, got {}",
                n_h * n_v,
                views.len()
            )));
        }
        let stack = Stack::from_planes(views)?;
        Self::new(stack.w, stack.h, n_h, n_v, stack.data)
    }

    pub fn w(&self) -> usize {
        self.w
    }
    pub fn h(&self) -> usize {
        self.h
    }
    pub fn n_h(&self) -> usize {
        self.n_h
    }
    pub fn n_v(&self) -> usize {
        self.n_v
    }
    pub fn n_views(&self) -> usize {
        self.n_h * self.n_v
    }
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.w, self.h, self.n_h, self.n_v)
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_dims(&self, other: &LightField) -> bool {
        self.dims() == other.dims()
    }

    #[inline]
    fn view_len(&self) -> usize {
        self.w * self.h
    }

    /// Pixels of the view with 0-based linear index `n = (v-1)·n_h + (s-1)`.
    pub fn view(&self, n: usize) -> &[f32] {
        let len = self.view_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn view_mut(&mut self, n: usize) -> &mut [f32] {
        let len = self.view_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn view_image(&self, n: usize) -> Image {
        Plane {
            w: self.w,
            h: self.h,
            data: self.view(n).to_vec(),
        }
    }

    pub fn views(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.view_len())
    }

    /// Linear view index for 1-based angular indices.
    pub fn view_index(&self, s: usize, v: usize) -> Result<usize> {
        if s == 0 || s > self.n_h || v == 0 || v > self.n_v {
            return Err(Error::Index(format!(
                "SAI (s={s}, v={v}) outside 1..={} x 1..={}",
                self.n_h, self.n_v
            )));
        }
        Ok((v - 1) * self.n_h + (s - 1))
    }

    #[inline]
    pub fn at(&self, s: usize, v: usize, x: usize, y: usize) -> f32 {
        self.data[(((v - 1) * self.n_h + (s - 1)) * self.h + y) * self.w + x]
    }

    /// Copy of the sub-aperture image at 1-based `(s, v)`.
    pub fn get_sai(&self, s: usize, v: usize) -> Result<Sai> {
        let n = self.view_index(s, v)?;
        Ok(Sai {
            pixels: self.view_image(n),
            s,
            v,
        })
    }

    /// All views as a channel stack, channel `n` being view `n`.
    pub fn to_stack(&self) -> Stack {
        Stack {
            w: self.w,
            h: self.h,
            channels: self.n_views(),
            data: self.data.clone(),
        }
    }

    pub fn from_stack(n_h: usize, n_v: usize, stack: Stack) -> Result<Self> {
        if stack.channels != n_h * n_v {
            return Err(Error::Dimension(format!(
                "stack has {} channels, light field needs {}",
                stack.channels,
                n_h * n_v
            )));
        }
        Self::new(stack.w, stack.h, n_h, n_v, stack.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> LightField {
        LightField {
            w: self.w,
            h: self.h,
            n_h: self.n_h,
            n_v: self.n_v,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> LightField {
        self.map(|v| v.clamp(0.0, 1.0))
    }
}

/// BT.601 luma.
pub fn rgb_to_gray(r: &Image, g: &Image, b: &Image) -> Result<Image> {
    check_same(r, g, "rgb_to_gray")?;
    check_same(r, b, "rgb_to_gray")?;
    let data = r
        .data
        .iter()
        .zip(&g.data)
        .zip(&b.data)
        .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
        .collect();
    Ok(Plane {
        w: r.w,
        h: r.h,
        data,
    })
}

/// Top-left offsets of a regular patch grid that lies fully inside `dim`.
pub fn patch_positions(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    if size > dim || size == 0 || stride == 0 {
        return Vec::new();
    }
    (0..=(dim - size) / stride).map(|i| i * stride).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub input: Stack,
    pub target: Stack,
    pub source_id: String,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    pub patch_size: usize,
    pub stride: usize,
}

impl PatchSet {
    pub fn new(patch_size: usize, stride: usize) -> Self {
        PatchSet {
            patches: Vec::new(),
            patch_size,
            stride,
        }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Crops every grid position out of full-size `(input, target)` stacks.
    pub fn push_grid(&mut self, source: &str, input: &Stack, target: &Stack) -> Result<()> {
        if input.w != target.w || input.h != target.h {
            return Err(Error::Dimension(format!(
                "feature {}x{} vs target {}x{}",
                input.w, input.h, target.w, target.h
            )));
        }
        let size = self.patch_size;
        if size == 0 || self.stride == 0 {
            return Err(Error::InvalidParam(
                "patch size and stride must be positive".into(),
            ));
        }
        if size > input.w || size > input.h {
            return Err(Error::Dimension(format!(
                "patch size {size} exceeds spatial dims {}x{}",
                input.w, input.h
            )));
        }
        let xs = patch_positions(input.w, size, self.stride);
        for y in patch_positions(input.h, size, self.stride) {
            for &x in &xs {
                self.patches.push(Patch {
                    input: input.crop(x, y, size, size),
                    target: target.crop(x, y, size, size),
                    source_id: format!("{source}@{y},{x}"),
                    x,
                    y,
                });
            }
        }
        Ok(())
    }
}

/// Runs `feature_builder` on the whole light field, then crops its input and
/// target stacks on the regular stride grid. Angular axes are never cropped.
pub fn extract_patches<F>(
    lf: &LightField,
    source: &str,
    feature_builder: F,
    patch_size: usize,
    stride: usize,
) -> Result<PatchSet>
where
    F: FnOnce(&LightField) -> Result<(Stack, Stack)>,
{
    if patch_size > lf.w() || patch_size > lf.h() {
        return Err(Error::Dimension(format!(
            "patch size {patch_size} exceeds spatial dims {}x{}",
            lf.w(),
            lf.h()
        )));
    }
    let (input, target) = feature_builder(lf)?;
    let mut set = PatchSet::new(patch_size, stride);
    set.push_grid(source, &input, &target)?;
    Ok(set)
}
