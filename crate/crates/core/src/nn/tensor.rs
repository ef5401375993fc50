use crate::error::{Error, Result};
use crate::lf::Stack;
use crate::real::Real;

/// Dense `[batch][channel][row][col]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::Dimension(format!(
                "tensor dims must be positive: {n}x{c}x{h}x{w}"
            )));
        }
        if data.len() != n * c * h * w {
            return Err(Error::Dimension(format!(
                "tensor {n}x{c}x{h}x{w} needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Tensor4 { n, c, h, w, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn item_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn item(&self, i: usize) -> &[T] {
        let len = self.item_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [T] {
        let len = self.item_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        Tensor4 {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}

impl Tensor4<f32> {
    /// Batches equally shaped stacks.
    pub fn from_stacks<'a>(stacks: impl IntoIterator<Item = &'a Stack>) -> Result<Self> {
        let mut it = stacks.into_iter().peekable();
        let first = it
            .peek()
            .ok_or_else(|| Error::Dimension("empty batch".into()))?;
        let (c, h, w) = (first.channels, first.h, first.w);
        let mut data = Vec::new();
        let mut n = 0;
        for s in it {
            if (s.channels, s.h, s.w) != (c, h, w) {
                return Err(Error::Dimension(format!(
                    "batch item {n} is {}x{}x{}, expected {c}x{h}x{w}",
                    s.channels, s.h, s.w
                )));
            }
            data.extend_from_slice(&s.data);
            n += 1;
        }
        Tensor4::from_vec(n, c, h, w, data)
    }

    pub fn item_stack(&self, i: usize) -> Stack {
        Stack {
            w: self.w,
            h: self.h,
            channels: self.c,
            data: self.item(i).to_vec(),
        }
    }
}
