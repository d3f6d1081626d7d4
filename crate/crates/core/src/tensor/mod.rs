//! Dense real and complex tensors in a fixed row-major layout.
//!
//! Feature tensors are `(c, t, h, w)` with `c` slowest and `w` fastest, so a
//! temporal line at `(c, h, w)` is a stride-`h*w` walk and each channel is a
//! contiguous `t x (h*w)` matrix. Tensors are immutable values: every
//! operation returns a new tensor, and every public constructor rejects
//! non-finite data.

mod ftf;

pub use ftf::{read_ftf, write_ftf, FtfTensor};

use crate::error::{FarError, Result};
use crate::rng::SeededRng;
use crate::Complex64;

/// Extents of a `(channels, frames, rows, cols)` feature tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub c: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(c: usize, t: usize, h: usize, w: usize) -> Result<Self> {
        Shape::new(&[c, t, h, w])?;
        Ok(Self { c, t, h, w })
    }

    pub fn numel(&self) -> usize {
        self.c * self.t * self.h * self.w
    }

    /// Number of spatial cells `h * w`.
    pub fn hw(&self) -> usize {
        self.h * self.w
    }

    /// Number of space-time cells `t * h * w` per channel.
    pub fn thw(&self) -> usize {
        self.t * self.h * self.w
    }

    pub fn index(&self, c: usize, t: usize, h: usize, w: usize) -> usize {
        ((c * self.t + t) * self.h + h) * self.w + w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.c, self.t, self.h, self.w]
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.c, self.t, self.h, self.w)
    }
}

/// Extents of a rank 1 to 4 tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub const MAX_RANK: usize = 4;

    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > Self::MAX_RANK {
            return Err(FarError::shape(format!("rank {} not in 1..=4", dims.len())));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(FarError::shape(format!("extent {pos} is zero in {dims:?}")));
        }
        // 16 bytes per element is the complex worst case.
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(16).is_some_and(|b| b <= isize::MAX as usize))
            .ok_or_else(|| FarError::shape(format!("element count of {dims:?} overflows")))?;
        debug_assert!(numel > 0);
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn as_shape4(&self) -> Result<Shape4> {
        match self.dims[..] {
            [c, t, h, w] => Ok(Shape4 { c, t, h, w }),
            _ => Err(FarError::shape(format!(
                "expected a rank-4 (c,t,h,w) tensor, got {:?}",
                self.dims
            ))),
        }
    }
}

impl From<Shape4> for Shape {
    fn from(s: Shape4) -> Self {
        Shape {
            dims: s.dims().to_vec(),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// How [`make_tensor`] fills a new tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FillSpec {
    Zeros,
    Constant(f64),
    /// Row-major draws of `SeededRng::uniform_in(lo, hi)`.
    SeededUniform { lo: f64, hi: f64, seed: u64 },
}

pub fn make_tensor(shape: Shape4, fill: FillSpec) -> Result<RTensor> {
    let n = shape.numel();
    let data = match fill {
        FillSpec::Zeros => vec![0.0; n],
        FillSpec::Constant(v) => vec![v; n],
        FillSpec::SeededUniform { lo, hi, seed } => {
            let mut rng = SeededRng::new(seed);
            (0..n).map(|_| rng.uniform_in(lo, hi)).collect()
        }
    };
    RTensor::from_vec(shape, data)
}

fn check_finite(data: &[f64], what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FarError::NonFinite(what))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl RTensor {
    pub fn from_vec(shape: impl Into<Shape>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.numel() {
            return Err(FarError::shape(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        check_finite(&data, "tensor construction")?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        let shape = shape.into();
        let n = shape.numel();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn shape4(&self) -> Result<Shape4> {
        self.shape.as_shape4()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data under new extents of equal element count.
    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != self.data.len() {
            return Err(FarError::shape(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, rhs: &RTensor) -> Result<RTensor> {
        elementwise(ElementwiseOp::Add, self, Operand::Tensor(rhs))
    }

    pub fn mul(&self, rhs: &RTensor) -> Result<RTensor> {
        elementwise(ElementwiseOp::Mul, self, Operand::Tensor(rhs))
    }

    pub fn scale(&self, factor: f64) -> Result<RTensor> {
        elementwise(ElementwiseOp::Mul, self, Operand::Scalar(factor))
    }

    pub fn sub(&self, rhs: &RTensor) -> Result<RTensor> {
        let neg = rhs.scale(-1.0)?;
        self.add(&neg)
    }

    /// Applies `f` to every element, keeping the shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RTensor> {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        check_finite(&data, "map")?;
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Circular shift of a rank-4 tensor along `t` and the flattened `h*w` axis.
    pub fn roll_spacetime(&self, dt: usize, dhw: usize) -> Result<RTensor> {
        let s = self.shape4()?;
        let hw = s.hw();
        let mut out = vec![0.0; self.data.len()];
        for c in 0..s.c {
            for t in 0..s.t {
                for q in 0..hw {
                    let dst = (c * s.t + (t + dt) % s.t) * hw + (q + dhw) % hw;
                    out[dst] = self.data[(c * s.t + t) * hw + q];
                }
            }
        }
        RTensor::from_vec(s, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Mul,
}

/// Right-hand side of an elementwise operation.
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Scalar(f64),
    /// Either the same shape as the left side, or a `(c, h, w)` tensor
    /// applied to every frame of a `(c, t, h, w)` left side.
    Tensor(&'a RTensor),
}

pub fn elementwise(op: ElementwiseOp, a: &RTensor, b: Operand<'_>) -> Result<RTensor> {
    let apply = |x: f64, y: f64| match op {
        ElementwiseOp::Add => x + y,
        ElementwiseOp::Mul => x * y,
    };
    let data: Vec<f64> = match b {
        Operand::Scalar(s) => a.data.iter().map(|&x| apply(x, s)).collect(),
        Operand::Tensor(b) if b.shape == a.shape => {
            a.data.iter().zip(&b.data).map(|(&x, &y)| apply(x, y)).collect()
        }
        Operand::Tensor(b) => match (a.shape.dims(), b.shape.dims()) {
            (&[c, t, h, w], &[bc, bh, bw]) if (c, h, w) == (bc, bh, bw) => {
                let hw = h * w;
                let mut out = Vec::with_capacity(a.data.len());
                for ci in 0..c {
                    let plane = &b.data[ci * hw..(ci + 1) * hw];
                    for ti in 0..t {
                        let start = (ci * t + ti) * hw;
                        out.extend(
                            a.data[start..start + hw]
                                .iter()
                                .zip(plane)
                                .map(|(&x, &y)| apply(x, y)),
                        );
                    }
                }
                out
            }
            _ => {
                return Err(FarError::shape(format!(
                    "cannot combine {} with {}",
                    a.shape, b.shape
                )))
            }
        },
    };
    check_finite(&data, "elementwise")?;
    Ok(RTensor {
        shape: a.shape.clone(),
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    shape: Shape,
    data: Vec<Complex64>,
}

impl CTensor {
    pub fn from_vec(shape: impl Into<Shape>, data: Vec<Complex64>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.numel() {
            return Err(FarError::shape(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(FarError::NonFinite("complex tensor construction"));
        }
        Ok(Self { shape, data })
    }

    pub fn from_real(t: &RTensor) -> Self {
        Self {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn real_part(&self) -> RTensor {
        RTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != self.data.len() {
            return Err(FarError::shape(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data,
        })
    }
}

/// Per-`(c, h, w)` motion energy; every entry is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicMask {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl DynamicMask {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        Shape::new(&[c, h, w])?;
        if data.len() != c * h * w {
            return Err(FarError::shape(format!(
                "{} mask values for ({c},{h},{w})",
                data.len()
            )));
        }
        check_finite(&data, "mask construction")?;
        if let Some(v) = data.iter().find(|&&v| v < 0.0) {
            return Err(FarError::Argument(format!("negative mask entry {v}")));
        }
        Ok(Self { c, h, w, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[(c * self.h + h) * self.w + w]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.h * self.w;
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn channel_max(&self, c: usize) -> f64 {
        self.channel(c).iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Each channel divided by its maximum; all-zero channels stay zero.
    pub fn max_normalized(&self) -> DynamicMask {
        let hw = self.h * self.w;
        let mut data = self.data.clone();
        for c in 0..self.c {
            let m = self.channel_max(c);
            if m > 0.0 {
                data[c * hw..(c + 1) * hw].iter_mut().for_each(|v| *v /= m);
            }
        }
        DynamicMask { data, ..*self }
    }

    pub fn to_tensor(&self) -> RTensor {
        RTensor {
            shape: Shape {
                dims: vec![self.c, self.h, self.w],
            },
            data: self.data.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_broadcast_mul(a: &RTensor, m: &RTensor) -> Vec<f64> {
        let s = a.shape4().unwrap();
        let mut out = vec![0.0; s.numel()];
        for c in 0..s.c {
            for t in 0..s.t {
                for h in 0..s.h {
                    for w in 0..s.w {
                        let i = s.index(c, t, h, w);
                        out[i] = a.data()[i] * m.data()[(c * s.h + h) * s.w + w];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn zero_and_constant_fills() {
        let z = make_tensor(Shape4::new(1, 2, 2, 2).unwrap(), FillSpec::Zeros).unwrap();
        assert_eq!(z.data(), &[0.0; 8]);
        let k = make_tensor(Shape4::new(1, 1, 1, 1).unwrap(), FillSpec::Constant(3.5)).unwrap();
        assert_eq!(k.data(), &[3.5]);
    }

    #[test]
    fn zero_extent_and_overflow_are_rejected() {
        assert!(Shape4::new(0, 1, 1, 1).is_err());
        assert!(Shape4::new(usize::MAX, 2, 1, 1).is_err());
        assert!(Shape4::new(1 << 20, 1 << 20, 1 << 20, 1).is_err());
        assert!(Shape::new(&[1, 1, 1, 1, 1]).is_err());
    }

    #[test]
    fn mul_by_ones_and_scale_by_zero() {
        let s = Shape4::new(2, 3, 2, 2).unwrap();
        let x = make_tensor(s, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 5 }).unwrap();
        let ones = make_tensor(s, FillSpec::Constant(1.0)).unwrap();
        assert_eq!(x.mul(&ones).unwrap(), x);
        let z = x.scale(0.0).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_broadcast_matches_loop() {
        let s = Shape4::new(1, 2, 2, 2).unwrap();
        let x = make_tensor(s, FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed: 8 }).unwrap();
        let m = RTensor::from_vec(Shape::new(&[1, 2, 2]).unwrap(), vec![0.5, 2.0, -1.0, 3.0]).unwrap();
        let got = x.mul(&m).unwrap();
        assert_eq!(got.data(), naive_broadcast_mul(&x, &m).as_slice());
    }

    #[test]
    fn incompatible_shapes_error() {
        let a = RTensor::zeros(Shape4::new(1, 2, 2, 2).unwrap());
        let b = RTensor::zeros(Shape::new(&[1, 2, 3]).unwrap());
        let c = RTensor::zeros(Shape::new(&[2, 2, 2]).unwrap());
        assert!(matches!(a.mul(&b), Err(FarError::Shape(_))));
        assert!(matches!(a.add(&c), Err(FarError::Shape(_))));
        // (t, h, w) is not a supported broadcast.
        let d = RTensor::zeros(Shape::new(&[2, 2, 2]).unwrap());
        let e = RTensor::zeros(Shape4::new(3, 2, 2, 2).unwrap());
        assert!(e.mul(&d).is_err());
    }

    #[test]
    fn non_finite_is_rejected() {
        let s = Shape::new(&[2]).unwrap();
        assert!(RTensor::from_vec(s.clone(), vec![1.0, f64::NAN]).is_err());
        let big = RTensor::from_vec(s, vec![1e300, 1.0]).unwrap();
        assert!(matches!(big.scale(1e300), Err(FarError::NonFinite(_))));
    }

    #[test]
    fn mask_rejects_negative_entries() {
        assert!(DynamicMask::new(1, 1, 2, vec![0.0, -1e-3]).is_err());
        let m = DynamicMask::new(2, 1, 2, vec![1.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.max_normalized().data(), &[0.25, 1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn broadcast_mul_equals_nested_loops(
            c in 1usize..=3, t in 1usize..=4, h in 1usize..=5, w in 1usize..=5, seed: u64
        ) {
            let s = Shape4::new(c, t, h, w).unwrap();
            let x = make_tensor(s, FillSpec::SeededUniform { lo: -2.0, hi: 2.0, seed }).unwrap();
            let mut rng = SeededRng::new(seed ^ 0xabcd);
            let m = RTensor::from_vec(
                Shape::new(&[c, h, w]).unwrap(),
                (0..c * h * w).map(|_| rng.uniform()).collect(),
            ).unwrap();
            let got = x.mul(&m).unwrap();
            let want = naive_broadcast_mul(&x, &m);
            prop_assert_eq!(got.data(), want.as_slice());
        }

        #[test]
        fn seeded_fill_is_deterministic(seed: u64) {
            let s = Shape4::new(2, 3, 2, 2).unwrap();
            let spec = FillSpec::SeededUniform { lo: -1.0, hi: 1.0, seed };
            prop_assert_eq!(make_tensor(s, spec).unwrap(), make_tensor(s, spec).unwrap());
        }
    }
}
