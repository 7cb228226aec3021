use super::{axpy, dot, mac, Tensor};
use crate::{Error, Real, Result};

/// Frequency-only convolution with a `(1, k)` kernel and `(1, stride)` stride.
///
/// Kernel layout is `[1, k, in_ch, out_ch]`. Padding is "same-ceil": the output
/// extent is `ceil(in / stride)` and the total zero padding
/// `max(0, (out − 1)·stride + k − in)` is split floor-left, ceil-right.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrads<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(taps: usize, in_ch: usize, out_ch: usize, stride: usize) -> Self {
        Self {
            kernel: Tensor::zeros(&[1, taps, in_ch, out_ch]),
            bias: Tensor::zeros(&[out_ch]),
            stride,
        }
    }

    pub fn taps(&self) -> usize {
        self.kernel.dims()[1]
    }

    pub fn in_ch(&self) -> usize {
        self.kernel.dims()[2]
    }

    pub fn out_ch(&self) -> usize {
        self.kernel.dims()[3]
    }

    pub fn out_extent(&self, in_extent: usize) -> usize {
        in_extent.div_ceil(self.stride)
    }

    /// `(left, total)` zero padding for an input extent.
    pub fn padding(&self, in_extent: usize) -> (usize, usize) {
        let out = self.out_extent(in_extent);
        let total = ((out.max(1) - 1) * self.stride + self.taps()).saturating_sub(in_extent);
        (total / 2, total)
    }

    /// MACs for one row of `in_extent` positions, padded taps included.
    pub fn macs_per_row(&self, in_extent: usize) -> u64 {
        (self.out_extent(in_extent) * self.taps() * self.in_ch() * self.out_ch()) as u64
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<[usize; 3]> {
        let [rows, fin, cin] = x.dims3("conv input")?;
        if cin != self.in_ch() {
            return Err(Error::shape("conv input", &[rows, fin, self.in_ch()], x.dims()));
        }
        Ok([rows, fin, cin])
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [rows, fin, cin] = self.check_input(x)?;
        let (k, cout, s) = (self.taps(), self.out_ch(), self.stride);
        let fout = self.out_extent(fin);
        let (left, total) = self.padding(fin);
        let w = self.kernel.data();
        let b = self.bias.data();
        let mut padded = vec![T::zero(); (fin + total) * cin];
        let mut out = vec![T::zero(); rows * fout * cout];
        let mut macs = 0u64;
        for (xr, or) in x
            .data()
            .chunks_exact(fin * cin)
            .zip(out.chunks_exact_mut(fout * cout))
        {
            padded[left * cin..(left + fin) * cin].copy_from_slice(xr);
            for (fo, o) in or.chunks_exact_mut(cout).enumerate() {
                o.copy_from_slice(b);
                for j in 0..k {
                    let xin = &padded[(fo * s + j) * cin..][..cin];
                    let wj = &w[j * cin * cout..][..cin * cout];
                    for (&xv, wrow) in xin.iter().zip(wj.chunks_exact(cout)) {
                        axpy(xv, wrow, o);
                    }
                    macs += (cin * cout) as u64;
                }
            }
        }
        mac::record(macs);
        Tensor::new(&[rows, fout, cout], out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Conv2dGrads<T>)> {
        let [rows, fin, cin] = self.check_input(x)?;
        let (k, cout, s) = (self.taps(), self.out_ch(), self.stride);
        let fout = self.out_extent(fin);
        if grad_out.dims() != [rows, fout, cout] {
            return Err(Error::shape("conv grad", &[rows, fout, cout], grad_out.dims()));
        }
        let (left, total) = self.padding(fin);
        let w = self.kernel.data();
        let mut gk = vec![T::zero(); w.len()];
        let mut gb = vec![T::zero(); cout];
        let mut gx = vec![T::zero(); x.len()];
        let mut padded = vec![T::zero(); (fin + total) * cin];
        let mut gpad = vec![T::zero(); (fin + total) * cin];
        for ((xr, gr), gxr) in x
            .data()
            .chunks_exact(fin * cin)
            .zip(grad_out.data().chunks_exact(fout * cout))
            .zip(gx.chunks_exact_mut(fin * cin))
        {
            padded[left * cin..(left + fin) * cin].copy_from_slice(xr);
            gpad.iter_mut().for_each(|v| *v = T::zero());
            for (fo, g) in gr.chunks_exact(cout).enumerate() {
                axpy(T::one(), g, &mut gb);
                for j in 0..k {
                    let base = (fo * s + j) * cin;
                    let wj = &w[j * cin * cout..][..cin * cout];
                    let gkj = &mut gk[j * cin * cout..][..cin * cout];
                    for ci in 0..cin {
                        axpy(padded[base + ci], g, &mut gkj[ci * cout..][..cout]);
                        gpad[base + ci] = gpad[base + ci] + dot(&wj[ci * cout..][..cout], g);
                    }
                }
            }
            gxr.copy_from_slice(&gpad[left * cin..(left + fin) * cin]);
        }
        Ok((
            Tensor::new(x.dims(), gx)?,
            Conv2dGrads {
                kernel: Tensor::new(self.kernel.dims(), gk)?,
                bias: Tensor::new(&[cout], gb)?,
            },
        ))
    }
}
