use super::{activation::sigmoid_scalar, axpy, dot, mac, Tensor};
use crate::{Error, Real, Result};

/// Gated recurrent unit, reset gate applied before the candidate's recurrent
/// product, one bias per gate:
///
/// ```text
/// z  = σ(W_z·x + U_z·h + b_z)
/// r  = σ(W_r·x + U_r·h + b_r)
/// h̃  = tanh(W_h·x + U_h·(r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
///
/// Input kernels are `hidden×input`, recurrent kernels `hidden×hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru<T> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

/// Per-step gate activations of a training forward pass, `[B·T, hidden]` each.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    batch: usize,
    steps: usize,
    z: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
    h_prev: Vec<T>,
}

struct Scratch<T> {
    z: Vec<T>,
    r: Vec<T>,
    rh: Vec<T>,
    cand: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(hidden: usize) -> Self {
        Self {
            z: vec![T::zero(); hidden],
            r: vec![T::zero(); hidden],
            rh: vec![T::zero(); hidden],
            cand: vec![T::zero(); hidden],
        }
    }
}

impl<T: Real> Gru<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        Self {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.dims()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.dims()[0]
    }

    /// MACs of one step.
    pub fn macs_per_step(&self) -> u64 {
        let (i, h) = (self.input_dim(), self.hidden_dim());
        (3 * (i * h + h * h)) as u64
    }

    fn advance(&self, x: &[T], h: &[T], s: &mut Scratch<T>, h_out: &mut [T]) {
        let (nin, nh) = (self.input_dim(), self.hidden_dim());
        fn rows<T: Real>(t: &Tensor<T>, n: usize, o: usize) -> &[T] {
            &t.data()[o * n..(o + 1) * n]
        }
        for o in 0..nh {
            let az = dot(rows(&self.w_z, nin, o), x) + dot(rows(&self.u_z, nh, o), h) + self.b_z.data()[o];
            let ar = dot(rows(&self.w_r, nin, o), x) + dot(rows(&self.u_r, nh, o), h) + self.b_r.data()[o];
            s.z[o] = sigmoid_scalar(az);
            s.r[o] = sigmoid_scalar(ar);
        }
        for o in 0..nh {
            s.rh[o] = s.r[o] * h[o];
        }
        for o in 0..nh {
            let ah = dot(rows(&self.w_h, nin, o), x) + dot(rows(&self.u_h, nh, o), &s.rh) + self.b_h.data()[o];
            s.cand[o] = ah.tanh();
        }
        for o in 0..nh {
            h_out[o] = (T::one() - s.z[o]) * h[o] + s.z[o] * s.cand[o];
        }
        mac::record(self.macs_per_step());
    }

    /// One recurrent step.
    pub fn step(&self, x: &[T], h_prev: &[T], h_out: &mut [T]) -> Result<()> {
        let (nin, nh) = (self.input_dim(), self.hidden_dim());
        if x.len() != nin || h_prev.len() != nh || h_out.len() != nh {
            return Err(Error::shape("gru step", &[nin, nh], &[x.len(), h_prev.len()]));
        }
        let mut s = Scratch::new(nh);
        self.advance(x, h_prev, &mut s, h_out);
        Ok(())
    }

    fn check_seq(&self, xs: &Tensor<T>) -> Result<[usize; 3]> {
        let [b, t, n] = xs.dims3("gru input")?;
        if n != self.input_dim() {
            return Err(Error::shape("gru input", &[b, t, self.input_dim()], xs.dims()));
        }
        Ok([b, t, n])
    }

    /// Runs `[B, T, in]` from a zero state, returning `[B, T, hidden]`.
    pub fn forward_seq(&self, xs: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_train(xs)?.0)
    }

    pub fn forward_train(&self, xs: &Tensor<T>) -> Result<(Tensor<T>, GruCache<T>)> {
        let [batch, steps, nin] = self.check_seq(xs)?;
        let nh = self.hidden_dim();
        let n = batch * steps * nh;
        let mut cache = GruCache {
            batch,
            steps,
            z: vec![T::zero(); n],
            r: vec![T::zero(); n],
            cand: vec![T::zero(); n],
            h_prev: vec![T::zero(); n],
        };
        let mut hs = vec![T::zero(); n];
        let mut s = Scratch::new(nh);
        let mut h = vec![T::zero(); nh];
        for b in 0..batch {
            h.iter_mut().for_each(|v| *v = T::zero());
            for t in 0..steps {
                let row = b * steps + t;
                let x = &xs.data()[row * nin..][..nin];
                let out = &mut hs[row * nh..][..nh];
                self.advance(x, &h, &mut s, out);
                let sl = row * nh..(row + 1) * nh;
                cache.z[sl.clone()].copy_from_slice(&s.z);
                cache.r[sl.clone()].copy_from_slice(&s.r);
                cache.cand[sl.clone()].copy_from_slice(&s.cand);
                cache.h_prev[sl].copy_from_slice(&h);
                h.copy_from_slice(out);
            }
        }
        Ok((Tensor::new(&[batch, steps, nh], hs)?, cache))
    }

    /// Backpropagation through time.
    pub fn backward(&self, xs: &Tensor<T>, cache: &GruCache<T>, grad_hs: &Tensor<T>) -> Result<(Tensor<T>, Gru<T>)> {
        let [batch, steps, nin] = self.check_seq(xs)?;
        let nh = self.hidden_dim();
        if batch != cache.batch || steps != cache.steps || grad_hs.dims() != [batch, steps, nh] {
            return Err(Error::shape("gru grad", &[batch, steps, nh], grad_hs.dims()));
        }
        let mut g = Gru::zeros(nin, nh);
        let mut gx = vec![T::zero(); xs.len()];
        let mut dh_next = vec![T::zero(); nh];
        let mut dh = vec![T::zero(); nh];
        let mut daz = vec![T::zero(); nh];
        let mut dar = vec![T::zero(); nh];
        let mut dah = vec![T::zero(); nh];
        let mut drh = vec![T::zero(); nh];
        let mut dhp = vec![T::zero(); nh];
        let mut rh = vec![T::zero(); nh];
        let one = T::one();
        for b in 0..batch {
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            for t in (0..steps).rev() {
                let row = b * steps + t;
                let sl = row * nh..(row + 1) * nh;
                let (z, r, cand, hp) = (&cache.z[sl.clone()], &cache.r[sl.clone()], &cache.cand[sl.clone()], &cache.h_prev[sl.clone()]);
                let x = &xs.data()[row * nin..][..nin];
                for o in 0..nh {
                    dh[o] = grad_hs.data()[row * nh + o] + dh_next[o];
                    let dz = dh[o] * (cand[o] - hp[o]);
                    dhp[o] = dh[o] * (one - z[o]);
                    dah[o] = dh[o] * z[o] * (one - cand[o] * cand[o]);
                    daz[o] = dz * z[o] * (one - z[o]);
                    rh[o] = r[o] * hp[o];
                }
                drh.iter_mut().for_each(|v| *v = T::zero());
                for o in 0..nh {
                    axpy(dah[o], &self.u_h.data()[o * nh..][..nh], &mut drh);
                }
                for o in 0..nh {
                    dar[o] = drh[o] * hp[o] * r[o] * (one - r[o]);
                    dhp[o] = dhp[o] + drh[o] * r[o];
                }
                let gxr = &mut gx[row * nin..][..nin];
                for o in 0..nh {
                    axpy(daz[o], &self.u_z.data()[o * nh..][..nh], &mut dhp);
                    axpy(dar[o], &self.u_r.data()[o * nh..][..nh], &mut dhp);
                    axpy(daz[o], &self.w_z.data()[o * nin..][..nin], gxr);
                    axpy(dar[o], &self.w_r.data()[o * nin..][..nin], gxr);
                    axpy(dah[o], &self.w_h.data()[o * nin..][..nin], gxr);
                    axpy(daz[o], x, &mut g.w_z.data_mut()[o * nin..][..nin]);
                    axpy(dar[o], x, &mut g.w_r.data_mut()[o * nin..][..nin]);
                    axpy(dah[o], x, &mut g.w_h.data_mut()[o * nin..][..nin]);
                    axpy(daz[o], hp, &mut g.u_z.data_mut()[o * nh..][..nh]);
                    axpy(dar[o], hp, &mut g.u_r.data_mut()[o * nh..][..nh]);
                    axpy(dah[o], &rh, &mut g.u_h.data_mut()[o * nh..][..nh]);
                }
                axpy(one, &daz, g.b_z.data_mut());
                axpy(one, &dar, g.b_r.data_mut());
                axpy(one, &dah, g.b_h.data_mut());
                dh_next.copy_from_slice(&dhp);
            }
        }
        Ok((Tensor::new(xs.dims(), gx)?, g))
    }

    /// Mutable views of all nine tensors, in `W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h` order.
    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn tensors(&self) -> [&Tensor<T>; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r,
            &self.b_h,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grads_close, central_difference};
    use rand::{Rng, SeedableRng};

    fn random_gru(nin: usize, nh: usize, seed: u64) -> Gru<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut g = Gru::zeros(nin, nh);
        for t in g.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
        }
        g
    }

    fn random(dims: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_params_zero_state() {
        let g = Gru::<f64>::zeros(3, 4);
        let mut h = vec![9.0; 4];
        g.step(&[1.0, -2.0, 0.5], &[0.0; 4], &mut h).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn state_stays_bounded_from_zero() {
        let mut g = random_gru(6, 5, 3);
        for t in g.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= 20.0);
        }
        let xs = random(&[2, 30, 6], 4);
        let hs = g.forward_seq(&xs).unwrap();
        // One step from zero is a strict convex combination of 0 and tanh.
        for b in 0..2 {
            assert!(hs.data()[b * 30 * 5..][..5].iter().all(|v| v.abs() < 1.0));
        }
        // Saturated gates may round the carried state onto ±1, never past it.
        assert!(hs.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn stepwise_equals_sequence_bitwise() {
        let g = random_gru(7, 6, 8);
        let xs = random(&[1, 12, 7], 9);
        let hs = g.forward_seq(&xs).unwrap();
        let mut h = vec![0.0; 6];
        let mut next = vec![0.0; 6];
        for t in 0..12 {
            g.step(&xs.data()[t * 7..(t + 1) * 7], &h, &mut next).unwrap();
            assert_eq!(&next[..], &hs.data()[t * 6..(t + 1) * 6]);
            h.copy_from_slice(&next);
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for (seed, batch, steps, nin, nh) in [(1u64, 1, 5, 4, 3), (2, 2, 5, 3, 5), (3, 3, 4, 6, 2)] {
            let gru = random_gru(nin, nh, seed);
            let xs = random(&[batch, steps, nin], seed + 10);
            let probe = random(&[batch, steps, nh], seed + 20);
            let loss = |g: &Gru<f64>, xs: &Tensor<f64>| -> f64 {
                let hs = g.forward_seq(xs).unwrap();
                hs.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = gru.forward_train(&xs).unwrap();
            let (gx, grads) = gru.backward(&xs, &cache, &probe).unwrap();
            let num = central_difference(xs.data(), 1e-5, |v| {
                loss(&gru, &Tensor::new(xs.dims(), v.to_vec()).unwrap())
            });
            assert_grads_close(gx.data(), &num, 1e-4, "gru dx");
            for i in 0..9 {
                let num = central_difference(gru.tensors()[i].data(), 1e-5, |v| {
                    let mut g = gru.clone();
                    g.tensors_mut()[i].data_mut().copy_from_slice(v);
                    loss(&g, &xs)
                });
                assert_grads_close(grads.tensors()[i].data(), &num, 1e-4, &format!("gru param {i}"));
            }
        }
    }
}
