use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binfmt::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 8] = b"MCSEPNET";
const VERSION: u32 = 1;

/// Per-frame fully connected mask estimator: tanh hidden layers and a
/// sigmoid output holding `sources` masks of `bins` values each.
///
/// All weights and biases live in one flat parameter vector; layer `l`
/// stores its `out × in` weight matrix row-major followed by its `out`
/// biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskEstimator {
    dims: Vec<usize>,
    sources: usize,
    bins: usize,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass over T frames.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Matrix>,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace has an input")
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MaskEstimator {
    /// Weights drawn uniformly from ±1/√fan_in; biases start at zero.
    pub fn new(input: usize, hidden: &[usize], sources: usize, bins: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(sources * bins);
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!("layer widths must be positive, got {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::count(&dims));
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.gen_range(-bound..=bound)));
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Ok(Self { dims, sources, bins, params })
    }

    fn count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn input_width(&self) -> usize {
        self.dims[0]
    }

    pub fn output_width(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// (weights, biases) of layer `l`.
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = Self::count(&self.dims[..=l]);
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        (w, &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out])
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::WidthMismatch { checkpoint: self.input_width(), features: x.cols() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Trace> {
        self.check_input(x)?;
        let layers = self.dims.len() - 1;
        let mut acts = vec![x.clone()];
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let input = &acts[l];
            let frames = input.rows();
            let mut out = Matrix::zeros(frames, n_out);
            // out = input · Wᵀ
            unsafe {
                matrixmultiply::dgemm(
                    frames, n_in, n_out, 1.0,
                    input.as_slice().as_ptr(), n_in as isize, 1,
                    w.as_ptr(), 1, n_in as isize,
                    0.0, out.as_mut_slice().as_mut_ptr(), n_out as isize, 1,
                );
            }
            for t in 0..frames {
                for (z, bo) in out.row_mut(t).iter_mut().zip(b) {
                    let pre = *z + bo;
                    *z = if l + 1 == layers { sigmoid(pre) } else { pre.tanh() };
                }
            }
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    /// Splits a T × (S·F) output into S masks of shape T × F.
    pub fn split_masks(&self, output: &Matrix) -> Vec<Matrix> {
        let f = self.bins;
        (0..self.sources)
            .map(|s| Matrix::from_fn(output.rows(), f, |t, k| output.row(t)[s * f + k]))
            .collect()
    }

    pub fn masks(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        Ok(self.split_masks(self.forward(x)?.output()))
    }

    /// Parameter gradient given `dL/dmask` for every source mask.
    pub fn backward(&self, trace: &Trace, mask_grads: &[Matrix]) -> Result<Vec<f64>> {
        let out = trace.output();
        let frames = out.rows();
        if mask_grads.len() != self.sources || mask_grads.iter().any(|g| g.shape() != (frames, self.bins)) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} mask gradients of {frames}×{}",
                self.sources, self.bins
            )));
        }
        let layers = self.dims.len() - 1;
        // dL/dz for the output layer, through the sigmoid.
        let mut delta = Matrix::from_fn(frames, self.output_width(), |t, j| {
            let y = out.row(t)[j];
            mask_grads[j / self.bins].row(t)[j % self.bins] * y * (1.0 - y)
        });
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let offset = Self::count(&self.dims[..=l]);
            let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let input = &trace.acts[l];
            // gW = deltaᵀ · input, gb = column sums of delta.
            unsafe {
                matrixmultiply::dgemm(
                    n_out, frames, n_in, 1.0,
                    delta.as_slice().as_ptr(), 1, n_out as isize,
                    input.as_slice().as_ptr(), n_in as isize, 1,
                    0.0, gw.as_mut_ptr(), n_in as isize, 1,
                );
            }
            for t in 0..frames {
                for (g, d) in gb.iter_mut().zip(delta.row(t)) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            // prev = delta · W, then through tanh: dh/dz = 1 - h².
            let mut prev = Matrix::zeros(frames, n_in);
            unsafe {
                matrixmultiply::dgemm(
                    frames, n_out, n_in, 1.0,
                    delta.as_slice().as_ptr(), n_out as isize, 1,
                    w.as_ptr(), n_in as isize, 1,
                    0.0, prev.as_mut_slice().as_mut_ptr(), n_in as isize, 1,
                );
            }
            for (p, h) in prev.as_mut_slice().iter_mut().zip(input.as_slice()) {
                *p *= 1.0 - h * h;
            }
            delta = prev;
        }
        Ok(grad)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(32 + 8 * (self.dims.len() + self.params.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for v in self.dims.iter().chain([&self.sources, &self.bins]) {
            buf.write_all(&(*v as u64).to_le_bytes()).unwrap();
        }
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: &str| Error::Format { what: "checkpoint", detail: detail.to_string() };
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let layers = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let mut words = bytes[16..].chunks_exact(8).map(|c| c.try_into().unwrap());
        let mut header = Vec::with_capacity(layers + 2);
        for _ in 0..layers + 2 {
            header.push(u64::from_le_bytes(words.next().ok_or_else(|| bad("truncated header"))?) as usize);
        }
        let (sources, bins) = (header[layers], header[layers + 1]);
        let dims = header[..layers].to_vec();
        if layers < 2 || dims.contains(&0) || dims[layers - 1] != sources * bins {
            return Err(bad(&format!("inconsistent dims {dims:?} for {sources}×{bins} masks")));
        }
        let params: Vec<f64> = words.map(f64::from_le_bytes).collect();
        if params.len() != Self::count(&dims) || (bytes.len() - 16) % 8 != 0 {
            return Err(bad(&format!("expected {} parameters, found {}", Self::count(&dims), params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self { dims, sources, bins, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::dot;

    fn net() -> MaskEstimator {
        MaskEstimator::new(5, &[4, 3], 2, 3, 9).unwrap()
    }

    #[test]
    fn shapes_and_range() {
        let n = net();
        assert_eq!(n.parameter_count(), 5 * 4 + 4 + 4 * 3 + 3 + 3 * 6 + 6);
        let x = Matrix::from_fn(7, 5, |t, i| (t as f64 - i as f64) * 0.3);
        let masks = n.masks(&x).unwrap();
        assert_eq!(masks.len(), 2);
        assert!(masks.iter().all(|m| m.shape() == (7, 3)));
        assert!(masks.iter().flat_map(|m| m.as_slice()).all(|&v| v > 0.0 && v < 1.0));
        assert!(matches!(n.forward(&Matrix::zeros(2, 4)), Err(Error::WidthMismatch { checkpoint: 5, features: 4 })));
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let n = net();
        assert_eq!(n, net());
        assert_ne!(n, MaskEstimator::new(5, &[4, 3], 2, 3, 10).unwrap());
        let (w, b) = n.layer(0);
        assert!(w.iter().all(|v| v.abs() <= 1.0 / 5f64.sqrt()));
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences_on_linear_objective() {
        let mut n = net();
        let x = Matrix::from_fn(4, 5, |t, i| ((t * 5 + i) as f64 * 0.7).sin());
        let coef: Vec<Matrix> = (0..2).map(|s| Matrix::from_fn(4, 3, |t, f| (s + t + f) as f64 * 0.1 - 0.3)).collect();
        let objective = |n: &MaskEstimator| -> f64 {
            n.masks(&x).unwrap().iter().zip(&coef).map(|(m, c)| dot(m.as_slice(), c.as_slice())).sum()
        };
        let grad = n.backward(&n.forward(&x).unwrap(), &coef).unwrap();
        let h = 1e-6;
        for i in 0..n.parameter_count() {
            let orig = n.params[i];
            n.params[i] = orig + h;
            let up = objective(&n);
            n.params[i] = orig - h;
            let down = objective(&n);
            n.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_corruption() {
        let n = net();
        let bytes = n.to_bytes();
        assert_eq!(MaskEstimator::from_bytes(&bytes).unwrap(), n);
        assert!(MaskEstimator::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(MaskEstimator::from_bytes(&bad).is_err());
    }
}
