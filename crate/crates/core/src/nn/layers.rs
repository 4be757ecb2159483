use super::gemm::gemm;
use super::{Param, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerKind {
    /// Valid-padding 2-D convolution over `[batch, channels, height, width]`.
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        out_units: usize,
    },
    Relu,
    Sigmoid,
    Flatten,
}

/// One layer of a sequential network. Parameterized layers that share a
/// `name` share weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Seed for the initial weights.
    pub seed: u64,
}

impl LayerSpec {
    pub fn conv(name: &str, out_channels: usize, kernel: usize, stride: usize, seed: u64) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv {
                out_channels,
                kernel,
                stride,
            },
            seed,
        }
    }

    pub fn dense(name: &str, out_units: usize, seed: u64) -> Self {
        LayerSpec {
            name: name.into(),
            kind: LayerKind::Dense { out_units },
            seed,
        }
    }

    fn plain(name: &str, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
            seed: 0,
        }
    }

    pub fn relu() -> Self {
        Self::plain("relu", LayerKind::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::plain("sigmoid", LayerKind::Sigmoid)
    }

    pub fn flatten() -> Self {
        Self::plain("flatten", LayerKind::Flatten)
    }

    pub fn has_params(&self) -> bool {
        matches!(self.kind, LayerKind::Conv { .. } | LayerKind::Dense { .. })
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = |d: String| Err(Error::shape(&self.name, d));
        match self.kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
            } => {
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return err("conv needs positive channels, kernel and stride".into());
                }
                let &[_, h, w] = input else {
                    return err(format!("conv expects [channels, height, width], got {input:?}"));
                };
                if h < kernel || w < kernel {
                    return err(format!("input {h}x{w} smaller than kernel {kernel}"));
                }
                Ok(vec![out_channels, (h - kernel) / stride + 1, (w - kernel) / stride + 1])
            }
            LayerKind::Dense { out_units } => {
                if out_units == 0 {
                    return err("dense needs at least one unit".into());
                }
                if input.len() != 1 {
                    return err(format!("dense expects a flat input, got {input:?}"));
                }
                Ok(vec![out_units])
            }
            LayerKind::Relu | LayerKind::Sigmoid => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Weight and bias shapes for a per-sample input shape.
    fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>, usize)> {
        match self.kind {
            LayerKind::Conv {
                out_channels, kernel, ..
            } => Some((
                vec![out_channels, input[0], kernel, kernel],
                vec![out_channels],
                input[0] * kernel * kernel,
            )),
            LayerKind::Dense { out_units } => Some((vec![out_units, input[0]], vec![out_units], input[0])),
            _ => None,
        }
    }
}

/// A sequential stack of layers with a fixed per-sample input shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl Network {
    pub fn new(input: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        Network { input, layers }
    }

    /// Per-sample input shape of each layer, then the final output shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![self.input.clone()];
        for l in &self.layers {
            let next = l.output_shape(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().expect("non-empty"))
    }

    /// Adds fan-in scaled uniform weights and zero biases for every
    /// parameterized layer not yet in `store`. A name already present must
    /// have matching shapes; that is how tied layers are declared.
    pub fn init_params(&self, store: &mut ParamStore) -> Result<()> {
        let shapes = self.shapes()?;
        for (l, input) in self.layers.iter().zip(&shapes) {
            let Some((w_shape, b_shape, fan_in)) = l.param_shapes(input) else {
                continue;
            };
            if let Some(p) = store.get(&l.name) {
                if p.weight.shape() != w_shape.as_slice() || p.bias.shape() != b_shape.as_slice() {
                    return Err(Error::shape(
                        &l.name,
                        format!("tied layer expects weight {w_shape:?}, store has {:?}", p.weight.shape()),
                    ));
                }
                continue;
            }
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut r = rng::child_rng(l.seed, rng::stream::INIT_WEIGHTS, 0);
            let n: usize = w_shape.iter().product();
            let w: Vec<f64> = (0..n).map(|_| r.gen_range(-bound..bound)).collect();
            store.insert(
                l.name.clone(),
                Param {
                    weight: Tensor::from_parts(w_shape, w),
                    bias: Tensor::zeros(&b_shape),
                },
            );
        }
        Ok(())
    }
}

enum LayerCache {
    Conv {
        cols: Vec<f64>,
        in_shape: [usize; 4],
        out_hw: (usize, usize),
    },
    Dense {
        input: Tensor,
    },
    Relu {
        mask: Vec<bool>,
    },
    Sigmoid {
        out: Vec<f64>,
    },
    Flatten {
        in_shape: Vec<usize>,
    },
}

/// Intermediates saved by [`forward`] for [`backward`].
pub struct Cache {
    stamp: (u64, u64),
    layers: Vec<String>,
    entries: Vec<LayerCache>,
}

impl Cache {
    /// Sign pattern of every ReLU input; finite differences are only valid
    /// while this pattern is unchanged.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.entries
            .iter()
            .flat_map(|e| match e {
                LayerCache::Relu { mask } => mask.clone(),
                _ => Vec::new(),
            })
            .collect()
    }
}

fn im2col(x: &[f64], [b, c, h, w]: [usize; 4], k: usize, s: usize, (oh, ow): (usize, usize)) -> Vec<f64> {
    let p = oh * ow;
    let rows = c * k * k;
    let mut cols = vec![0.0; b * rows * p];
    for bi in 0..b {
        for ci in 0..c {
            let plane = &x[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let dst = &mut cols[(bi * rows + row) * p..(bi * rows + row + 1) * p];
                    for oy in 0..oh {
                        let src = &plane[(oy * s + ki) * w + kj..];
                        let out = &mut dst[oy * ow..(oy + 1) * ow];
                        for (ox, v) in out.iter_mut().enumerate() {
                            *v = src[ox * s];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], [b, c, h, w]: [usize; 4], k: usize, s: usize, (oh, ow): (usize, usize)) -> Vec<f64> {
    let p = oh * ow;
    let rows = c * k * k;
    let mut x = vec![0.0; b * c * h * w];
    for bi in 0..b {
        for ci in 0..c {
            let plane = &mut x[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src = &cols[(bi * rows + row) * p..(bi * rows + row + 1) * p];
                    for oy in 0..oh {
                        let base = (oy * s + ki) * w + kj;
                        for ox in 0..ow {
                            plane[base + ox * s] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

fn conv_forward(
    l: &LayerSpec,
    p: &Param,
    x: &Tensor,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor, LayerCache)> {
    let &[b, c, h, w] = x.shape() else {
        return Err(Error::shape(&l.name, format!("conv expects a 4-D batch, got {:?}", x.shape())));
    };
    let ws = p.weight.shape();
    if ws[1] != c || ws[2] != kernel || h < kernel || w < kernel {
        return Err(Error::shape(
            &l.name,
            format!("input {:?} does not fit weight {ws:?}", x.shape()),
        ));
    }
    let o = ws[0];
    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
    let pix = oh * ow;
    let rows = c * kernel * kernel;
    let cols = im2col(x.data(), [b, c, h, w], kernel, stride, (oh, ow));
    let mut out = vec![0.0; b * o * pix];
    for bi in 0..b {
        let dst = &mut out[bi * o * pix..(bi + 1) * o * pix];
        for (oi, chunk) in dst.chunks_mut(pix).enumerate() {
            chunk.fill(p.bias.data()[oi]);
        }
        gemm(
            (o, rows, pix),
            (p.weight.data(), rows, 1),
            (&cols[bi * rows * pix..(bi + 1) * rows * pix], pix, 1),
            1.0,
            (dst, pix, 1),
        );
    }
    Ok((
        Tensor::from_parts(vec![b, o, oh, ow], out),
        LayerCache::Conv {
            cols,
            in_shape: [b, c, h, w],
            out_hw: (oh, ow),
        },
    ))
}

fn dense_forward(l: &LayerSpec, p: &Param, x: &Tensor) -> Result<(Tensor, LayerCache)> {
    let ws = p.weight.shape();
    let (m, n) = (ws[0], ws[1]);
    if x.shape().len() != 2 || x.shape()[1] != n {
        return Err(Error::shape(
            &l.name,
            format!("input {:?} does not fit weight {ws:?}", x.shape()),
        ));
    }
    let b = x.batch();
    let mut out = Vec::with_capacity(b * m);
    for _ in 0..b {
        out.extend_from_slice(p.bias.data());
    }
    gemm((b, n, m), (x.data(), n, 1), (p.weight.data(), 1, n), 1.0, (&mut out, m, 1));
    Ok((Tensor::from_parts(vec![b, m], out), LayerCache::Dense { input: x.clone() }))
}

/// Runs `net` on a batch. Returns the output and the intermediates needed by
/// [`backward`]. Pure in `(params, x)`.
pub fn forward(net: &Network, params: &ParamStore, x: &Tensor) -> Result<(Tensor, Cache)> {
    if x.shape().len() != net.input.len() + 1 || x.shape()[1..] != net.input[..] {
        let first = net.layers.first().map(|l| l.name.as_str()).unwrap_or("input");
        return Err(Error::shape(
            first,
            format!("input {:?} does not match per-sample shape {:?}", x.shape(), net.input),
        ));
    }
    let mut cur = x.clone();
    let mut entries = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        let (next, entry) = match l.kind {
            LayerKind::Conv { kernel, stride, .. } => conv_forward(l, params.require(&l.name)?, &cur, kernel, stride)?,
            LayerKind::Dense { .. } => dense_forward(l, params.require(&l.name)?, &cur)?,
            LayerKind::Relu => {
                let mask: Vec<bool> = cur.data().iter().map(|&v| v > 0.0).collect();
                let mut y = cur;
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                (y, LayerCache::Relu { mask })
            }
            LayerKind::Sigmoid => {
                let mut y = cur;
                y.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
                let out = y.data().to_vec();
                (y, LayerCache::Sigmoid { out })
            }
            LayerKind::Flatten => {
                let in_shape = cur.shape().to_vec();
                let b = in_shape[0];
                let n = cur.len() / b;
                (cur.reshape(vec![b, n])?, LayerCache::Flatten { in_shape })
            }
        };
        entries.push(entry);
        cur = next;
    }
    Ok((
        cur,
        Cache {
            stamp: params.stamp(),
            layers: net.layers.iter().map(|l| l.name.clone()).collect(),
            entries,
        },
    ))
}

/// Inference-only forward pass that skips building a cache.
pub fn predict(net: &Network, params: &ParamStore, x: &Tensor) -> Result<Tensor> {
    forward(net, params, x).map(|(y, _)| y)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameter gradients for the loss whose gradient with respect to the
/// network output is `grad_out`, plus the gradient with respect to the input.
/// Tied layers receive the sum of their contributions.
pub fn backward(net: &Network, params: &ParamStore, cache: &Cache, grad_out: &Tensor) -> Result<(ParamStore, Tensor)> {
    if cache.stamp != params.stamp() {
        return Err(Error::StaleCache(
            "parameters changed since the forward pass".into(),
        ));
    }
    if cache.layers.len() != net.layers.len() || cache.layers.iter().zip(&net.layers).any(|(a, l)| *a != l.name) {
        return Err(Error::StaleCache("cache was produced by a different network".into()));
    }
    let mut grads = ParamStore::new();
    let mut g = grad_out.clone();
    for (l, entry) in net.layers.iter().zip(&cache.entries).rev() {
        g = match (entry, &l.kind) {
            (LayerCache::Conv { cols, in_shape, out_hw }, LayerKind::Conv { kernel, stride, .. }) => {
                let p = params.require(&l.name)?;
                let [b, c, _, _] = *in_shape;
                let o = p.weight.shape()[0];
                let pix = out_hw.0 * out_hw.1;
                let rows = c * kernel * kernel;
                if g.len() != b * o * pix {
                    return Err(Error::shape(&l.name, "upstream gradient has the wrong size"));
                }
                let mut dw = vec![0.0; o * rows];
                let mut db = vec![0.0; o];
                let mut dcols = vec![0.0; b * rows * pix];
                for bi in 0..b {
                    let gb = &g.data()[bi * o * pix..(bi + 1) * o * pix];
                    for (oi, chunk) in gb.chunks(pix).enumerate() {
                        db[oi] += chunk.iter().sum::<f64>();
                    }
                    let cb = &cols[bi * rows * pix..(bi + 1) * rows * pix];
                    gemm((o, pix, rows), (gb, pix, 1), (cb, 1, pix), 1.0, (&mut dw, rows, 1));
                    gemm(
                        (rows, o, pix),
                        (p.weight.data(), 1, rows),
                        (gb, pix, 1),
                        0.0,
                        (&mut dcols[bi * rows * pix..(bi + 1) * rows * pix], pix, 1),
                    );
                }
                add_grad(&mut grads, &l.name, p, dw, db)?;
                let dx = col2im(&dcols, *in_shape, *kernel, *stride, *out_hw);
                Tensor::from_parts(in_shape.to_vec(), dx)
            }
            (LayerCache::Dense { input }, LayerKind::Dense { .. }) => {
                let p = params.require(&l.name)?;
                let (m, n) = (p.weight.shape()[0], p.weight.shape()[1]);
                let b = input.batch();
                if g.len() != b * m {
                    return Err(Error::shape(&l.name, "upstream gradient has the wrong size"));
                }
                let mut dw = vec![0.0; m * n];
                gemm((m, b, n), (g.data(), 1, m), (input.data(), n, 1), 0.0, (&mut dw, n, 1));
                let mut db = vec![0.0; m];
                for row in g.data().chunks(m) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                let mut dx = vec![0.0; b * n];
                gemm((b, m, n), (g.data(), m, 1), (p.weight.data(), n, 1), 0.0, (&mut dx, n, 1));
                add_grad(&mut grads, &l.name, p, dw, db)?;
                Tensor::from_parts(vec![b, n], dx)
            }
            (LayerCache::Relu { mask }, LayerKind::Relu) => {
                let mut g = g;
                for (v, &m) in g.data_mut().iter_mut().zip(mask) {
                    if !m {
                        *v = 0.0;
                    }
                }
                g
            }
            (LayerCache::Sigmoid { out }, LayerKind::Sigmoid) => {
                let mut g = g;
                for (v, &y) in g.data_mut().iter_mut().zip(out) {
                    *v *= y * (1.0 - y);
                }
                g
            }
            (LayerCache::Flatten { in_shape }, LayerKind::Flatten) => g.reshape(in_shape.clone())?,
            _ => return Err(Error::StaleCache(format!("cache entry does not match layer `{}`", l.name))),
        };
    }
    Ok((grads, g))
}

fn add_grad(grads: &mut ParamStore, name: &str, p: &Param, dw: Vec<f64>, db: Vec<f64>) -> Result<()> {
    let mut one = ParamStore::new();
    one.insert(
        name,
        Param {
            weight: Tensor::from_parts(p.weight.shape().to_vec(), dw),
            bias: Tensor::from_parts(p.bias.shape().to_vec(), db),
        },
    );
    grads.accumulate(&one)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_output_size() {
        let l = LayerSpec::conv("c", 4, 3, 2, 0);
        assert_eq!(l.output_shape(&[1, 32, 32]).unwrap(), vec![4, 15, 15]);
    }

    #[test]
    fn identity_dense() {
        let net = Network::new(vec![3], vec![LayerSpec::dense("d", 3, 0)]);
        let mut ps = ParamStore::new();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        ps.insert(
            "d",
            Param {
                weight: Tensor::new(vec![3, 3], eye).unwrap(),
                bias: Tensor::zeros(&[3]),
            },
        );
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
        assert_eq!(predict(&net, &ps, &x).unwrap(), x);
    }

    #[test]
    fn relu_definition() {
        let net = Network::new(vec![3], vec![LayerSpec::relu()]);
        let x = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = predict(&net, &ParamStore::new(), &x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn conv_matches_direct_loop() {
        let net = Network::new(vec![2, 7, 6], vec![LayerSpec::conv("c", 3, 3, 2, 4)]);
        let mut ps = ParamStore::new();
        net.init_params(&mut ps).unwrap();
        let mut r = rng::rng(1);
        let x = Tensor::new(vec![2, 2, 7, 6], (0..168).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = predict(&net, &ps, &x).unwrap();
        assert_eq!(y.shape(), &[2, 3, 3, 2]);
        let w = ps.get("c").unwrap().weight.data();
        for b in 0..2 {
            for o in 0..3 {
                for oy in 0..3 {
                    for ox in 0..2 {
                        let mut acc = 0.0;
                        for c in 0..2 {
                            for ki in 0..3 {
                                for kj in 0..3 {
                                    acc += w[((o * 2 + c) * 3 + ki) * 3 + kj]
                                        * x.data()[((b * 2 + c) * 7 + oy * 2 + ki) * 6 + ox * 2 + kj];
                                }
                            }
                        }
                        let got = y.data()[((b * 3 + o) * 3 + oy) * 2 + ox];
                        assert!((got - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let net = Network::new(vec![4], vec![LayerSpec::dense("first", 3, 0), LayerSpec::dense("second", 2, 0)]);
        let mut ps = ParamStore::new();
        net.init_params(&mut ps).unwrap();
        ps.insert(
            "second",
            Param {
                weight: Tensor::zeros(&[2, 5]),
                bias: Tensor::zeros(&[2]),
            },
        );
        let x = Tensor::zeros(&[1, 4]);
        let err = forward(&net, &ps, &x).err().unwrap().to_string();
        assert!(err.contains("second"), "{err}");
        let bad = Tensor::zeros(&[1, 5]);
        assert!(forward(&net, &ps, &bad).err().unwrap().to_string().contains("first"));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let net = Network::new(vec![2], vec![LayerSpec::dense("d", 1, 0)]);
        let mut ps = ParamStore::new();
        net.init_params(&mut ps).unwrap();
        let (y, cache) = forward(&net, &ps, &Tensor::zeros(&[1, 2])).unwrap();
        assert!(backward(&net, &ps, &cache, &y).is_ok());
        ps.get_mut("d").unwrap().bias.data_mut()[0] = 1.0;
        assert_eq!(backward(&net, &ps, &cache, &y).err().unwrap().kind(), "stale_cache");
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let net = Network::new(
            vec![1, 8, 8],
            vec![
                LayerSpec::conv("c", 2, 3, 1, 1),
                LayerSpec::relu(),
                LayerSpec::flatten(),
                LayerSpec::dense("d", 3, 2),
                LayerSpec::sigmoid(),
            ],
        );
        let mut ps = ParamStore::new();
        net.init_params(&mut ps).unwrap();
        let x = Tensor::new(vec![2, 1, 8, 8], (0..128).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let (y, cache) = forward(&net, &ps, &x).unwrap();
        let (g, _) = backward(&net, &ps, &cache, &Tensor::zeros(y.shape())).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(g.names(), ps.names());
    }
}
