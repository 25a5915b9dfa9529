//! Dynamic reverse-mode autodiff tape.
//!
//! Every operation appends a node holding its value and a closure that maps
//! the upstream gradient to gradients with respect to the parents. `backward`
//! walks the tape once in reverse, accumulating gradients for every node that
//! (transitively) depends on a differentiable leaf.

use std::sync::Arc;

use ndarray::{ArrayD, Axis, IxDyn};

use crate::error::NnError;

pub(crate) type GradFn = Box<dyn Fn(&ArrayD<f64>) -> Vec<ArrayD<f64>>>;

struct Node {
    value: Arc<ArrayD<f64>>,
    parents: Vec<usize>,
    grad_fn: Option<GradFn>,
    needs_grad: bool,
}

/// Handle into the tape. Cheap to copy; only valid for the tape that made it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Grads(Vec<Option<ArrayD<f64>>>);

impl Grads {
    /// Gradient of the loss with respect to `v`, if `v` required one.
    pub fn get(&self, v: Var) -> Option<&ArrayD<f64>> {
        self.0.get(v.0).and_then(|g| g.as_ref())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(
        &mut self,
        value: ArrayD<f64>,
        parents: Vec<usize>,
        grad_fn: Option<GradFn>,
        leaf_grad: bool,
    ) -> Var {
        let needs_grad = leaf_grad || parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.nodes.push(Node { value: Arc::new(value), parents, grad_fn, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable input (parameter or input we want gradients for).
    pub fn leaf(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, vec![], None, true)
    }

    /// Non-differentiable input; gradients never flow into it.
    pub fn constant(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, vec![], None, false)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(ArrayD::from_elem(IxDyn(&[1]), v))
    }

    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    pub(crate) fn arc(&self, v: Var) -> Arc<ArrayD<f64>> {
        Arc::clone(&self.nodes[v.0].value)
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let a = self.value(v);
        assert_eq!(a.len(), 1, "scalar_value on a {}-element array", a.len());
        *a.iter().next().unwrap()
    }

    fn assert_same_shape(&self, a: Var, b: Var, op: &str) {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "{op}: shape mismatch");
    }

    // ---- elementwise --------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "add");
        let v = self.value(a) + self.value(b);
        self.push(v, vec![a.0, b.0], Some(Box::new(|g| vec![g.clone(), g.clone()])), false)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "sub");
        let v = self.value(a) - self.value(b);
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(|g| vec![g.clone(), g.mapv(|x| -x)])),
            false,
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "mul");
        let (va, vb) = (self.arc(a), self.arc(b));
        let v = &*va * &*vb;
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| vec![g * &*vb, g * &*va])),
            false,
        )
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "div");
        let (va, vb) = (self.arc(a), self.arc(b));
        let v = &*va / &*vb;
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                vec![g / &*vb, -(g * &*va) / (&*vb * &*vb)]
            })),
            false,
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).mapv(|x| c * x);
        self.push(v, vec![a.0], Some(Box::new(move |g| vec![g.mapv(|x| c * x)])), false)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).mapv(|x| x + c);
        self.push(v, vec![a.0], Some(Box::new(|g| vec![g.clone()])), false)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        let out = Arc::new(v);
        let cap = Arc::clone(&out);
        self.push(
            (*out).clone(),
            vec![a.0],
            Some(Box::new(move |g| vec![g * &*cap])),
            false,
        )
    }

    pub fn expm1(&mut self, a: Var) -> Var {
        let va = self.arc(a);
        let v = va.mapv(f64::exp_m1);
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| vec![g * &va.mapv(f64::exp)])),
            false,
        )
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.arc(a);
        let v = va.mapv(f64::ln);
        self.push(v, vec![a.0], Some(Box::new(move |g| vec![g / &*va])), false)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let va = self.arc(a);
        let v = va.mapv(|x| x * sigmoid(x));
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                vec![g * &va.mapv(|x| {
                    let s = sigmoid(x);
                    s * (1.0 + x * (1.0 - s))
                })]
            })),
            false,
        )
    }

    // ---- reductions ---------------------------------------------------

    pub fn sum(&mut self, a: Var) -> Var {
        let shape = self.value(a).raw_dim();
        let v = ArrayD::from_elem(IxDyn(&[1]), self.value(a).sum());
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                vec![ArrayD::from_elem(shape.clone(), g[[0]])]
            })),
            false,
        )
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Repeat a [1, ...] tensor n times along the batch axis; gradients from
    /// all copies are summed back.
    pub fn repeat_batch(&mut self, a: Var, n: usize) -> Var {
        let va = self.value(a);
        assert!(va.ndim() >= 2 && va.shape()[0] == 1, "repeat_batch: need batch size 1");
        let mut shape = va.shape().to_vec();
        shape[0] = n;
        let mut v = ArrayD::zeros(IxDyn(&shape));
        for mut sub in v.axis_iter_mut(Axis(0)) {
            sub.assign(&va.index_axis(Axis(0), 0));
        }
        let one = va.raw_dim();
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                let mut ga = ArrayD::zeros(one.clone());
                {
                    let mut acc = ga.index_axis_mut(Axis(0), 0);
                    for sub in g.axis_iter(Axis(0)) {
                        acc += &sub;
                    }
                }
                vec![ga]
            })),
            false,
        )
    }

    /// Mean over every axis but the first: [B, ...] -> [B].
    pub fn mean_per_batch(&mut self, a: Var) -> Var {
        let va = self.value(a);
        assert!(va.ndim() >= 2, "mean_per_batch: need a batch axis plus data axes");
        let bsz = va.shape()[0];
        let count = va.len() / bsz;
        let shape = va.raw_dim();
        let mut v = ArrayD::zeros(IxDyn(&[bsz]));
        for (bi, sub) in va.axis_iter(Axis(0)).enumerate() {
            v[[bi]] = sub.sum() / count as f64;
        }
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                let mut gx = ArrayD::zeros(shape.clone());
                for (bi, mut sub) in gx.axis_iter_mut(Axis(0)).enumerate() {
                    sub.fill(g[[bi]] / count as f64);
                }
                vec![gx]
            })),
            false,
        )
    }

    /// Mean squared error between two same-shape tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let sq = self.mul(d, d);
        self.mean(sq)
    }

    // ---- linear algebra ----------------------------------------------

    /// Matrix product of 2-D tensors: [m,k] x [k,n] -> [m,n].
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let va = self.arc(a);
        let vb = self.arc(b);
        let a2 = va.view().into_dimensionality::<ndarray::Ix2>().expect("matmul: lhs not 2-D");
        let b2 = vb.view().into_dimensionality::<ndarray::Ix2>().expect("matmul: rhs not 2-D");
        assert_eq!(a2.ncols(), b2.nrows(), "matmul: inner dims");
        let v = a2.dot(&b2).into_dyn();
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let a2 = va.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let b2 = vb.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                vec![g2.dot(&b2.t()).into_dyn(), a2.t().dot(&g2).into_dyn()]
            })),
            false,
        )
    }

    /// Add a row vector [n] to every row of a [m,n] matrix.
    pub fn add_bias_row(&mut self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.ndim(), 2, "add_bias_row: lhs not 2-D");
        assert_eq!(vb.shape(), &[va.shape()[1]], "add_bias_row: bias shape");
        let mut v = va.clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            row += vb;
        }
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(|g| vec![g.clone(), g.sum_axis(Axis(0))])),
            false,
        )
    }

    /// Dense layer: x [m,in] * w [in,out] + b [out].
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Var {
        let p = self.matmul(x, w);
        self.add_bias_row(p, b)
    }

    // ---- tensor plumbing ----------------------------------------------

    /// Reshape to a new shape with the same element count.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let old = self.value(a).raw_dim();
        let v = self
            .value(a)
            .clone()
            .into_shape(IxDyn(shape))
            .expect("reshape: element count mismatch");
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| vec![g.clone().into_shape(old.clone()).unwrap()])),
            false,
        )
    }


    /// Concatenate two [B,C,H,W] tensors along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.ndim(), 4, "concat_channels: not 4-D");
        assert_eq!(vb.ndim(), 4, "concat_channels: not 4-D");
        let ca = va.shape()[1];
        let v = ndarray::concatenate(Axis(1), &[va.view(), vb.view()]).expect("concat shapes");
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                let ga = g.slice_axis(Axis(1), ndarray::Slice::from(0..ca)).to_owned();
                let gb = g.slice_axis(Axis(1), ndarray::Slice::from(ca..)).to_owned();
                vec![ga, gb]
            })),
            false,
        )
    }

    /// Add a per-sample channel bias [B,C] to a [B,C,H,W] tensor.
    /// Multiply a [B,C,H,W] tensor by a per-sample per-channel scale [B,C].
    pub fn mul_channel_scale(&mut self, x: Var, scale: Var) -> Var {
        let vx = self.arc(x);
        let vs = self.arc(scale);
        assert_eq!(vx.ndim(), 4, "mul_channel_scale: not 4-D");
        assert_eq!(vs.shape(), &vx.shape()[..2], "mul_channel_scale: scale shape");
        let mut v = (*vx).clone();
        let (bsz, ch) = (vx.shape()[0], vx.shape()[1]);
        for bi in 0..bsz {
            for c in 0..ch {
                let w = vs[[bi, c]];
                v.index_axis_mut(Axis(0), bi).index_axis_mut(Axis(0), c).mapv_inplace(|x| x * w);
            }
        }
        self.push(
            v,
            vec![x.0, scale.0],
            Some(Box::new(move |g| {
                let mut gx = g.clone();
                let mut gs = ArrayD::zeros(IxDyn(&[bsz, ch]));
                for bi in 0..bsz {
                    for c in 0..ch {
                        let gslice = g.index_axis(Axis(0), bi);
                        let gslice = gslice.index_axis(Axis(0), c);
                        let xslice = vx.index_axis(Axis(0), bi);
                        let xslice = xslice.index_axis(Axis(0), c);
                        gs[[bi, c]] = (&gslice * &xslice).sum();
                        gx.index_axis_mut(Axis(0), bi)
                            .index_axis_mut(Axis(0), c)
                            .mapv_inplace(|v| v * vs[[bi, c]]);
                    }
                }
                vec![gx, gs]
            })),
            false,
        )
    }

    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Var {
        let vx = self.value(x);
        let vb = self.value(bias);
        assert_eq!(vx.ndim(), 4, "add_channel_bias: not 4-D");
        assert_eq!(vb.shape(), &vx.shape()[..2], "add_channel_bias: bias shape");
        let mut v = vx.clone();
        let (bsz, ch) = (vx.shape()[0], vx.shape()[1]);
        for bi in 0..bsz {
            for c in 0..ch {
                let w = vb[[bi, c]];
                v.index_axis_mut(Axis(0), bi).index_axis_mut(Axis(0), c).mapv_inplace(|x| x + w);
            }
        }
        self.push(
            v,
            vec![x.0, bias.0],
            Some(Box::new(move |g| {
                let mut gb = ArrayD::zeros(IxDyn(&[bsz, ch]));
                for bi in 0..bsz {
                    for c in 0..ch {
                        gb[[bi, c]] =
                            g.index_axis(Axis(0), bi).index_axis(Axis(0), c).sum();
                    }
                }
                vec![g.clone(), gb]
            })),
            false,
        )
    }

    // ---- backward ------------------------------------------------------

    /// Reverse pass from a scalar loss. Gradients are retained only for
    /// leaves; intermediate gradients are freed as soon as they are consumed.
    pub fn backward(&self, loss: Var) -> Result<Grads, NnError> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(NnError::NonScalarLoss { len: lv.len() });
        }
        if !self.nodes[loss.0].needs_grad {
            return Ok(Grads(vec![None; self.nodes.len()]));
        }
        let mut grads: Vec<Option<ArrayD<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(ArrayD::ones(lv.raw_dim()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.grad_fn {
                Some(f) => {
                    let parent_grads = f(&g);
                    assert_eq!(parent_grads.len(), node.parents.len());
                    for (&p, gp) in node.parents.iter().zip(parent_grads) {
                        if !self.nodes[p].needs_grad {
                            continue;
                        }
                        debug_assert_eq!(gp.shape(), self.nodes[p].value.shape());
                        match &mut grads[p] {
                            Some(acc) => *acc += &gp,
                            slot => *slot = Some(gp),
                        }
                    }
                }
                // leaf: keep the accumulated gradient
                None => grads[i] = Some(g),
            }
        }
        Ok(Grads(grads))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
