//! Convolution, transposed convolution and group normalization as tape ops.
//!
//! Tensor layout is [batch, channel, height, width] throughout. Convolutions
//! use 3x3 kernels with one pixel of zero padding, so stride 1 preserves the
//! spatial size and stride 2 exactly halves even sizes.

use ndarray::{Array2, ArrayD, ArrayViewD, Axis, IxDyn};

use crate::tape::{Tape, Var};

const K: usize = 3;
const PAD: usize = 1;
const GN_EPS: f64 = 1e-5;

fn out_size(n: usize, stride: usize) -> usize {
    (n + 2 * PAD - K) / stride + 1
}

/// Unfold one sample [C,H,W] into a [C*9, Ho*Wo] patch matrix.
fn im2col(x: &ArrayViewD<f64>, stride: usize) -> Array2<f64> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ho, wo) = (out_size(h, stride), out_size(w, stride));
    let mut col = Array2::zeros((c * K * K, ho * wo));
    for ci in 0..c {
        for ki in 0..K {
            for kj in 0..K {
                let row = (ci * K + ki) * K + kj;
                for oi in 0..ho {
                    let ii = oi * stride + ki;
                    if ii < PAD || ii >= h + PAD {
                        continue;
                    }
                    for oj in 0..wo {
                        let jj = oj * stride + kj;
                        if jj < PAD || jj >= w + PAD {
                            continue;
                        }
                        col[[row, oi * wo + oj]] = x[[ci, ii - PAD, jj - PAD]];
                    }
                }
            }
        }
    }
    col
}

/// Fold a patch-matrix gradient back onto the input sample (adjoint of im2col).
fn col2im(col: &Array2<f64>, c: usize, h: usize, w: usize, stride: usize) -> ArrayD<f64> {
    let (ho, wo) = (out_size(h, stride), out_size(w, stride));
    let mut x = ArrayD::zeros(IxDyn(&[c, h, w]));
    for ci in 0..c {
        for ki in 0..K {
            for kj in 0..K {
                let row = (ci * K + ki) * K + kj;
                for oi in 0..ho {
                    let ii = oi * stride + ki;
                    if ii < PAD || ii >= h + PAD {
                        continue;
                    }
                    for oj in 0..wo {
                        let jj = oj * stride + kj;
                        if jj < PAD || jj >= w + PAD {
                            continue;
                        }
                        x[[ci, ii - PAD, jj - PAD]] += col[[row, oi * wo + oj]];
                    }
                }
            }
        }
    }
    x
}

impl Tape {
    /// 3x3 convolution, padding 1: x [B,C,H,W], w [O,C,3,3], b [O].
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Var {
        assert!(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
        let vx = self.arc(x);
        let vw = self.arc(w);
        let vb = self.arc(b);
        let (bsz, cin, h, wd) = dims4(&vx, "conv2d input");
        let ws = vw.shape();
        assert_eq!(ws[1..], [cin, K, K], "conv2d: kernel shape");
        let cout = ws[0];
        assert_eq!(vb.shape(), &[cout], "conv2d: bias shape");
        let (ho, wo) = (out_size(h, stride), out_size(wd, stride));

        let wmat = vw
            .view()
            .into_shape((cout, cin * K * K))
            .expect("conv2d: kernel reshape")
            .to_owned();
        let mut out = ArrayD::zeros(IxDyn(&[bsz, cout, ho, wo]));
        let mut cols = Vec::with_capacity(bsz);
        for bi in 0..bsz {
            let col = im2col(&vx.index_axis(Axis(0), bi), stride);
            let o = wmat.dot(&col); // [O, Ho*Wo]
            for oc in 0..cout {
                for oi in 0..ho {
                    for oj in 0..wo {
                        out[[bi, oc, oi, oj]] = o[[oc, oi * wo + oj]] + vb[[oc]];
                    }
                }
            }
            cols.push(col);
        }

        self.push(
            out,
            vec![x.0, w.0, b.0],
            Some(Box::new(move |g| {
                let mut gx = ArrayD::zeros(IxDyn(&[bsz, cin, h, wd]));
                let mut gw = Array2::<f64>::zeros((cout, cin * K * K));
                let mut gb = ArrayD::zeros(IxDyn(&[cout]));
                for bi in 0..bsz {
                    let mut gmat = Array2::<f64>::zeros((cout, ho * wo));
                    for oc in 0..cout {
                        for oi in 0..ho {
                            for oj in 0..wo {
                                let v = g[[bi, oc, oi, oj]];
                                gmat[[oc, oi * wo + oj]] = v;
                                gb[[oc]] += v;
                            }
                        }
                    }
                    gw += &gmat.dot(&cols[bi].t());
                    let gcol = wmat.t().dot(&gmat);
                    gx.index_axis_mut(Axis(0), bi)
                        .assign(&col2im(&gcol, cin, h, wd, stride));
                }
                let gw = gw.into_shape(IxDyn(&[cout, cin, K, K])).unwrap();
                vec![gx, gw, gb]
            })),
            false,
        )
    }

    /// 2x2 stride-2 transposed convolution (exact doubling of the spatial
    /// size): x [B,C,H,W], w [C,O,2,2], b [O] -> [B,O,2H,2W].
    pub fn conv_transpose2(&mut self, x: Var, w: Var, b: Var) -> Var {
        let vx = self.arc(x);
        let vw = self.arc(w);
        let vb = self.arc(b);
        let (bsz, cin, h, wd) = dims4(&vx, "conv_transpose2 input");
        let ws = vw.shape();
        assert_eq!(ws[0], cin, "conv_transpose2: kernel in-channels");
        assert_eq!(ws[2..], [2, 2], "conv_transpose2: kernel size");
        let cout = ws[1];
        assert_eq!(vb.shape(), &[cout], "conv_transpose2: bias shape");

        let mut out = ArrayD::from_elem(IxDyn(&[bsz, cout, 2 * h, 2 * wd]), 0.0);
        for bi in 0..bsz {
            for oc in 0..cout {
                for i in 0..h {
                    for j in 0..wd {
                        for ci in 0..cin {
                            let xv = vx[[bi, ci, i, j]];
                            for di in 0..2 {
                                for dj in 0..2 {
                                    out[[bi, oc, 2 * i + di, 2 * j + dj]] +=
                                        xv * vw[[ci, oc, di, dj]];
                                }
                            }
                        }
                    }
                }
                out.index_axis_mut(Axis(0), bi)
                    .index_axis_mut(Axis(0), oc)
                    .mapv_inplace(|v| v + vb[[oc]]);
            }
        }

        self.push(
            out,
            vec![x.0, w.0, b.0],
            Some(Box::new(move |g| {
                let mut gx = ArrayD::zeros(IxDyn(&[bsz, cin, h, wd]));
                let mut gw = ArrayD::zeros(IxDyn(&[cin, cout, 2, 2]));
                let mut gb = ArrayD::zeros(IxDyn(&[cout]));
                for bi in 0..bsz {
                    for oc in 0..cout {
                        gb[[oc]] += g.index_axis(Axis(0), bi).index_axis(Axis(0), oc).sum();
                        for i in 0..h {
                            for j in 0..wd {
                                for di in 0..2 {
                                    for dj in 0..2 {
                                        let gv = g[[bi, oc, 2 * i + di, 2 * j + dj]];
                                        for ci in 0..cin {
                                            gx[[bi, ci, i, j]] += gv * vw[[ci, oc, di, dj]];
                                            gw[[ci, oc, di, dj]] += gv * vx[[bi, ci, i, j]];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                vec![gx, gw, gb]
            })),
            false,
        )
    }

    /// Group normalization over [B,C,H,W] with per-channel scale and shift.
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize) -> Var {
        let vx = self.arc(x);
        let vgamma = self.arc(gamma);
        let (bsz, c, h, w) = dims4(&vx, "group_norm input");
        assert!(groups >= 1 && c % groups == 0, "group_norm: {c} channels in {groups} groups");
        assert_eq!(self.value(gamma).shape(), &[c], "group_norm: gamma shape");
        assert_eq!(self.value(beta).shape(), &[c], "group_norm: beta shape");
        let vbeta = self.arc(beta);
        let cg = c / groups;
        let count = (cg * h * w) as f64;

        let mut xhat = ArrayD::zeros(IxDyn(&[bsz, c, h, w]));
        let mut sigma = vec![0.0; bsz * groups];
        for bi in 0..bsz {
            for gi in 0..groups {
                let chans = gi * cg..(gi + 1) * cg;
                let mut mean = 0.0;
                for ci in chans.clone() {
                    mean += vx.index_axis(Axis(0), bi).index_axis(Axis(0), ci).sum();
                }
                mean /= count;
                let mut var = 0.0;
                for ci in chans.clone() {
                    for i in 0..h {
                        for j in 0..w {
                            let d = vx[[bi, ci, i, j]] - mean;
                            var += d * d;
                        }
                    }
                }
                var /= count;
                let s = (var + GN_EPS).sqrt();
                sigma[bi * groups + gi] = s;
                for ci in chans {
                    for i in 0..h {
                        for j in 0..w {
                            xhat[[bi, ci, i, j]] = (vx[[bi, ci, i, j]] - mean) / s;
                        }
                    }
                }
            }
        }

        let mut out = ArrayD::zeros(IxDyn(&[bsz, c, h, w]));
        for bi in 0..bsz {
            for ci in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        out[[bi, ci, i, j]] = vgamma[[ci]] * xhat[[bi, ci, i, j]] + vbeta[[ci]];
                    }
                }
            }
        }
        self.push(
            out,
            vec![x.0, gamma.0, beta.0],
            Some(Box::new(move |g| {
                let mut gx = ArrayD::zeros(IxDyn(&[bsz, c, h, w]));
                let mut ggamma = ArrayD::zeros(IxDyn(&[c]));
                let mut gbeta = ArrayD::zeros(IxDyn(&[c]));
                for bi in 0..bsz {
                    for ci in 0..c {
                        for i in 0..h {
                            for j in 0..w {
                                let gv = g[[bi, ci, i, j]];
                                ggamma[[ci]] += gv * xhat[[bi, ci, i, j]];
                                gbeta[[ci]] += gv;
                            }
                        }
                    }
                    for gi in 0..groups {
                        let chans = gi * cg..(gi + 1) * cg;
                        // dxhat = g * gamma; dx = (dxhat - mean(dxhat)
                        //   - xhat * mean(dxhat * xhat)) / sigma
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for ci in chans.clone() {
                            for i in 0..h {
                                for j in 0..w {
                                    let dh = g[[bi, ci, i, j]] * vgamma[[ci]];
                                    m1 += dh;
                                    m2 += dh * xhat[[bi, ci, i, j]];
                                }
                            }
                        }
                        m1 /= count;
                        m2 /= count;
                        let s = sigma[bi * groups + gi];
                        for ci in chans {
                            for i in 0..h {
                                for j in 0..w {
                                    let dh = g[[bi, ci, i, j]] * vgamma[[ci]];
                                    gx[[bi, ci, i, j]] =
                                        (dh - m1 - xhat[[bi, ci, i, j]] * m2) / s;
                                }
                            }
                        }
                    }
                }
                vec![gx, ggamma, gbeta]
            })),
            false,
        )
    }
}

fn dims4(a: &ArrayD<f64>, what: &str) -> (usize, usize, usize, usize) {
    assert_eq!(a.ndim(), 4, "{what}: expected [B,C,H,W]");
    let s = a.shape();
    (s[0], s[1], s[2], s[3])
}
