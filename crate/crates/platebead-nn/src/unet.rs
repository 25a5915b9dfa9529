//! Small UNet template shared by the field surrogate and the flow model:
//! two downsampling stages, a bottleneck, two upsampling stages with skip
//! connections, group normalization, SiLU activations and an embedding
//! injected as a per-channel scale and shift in every block.

use serde::{Deserialize, Serialize};

use crate::params::{BoundParams, Initializer, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// channel width of the first stage; stages use base, 2*base, 4*base
    pub base: usize,
    /// group-normalization group count
    pub groups: usize,
    /// embedding width fed to the conditioning MLP
    pub emb_dim: usize,
}

impl UNetConfig {
    pub fn new(in_channels: usize, out_channels: usize, base: usize) -> Self {
        Self { in_channels, out_channels, base, groups: 4, emb_dim: 32 }
    }
}

pub struct UNet {
    pub cfg: UNetConfig,
}

impl UNet {
    pub fn new(cfg: UNetConfig) -> Self {
        assert!(cfg.base % cfg.groups == 0, "base width not divisible by group count");
        assert!(cfg.emb_dim % 2 == 0, "embedding dim must be even");
        UNet { cfg }
    }

    /// JSON description stored alongside checkpoints.
    pub fn descriptor(&self) -> String {
        serde_json::json!({ "arch": "unet2", "config": self.cfg }).to_string()
    }

    pub fn from_descriptor(desc: &str) -> Result<Self, crate::error::NnError> {
        let v: serde_json::Value = serde_json::from_str(desc)
            .map_err(|e| crate::error::NnError::Checkpoint(format!("descriptor: {e}")))?;
        if v["arch"] != "unet2" {
            return Err(crate::error::NnError::Checkpoint(format!(
                "unexpected architecture {}",
                v["arch"]
            )));
        }
        let cfg: UNetConfig = serde_json::from_value(v["config"].clone())
            .map_err(|e| crate::error::NnError::Checkpoint(format!("descriptor: {e}")))?;
        Ok(UNet::new(cfg))
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let c = &self.cfg;
        let (b1, b2, b4, e) = (c.base, 2 * c.base, 4 * c.base, c.emb_dim);
        let mut init = Initializer::new(seed);
        let mut s = ParamStore::new();
        for fc in ["emb.fc1", "emb.fc2"] {
            s.insert(&format!("{fc}.w"), init.uniform(&[e, e], e));
            s.insert(&format!("{fc}.b"), init.zeros(&[e]));
        }
        let block = |s: &mut ParamStore, init: &mut Initializer, name: &str, cin: usize, cout| {
            // residual shortcut, a 3x3 conv where the channel count changes
            if cin != cout {
                s.insert(&format!("{name}.skip.w"), init.uniform(&[cout, cin, 3, 3], cin * 9));
                s.insert(&format!("{name}.skip.b"), init.zeros(&[cout]));
            }
            s.insert(&format!("{name}.conv1.w"), init.uniform(&[cout, cin, 3, 3], cin * 9));
            s.insert(&format!("{name}.conv1.b"), init.zeros(&[cout]));
            // conditioning heads: the scale head starts at zero (neutral gain)
            s.insert(&format!("{name}.emb_s.w"), init.zeros(&[e, cout]));
            s.insert(&format!("{name}.emb_s.b"), init.zeros(&[cout]));
            s.insert(&format!("{name}.emb.w"), init.uniform(&[e, cout], e));
            s.insert(&format!("{name}.emb.b"), init.zeros(&[cout]));
            s.insert(&format!("{name}.gn1.g"), init.ones(&[cout]));
            s.insert(&format!("{name}.gn1.b"), init.zeros(&[cout]));
            s.insert(&format!("{name}.conv2.w"), init.uniform(&[cout, cout, 3, 3], cout * 9));
            s.insert(&format!("{name}.conv2.b"), init.zeros(&[cout]));
            s.insert(&format!("{name}.gn2.g"), init.ones(&[cout]));
            s.insert(&format!("{name}.gn2.b"), init.zeros(&[cout]));
        };
        block(&mut s, &mut init, "enc0", c.in_channels, b1);
        s.insert("down1.w", init.uniform(&[b2, b1, 3, 3], b1 * 9));
        s.insert("down1.b", init.zeros(&[b2]));
        block(&mut s, &mut init, "enc1", b2, b2);
        s.insert("down2.w", init.uniform(&[b4, b2, 3, 3], b2 * 9));
        s.insert("down2.b", init.zeros(&[b4]));
        block(&mut s, &mut init, "bott", b4, b4);
        s.insert("up1.w", init.uniform(&[b4, b2, 2, 2], b4));
        s.insert("up1.b", init.zeros(&[b2]));
        block(&mut s, &mut init, "dec1", b4, b2);
        s.insert("up2.w", init.uniform(&[b2, b1, 2, 2], b2));
        s.insert("up2.b", init.zeros(&[b1]));
        block(&mut s, &mut init, "dec2", b2, b1);
        s.insert("head.w", init.uniform(&[c.out_channels, b1, 3, 3], b1 * 9));
        s.insert("head.b", init.zeros(&[c.out_channels]));
        s
    }

    fn block(&self, t: &mut Tape, p: &BoundParams, name: &str, x: Var, emb: Var, skip: bool) -> Var {
        let g = self.cfg.groups;
        let h = t.conv2d(x, p.var(&format!("{name}.conv1.w")), p.var(&format!("{name}.conv1.b")), 1);
        let h = t.group_norm(h, p.var(&format!("{name}.gn1.g")), p.var(&format!("{name}.gn1.b")), g);
        // feature-wise conditioning after normalization: h * (1 + s) + b
        let es = t.dense(emb, p.var(&format!("{name}.emb_s.w")), p.var(&format!("{name}.emb_s.b")));
        let es = t.add_const(es, 1.0);
        let eb = t.dense(emb, p.var(&format!("{name}.emb.w")), p.var(&format!("{name}.emb.b")));
        let h = t.mul_channel_scale(h, es);
        let h = t.add_channel_bias(h, eb);
        let h = t.silu(h);
        let h = t.conv2d(h, p.var(&format!("{name}.conv2.w")), p.var(&format!("{name}.conv2.b")), 1);
        let h = t.group_norm(h, p.var(&format!("{name}.gn2.g")), p.var(&format!("{name}.gn2.b")), g);
        let h = t.silu(h);
        let shortcut = if skip {
            t.conv2d(x, p.var(&format!("{name}.skip.w")), p.var(&format!("{name}.skip.b")), 1)
        } else {
            x
        };
        t.add(h, shortcut)
    }

    /// Forward pass: `x` is [B,in,H,W] with H and W divisible by 4, `emb_raw`
    /// is the [B,emb_dim] sinusoidal conditioning (see [`crate::embed`]).
    pub fn forward(&self, t: &mut Tape, p: &BoundParams, x: Var, emb_raw: Var) -> Var {
        let shape = t.value(x).shape().to_vec();
        assert_eq!(shape.len(), 4, "unet input must be [B,C,H,W]");
        assert_eq!(shape[1], self.cfg.in_channels, "unet input channels");
        assert!(shape[2] % 4 == 0 && shape[3] % 4 == 0, "unet spatial size must be divisible by 4");

        let e = t.dense(emb_raw, p.var("emb.fc1.w"), p.var("emb.fc1.b"));
        let e = t.silu(e);
        let e = t.dense(e, p.var("emb.fc2.w"), p.var("emb.fc2.b"));
        let e = t.silu(e);

        let b1 = self.cfg.base;
        let h0 = self.block(t, p, "enc0", x, e, self.cfg.in_channels != b1);
        let d1 = t.conv2d(h0, p.var("down1.w"), p.var("down1.b"), 2);
        let d1 = t.silu(d1);
        let h1 = self.block(t, p, "enc1", d1, e, false);
        let d2 = t.conv2d(h1, p.var("down2.w"), p.var("down2.b"), 2);
        let d2 = t.silu(d2);
        let h2 = self.block(t, p, "bott", d2, e, false);

        let u1 = t.conv_transpose2(h2, p.var("up1.w"), p.var("up1.b"));
        let c1 = t.concat_channels(u1, h1);
        let h3 = self.block(t, p, "dec1", c1, e, true);
        let u2 = t.conv_transpose2(h3, p.var("up2.w"), p.var("up2.b"));
        let c2 = t.concat_channels(u2, h0);
        let h4 = self.block(t, p, "dec2", c2, e, true);
        t.conv2d(h4, p.var("head.w"), p.var("head.b"), 1)
    }
}
