//! The full Tri-Former classifier: stem, three downsampled ViT stages,
//! global average pooling, and a linear head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernels::Padding;
use crate::net::block::{block_forward, Block, BlockVars, LN_EPS};
use crate::net::config::TriFormerConfig;
use crate::scalar::Scalar;
use crate::tape::{Grads, Tape, Var};
use crate::tensor::{numel_of, Tensor};

/// Registers a tensor as a trainable param or a frozen leaf.
pub(crate) fn reg<T: Scalar>(tape: &mut Tape<T>, t: &Tensor<T>, trainable: bool) -> Result<Var> {
    if trainable {
        tape.param(t)
    } else {
        tape.leaf(t)
    }
}

/// Samples a normal(0, std) tensor; draws happen in f64 so that f32 and f64
/// models initialized from the same seed agree.
pub(crate) fn normal_tensor<T: Scalar>(
    shape: Vec<usize>,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<T>> {
    let dist = Normal::new(0.0, std).map_err(|e| Error::config(format!("bad init std: {e}")))?;
    let data: Vec<T> = (0..numel_of(&shape)).map(|_| T::lit(dist.sample(rng))).collect();
    Tensor::from_vec(shape, data)
}

/// One ViT stage: a stride-2 downsample conv followed by its blocks.
#[derive(Debug, Clone)]
pub struct Stage<T: Scalar> {
    /// `[2,2,2, C_in, C_out]` downsample kernel.
    pub down: Tensor<T>,
    pub blocks: Vec<Block<T>>,
}

#[derive(Debug, Clone)]
pub struct StageVars {
    pub down: Var,
    pub blocks: Vec<BlockVars>,
}

/// A Tri-Former model instance; all parameters are named, dense tensors.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: TriFormerConfig,
    /// Spectrum compression `[1,1,3, 1, stem_width]`.
    pub stem_compress: Tensor<T>,
    /// Stem conv `[3,3,3, stem_width, stem_width]`.
    pub stem_conv: Tensor<T>,
    pub stem_gamma: Tensor<T>,
    pub stem_beta: Tensor<T>,
    pub stages: Vec<Stage<T>>,
    /// Classifier `[feature_width, num_classes]` plus bias; zero-initialized.
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

/// Tape handles for every parameter of a bound model.
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub stem_compress: Var,
    pub stem_conv: Var,
    pub stem_gamma: Var,
    pub stem_beta: Var,
    pub stages: Vec<StageVars>,
    pub head_w: Var,
    pub head_b: Var,
}

/// Boundary features captured during a forward pass: the stem output and
/// each stage's output (after its blocks).
#[derive(Debug, Clone)]
pub struct FeatureTaps {
    pub stem: Var,
    pub stages: Vec<Var>,
}

impl FeatureTaps {
    /// The deepest feature map (stage outputs fall back to the stem).
    pub fn last(&self) -> Var {
        *self.stages.last().unwrap_or(&self.stem)
    }
}

/// Hook applied at each injection boundary: called with the boundary index
/// (0 = stem output, k = input of stage k after its downsample) and the
/// current activation, returning the activation to continue with.
pub type InjectHook<'a, T> = &'a mut dyn FnMut(&mut Tape<T>, usize, Var) -> Result<Var>;

impl<T: Scalar> Model<T> {
    /// Builds a freshly initialized model. Initialization draws happen in a
    /// fixed traversal order from a seeded generator.
    pub fn init(config: TriFormerConfig, seed: u64) -> Result<Self> {
        let config = config.normalize()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = config.stem_width;

        let stem_compress = normal_tensor(vec![1, 1, 3, 1, w0], (2.0 / 3.0f64).sqrt(), &mut rng)?;
        let stem_conv =
            normal_tensor(vec![3, 3, 3, w0, w0], (2.0 / (27.0 * w0 as f64)).sqrt(), &mut rng)?;

        let mut stages = Vec::new();
        for (s, &depth) in config.stage_depths.iter().enumerate() {
            let c_in = config.stage_widths[s];
            let c_out = config.stage_widths[s + 1];
            let heads = config.heads_per_stage[s];
            let down = normal_tensor(
                vec![2, 2, 2, c_in, c_out],
                (2.0 / (8.0 * c_in as f64)).sqrt(),
                &mut rng,
            )?;
            let mut blocks = Vec::new();
            for _ in 0..depth {
                blocks.push(Block::init(c_out, heads, config.mlp_ratio, &mut rng)?);
            }
            stages.push(Stage { down, blocks });
        }

        Ok(Model {
            stem_gamma: Tensor::full(vec![w0], T::one())?,
            stem_beta: Tensor::zeros(vec![w0]),
            head_w: Tensor::zeros(vec![config.feature_width(), config.num_classes]),
            head_b: Tensor::zeros(vec![config.num_classes]),
            config,
            stem_compress,
            stem_conv,
            stages,
        })
    }

    /// Registers every parameter on the tape, as trainable params or
    /// frozen leaves.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Result<ModelVars> {
        let stem_compress = reg(tape, &self.stem_compress, trainable)?;
        let stem_conv = reg(tape, &self.stem_conv, trainable)?;
        let stem_gamma = reg(tape, &self.stem_gamma, trainable)?;
        let stem_beta = reg(tape, &self.stem_beta, trainable)?;
        let mut stages = Vec::new();
        for stage in &self.stages {
            let down = reg(tape, &stage.down, trainable)?;
            let mut blocks = Vec::new();
            for b in &stage.blocks {
                blocks.push(b.bind(tape, trainable)?);
            }
            stages.push(StageVars { down, blocks });
        }
        Ok(ModelVars {
            stem_compress,
            stem_conv,
            stem_gamma,
            stem_beta,
            stages,
            head_w: reg(tape, &self.head_w, trainable)?,
            head_b: reg(tape, &self.head_b, trainable)?,
        })
    }

    /// Visits `(name, tensor)` pairs in the fixed traversal order.
    pub fn visit(&self, f: &mut dyn FnMut(String, &Tensor<T>)) {
        f("stem.compress".into(), &self.stem_compress);
        f("stem.conv".into(), &self.stem_conv);
        f("stem.norm.gamma".into(), &self.stem_gamma);
        f("stem.norm.beta".into(), &self.stem_beta);
        for (s, stage) in self.stages.iter().enumerate() {
            f(format!("stages.{s}.down"), &stage.down);
            for (b, blk) in stage.blocks.iter().enumerate() {
                let p = format!("stages.{s}.blocks.{b}");
                f(format!("{p}.norm1.gamma"), &blk.norm1_gamma);
                f(format!("{p}.norm1.beta"), &blk.norm1_beta);
                f(format!("{p}.spec.wq"), &blk.spec.wq);
                f(format!("{p}.spec.wk"), &blk.spec.wk);
                f(format!("{p}.spec.wv"), &blk.spec.wv);
                f(format!("{p}.spec.wo"), &blk.spec.wo);
                f(format!("{p}.spat.wq"), &blk.spat.wq);
                f(format!("{p}.spat.wk"), &blk.spat.wk);
                f(format!("{p}.spat.wv"), &blk.spat.wv);
                f(format!("{p}.spat.wo"), &blk.spat.wo);
                f(format!("{p}.norm2.gamma"), &blk.norm2_gamma);
                f(format!("{p}.norm2.beta"), &blk.norm2_beta);
                f(format!("{p}.mixer.dw"), &blk.dw);
                f(format!("{p}.mixer.pw1.weight"), &blk.pw1_w);
                f(format!("{p}.mixer.pw1.bias"), &blk.pw1_b);
                f(format!("{p}.mixer.pw2.weight"), &blk.pw2_w);
                f(format!("{p}.mixer.pw2.bias"), &blk.pw2_b);
            }
        }
        f("head.weight".into(), &self.head_w);
        f("head.bias".into(), &self.head_b);
    }

    /// Mutable traversal in the same order as [`Model::visit`].
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor<T>)) {
        f("stem.compress".into(), &mut self.stem_compress);
        f("stem.conv".into(), &mut self.stem_conv);
        f("stem.norm.gamma".into(), &mut self.stem_gamma);
        f("stem.norm.beta".into(), &mut self.stem_beta);
        for (s, stage) in self.stages.iter_mut().enumerate() {
            f(format!("stages.{s}.down"), &mut stage.down);
            for (b, blk) in stage.blocks.iter_mut().enumerate() {
                let p = format!("stages.{s}.blocks.{b}");
                f(format!("{p}.norm1.gamma"), &mut blk.norm1_gamma);
                f(format!("{p}.norm1.beta"), &mut blk.norm1_beta);
                f(format!("{p}.spec.wq"), &mut blk.spec.wq);
                f(format!("{p}.spec.wk"), &mut blk.spec.wk);
                f(format!("{p}.spec.wv"), &mut blk.spec.wv);
                f(format!("{p}.spec.wo"), &mut blk.spec.wo);
                f(format!("{p}.spat.wq"), &mut blk.spat.wq);
                f(format!("{p}.spat.wk"), &mut blk.spat.wk);
                f(format!("{p}.spat.wv"), &mut blk.spat.wv);
                f(format!("{p}.spat.wo"), &mut blk.spat.wo);
                f(format!("{p}.norm2.gamma"), &mut blk.norm2_gamma);
                f(format!("{p}.norm2.beta"), &mut blk.norm2_beta);
                f(format!("{p}.mixer.dw"), &mut blk.dw);
                f(format!("{p}.mixer.pw1.weight"), &mut blk.pw1_w);
                f(format!("{p}.mixer.pw1.bias"), &mut blk.pw1_b);
                f(format!("{p}.mixer.pw2.weight"), &mut blk.pw2_w);
                f(format!("{p}.mixer.pw2.bias"), &mut blk.pw2_b);
            }
        }
        f("head.weight".into(), &mut self.head_w);
        f("head.bias".into(), &mut self.head_b);
    }

    /// Total parameter elements actually stored.
    pub fn param_elements(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.numel());
        n
    }

    /// Moves gradients off a backward sweep into the parameter tensors'
    /// gradient slots, in traversal order.
    pub fn absorb_grads(&mut self, vars: &ModelVars, grads: &mut Grads<T>) -> Result<()> {
        let order = bound_order(vars);
        let mut idx = 0;
        let mut err = None;
        self.visit_mut(&mut |_, t| {
            let v = order[idx];
            idx += 1;
            if err.is_none() {
                if let Some(g) = grads.take(v) {
                    if let Err(e) = t.accum_grad(&g) {
                        err = Some(e);
                    }
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Vars in the same order as [`Model::visit`].
fn bound_order(vars: &ModelVars) -> Vec<Var> {
    let mut order = vec![vars.stem_compress, vars.stem_conv, vars.stem_gamma, vars.stem_beta];
    for s in &vars.stages {
        order.push(s.down);
        for b in &s.blocks {
            order.extend([
                b.norm1_gamma,
                b.norm1_beta,
                b.spec.wq,
                b.spec.wk,
                b.spec.wv,
                b.spec.wo,
                b.spat.wq,
                b.spat.wk,
                b.spat.wv,
                b.spat.wo,
                b.norm2_gamma,
                b.norm2_beta,
                b.dw,
                b.pw1_w,
                b.pw1_b,
                b.pw2_w,
                b.pw2_b,
            ]);
        }
    }
    order.extend([vars.head_w, vars.head_b]);
    order
}

/// Runs stem and stages, optionally transforming the activation at each
/// boundary, and returns the captured boundary features.
pub fn forward_features<T: Scalar>(
    tape: &mut Tape<T>,
    config: &TriFormerConfig,
    vars: &ModelVars,
    x: Var,
    mut hook: Option<InjectHook<'_, T>>,
) -> Result<FeatureTaps> {
    let shape = tape.shape(x).to_vec();
    let want = [config.patch, config.patch, config.in_bands, 1];
    if shape.len() != 5 || shape[1..] != want {
        return Err(Error::shape(format!(
            "model expects input [B, {}, {}, {}, 1], got {shape:?}",
            config.patch, config.patch, config.in_bands
        )));
    }

    // Stem: spectrum compression, then conv + norm + GELU.
    let cur = tape.conv3d(x, vars.stem_compress, [1, 1, config.spectral_stride], Padding::Same, 1)?;
    let cur = tape.conv3d(cur, vars.stem_conv, [1, 1, 1], Padding::Same, 1)?;
    let cur = tape.layer_norm(cur, vars.stem_gamma, vars.stem_beta, LN_EPS)?;
    let mut cur = tape.gelu(cur)?;
    if let Some(h) = hook.as_deref_mut() {
        cur = h(tape, 0, cur)?;
    }
    let stem = cur;

    let mut stage_outs = Vec::with_capacity(vars.stages.len());
    for (k, stage) in vars.stages.iter().enumerate() {
        cur = tape.conv3d(cur, stage.down, [2, 2, 2], Padding::Same, 1)?;
        if let Some(h) = hook.as_deref_mut() {
            cur = h(tape, k + 1, cur)?;
        }
        for blk in &stage.blocks {
            cur = block_forward(tape, cur, blk)?;
        }
        stage_outs.push(cur);
    }

    Ok(FeatureTaps { stem, stages: stage_outs })
}

/// Pools the final feature map and applies a linear head.
pub fn apply_head<T: Scalar>(tape: &mut Tape<T>, w: Var, b: Var, features: Var) -> Result<Var> {
    let pooled = tape.global_avg_pool(features)?;
    let logits = tape.matmul(pooled, w)?;
    tape.bias_add(logits, b)
}

/// Full forward pass to class logits `[B, num_classes]`.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    config: &TriFormerConfig,
    vars: &ModelVars,
    x: Var,
) -> Result<Var> {
    let taps = forward_features(tape, config, vars, x, None)?;
    apply_head(tape, vars.head_w, vars.head_b, taps.last())
}

/// Closed-form parameter count for a config; matches the instantiated model.
pub fn param_count(config: &TriFormerConfig) -> Result<usize> {
    let config = config.clone().normalize()?;
    let w0 = config.stem_width;
    let r = config.mlp_ratio;
    // Stem: compression conv, 3x3x3 conv, norm affine.
    let mut total = 3 * w0 + 27 * w0 * w0 + 2 * w0;
    for (s, &depth) in config.stage_depths.iter().enumerate() {
        let c_in = config.stage_widths[s];
        let c = config.stage_widths[s + 1];
        total += 8 * c_in * c; // downsample kernel
        let block = 8 * c * c          // two attention modules, 4 CxC each
            + 2 * r * c * c            // pointwise weights
            + r * c                    // pw1 bias
            + 27 * c                   // depthwise kernel
            + 4 * c                    // two norm affines
            + c;                       // pw2 bias
        total += depth * block;
    }
    total += config.feature_width() * config.num_classes + config.num_classes;
    Ok(total)
}
