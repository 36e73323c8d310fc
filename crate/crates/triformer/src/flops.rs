//! Analytic and measured operation accounting.
//!
//! Costs are multiply-accumulate counts (one MAC = 1). Softmax, layer norm,
//! and other elementwise work is tracked separately and excluded from the
//! headline totals and the full-vs-factorized ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Padding;
use crate::net::attention::{attend_core, Attention};
use crate::net::block::{channel_mixer, LN_EPS};
use crate::net::config::TriFormerConfig;
use crate::net::model::{apply_head, normal_tensor, Model};
use crate::net::{spatial_attention, spectral_attention};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

/// Token-mixer variants compared by the complexity claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerMode {
    /// Joint attention over all H·W·L tokens (reference only).
    Full3d,
    /// Parallel spectral (per-site) and spatial (per-band) attention.
    Factorized,
}

/// Pairwise score pairs per head at unit channel width.
///
/// Extents must be positive; degenerate extents are the caller's mistake.
pub fn pairwise_score_count(h: usize, w: usize, l: usize, mode: MixerMode) -> u64 {
    let (h, w, l) = (h as u64, w as u64, l as u64);
    match mode {
        MixerMode::Full3d => (h * w * l) * (h * w * l),
        MixerMode::Factorized => l * (h * w) * (h * w) + (h * w) * l * l,
    }
}

/// Closed-form MAC count of one token mixer over a `[1, H, W, L, C]` input:
/// Q/K/V/output projections (4·HWL·C²) plus score and value-aggregation
/// terms (2·pairwise·C).
pub fn token_mixer_macs(
    h: usize,
    w: usize,
    l: usize,
    c: usize,
    heads: usize,
    mode: MixerMode,
) -> Result<u64> {
    if h == 0 || w == 0 || l == 0 || c == 0 {
        return Err(Error::config(format!(
            "token mixer extents must be positive, got H={h} W={w} L={l} C={c}"
        )));
    }
    if heads == 0 || c % heads != 0 {
        return Err(Error::config(format!(
            "channel count {c} not divisible by {heads} heads"
        )));
    }
    let n = (h * w * l) as u64;
    let c64 = c as u64;
    Ok(4 * n * c64 * c64 + 2 * pairwise_score_count(h, w, l, mode) * c64)
}

/// Runs the reference token mixer (one shared Q/K/V/O projection set) on a
/// real tape and returns the measured MAC count.
pub fn measure_token_mixer<T: Scalar>(
    h: usize,
    w: usize,
    l: usize,
    c: usize,
    heads: usize,
    mode: MixerMode,
    seed: u64,
) -> Result<u64> {
    if h == 0 || w == 0 || l == 0 {
        return Err(Error::config(format!(
            "token mixer extents must be positive, got H={h} W={w} L={l}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Attention::<T>::init(c, heads, &mut rng)?;
    let x = normal_tensor::<T>(vec![1, h, w, l, c], 0.5, &mut rng)?;

    let mut tape = Tape::new();
    let xv = tape.leaf(&x)?;
    let pv = p.bind(&mut tape, false)?;
    reference_token_mixer(&mut tape, xv, &pv, mode)?;
    Ok(tape.macs())
}

/// Reference mixer: project Q/K/V once, mix tokens in the requested mode,
/// project out once. Only used for counting and equivalence checks; the
/// production blocks use independent per-branch projections.
fn reference_token_mixer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    p: &crate::net::AttentionVars,
    mode: MixerMode,
) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let [b, h, w, l, c] = match shape.as_slice() {
        [b, h, w, l, c] => [*b, *h, *w, *l, *c],
        other => {
            return Err(Error::shape(format!(
                "reference mixer expects [B, H, W, L, C], got {other:?}"
            )))
        }
    };
    let n = h * w * l;
    let flat = tape.reshape(x, vec![b, n, c])?;
    let q = tape.matmul(flat, p.wq)?;
    let k = tape.matmul(flat, p.wk)?;
    let v = tape.matmul(flat, p.wv)?;

    let mixed = match mode {
        MixerMode::Full3d => attend_core(tape, q, k, v, p.heads)?,
        MixerMode::Factorized => {
            // Spectral: group by site, attend over L.
            let per_site = |tape: &mut Tape<T>, y: Var| tape.reshape(y, vec![b * h * w, l, c]);
            let qs = per_site(tape, q)?;
            let ks = per_site(tape, k)?;
            let vs = per_site(tape, v)?;
            let spec = attend_core(tape, qs, ks, vs, p.heads)?;
            let spec = tape.reshape(spec, vec![b, n, c])?;

            // Spatial: group by band, attend over H·W.
            let per_band = |tape: &mut Tape<T>, y: Var| -> Result<Var> {
                let y = tape.reshape(y, vec![b, h, w, l, c])?;
                let y = tape.permute(y, &[0, 3, 1, 2, 4])?;
                tape.reshape(y, vec![b * l, h * w, c])
            };
            let qb = per_band(tape, q)?;
            let kb = per_band(tape, k)?;
            let vb = per_band(tape, v)?;
            let spat = attend_core(tape, qb, kb, vb, p.heads)?;
            let spat = tape.reshape(spat, vec![b, l, h, w, c])?;
            let spat = tape.permute(spat, &[0, 2, 3, 1, 4])?;
            let spat = tape.reshape(spat, vec![b, n, c])?;

            tape.add(spec, spat)?
        }
    };
    tape.matmul(mixed, p.wo)
}

// ── Whole-model report ──────────────────────────────────────────────────

/// One layer's MAC cost, counted analytically and on a live tape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub analytic: u64,
    pub measured: u64,
}

/// Elementwise op counts (not MACs); informational only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementwiseCost {
    pub name: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostTotals {
    pub analytic: u64,
    pub measured: u64,
}

/// Per-layer cost table for one forward pass at batch size 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub elementwise: Vec<ElementwiseCost>,
    pub totals: CostTotals,
    /// Full-vs-factorized pairwise-score ratio summed over all attention
    /// layers at their production extents; absent when there are none.
    pub ratio: Option<f64>,
}

impl CostReport {
    /// Aligned human-readable table.
    pub fn render_text(&self) -> String {
        let name_w = self
            .layers
            .iter()
            .map(|l| l.name.len())
            .chain(self.elementwise.iter().map(|e| e.name.len()))
            .chain(["layer".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_w$}  {:>14}  {:>14}\n",
            "layer", "analytic", "measured"
        ));
        for l in &self.layers {
            out.push_str(&format!(
                "{:<name_w$}  {:>14}  {:>14}\n",
                l.name, l.analytic, l.measured
            ));
        }
        out.push_str(&format!(
            "{:<name_w$}  {:>14}  {:>14}\n",
            "total", self.totals.analytic, self.totals.measured
        ));
        if !self.elementwise.is_empty() {
            out.push_str("elementwise (op counts, excluded from totals):\n");
            for e in &self.elementwise {
                out.push_str(&format!("{:<name_w$}  {:>14}\n", e.name, e.count));
            }
        }
        if let Some(r) = self.ratio {
            out.push_str(&format!("full/factorized pairwise ratio: {r:.2}\n"));
        }
        out
    }
}

/// Ceil-division output extent of a stride-`s` same-padded conv.
fn out_extent(n: usize, s: usize) -> usize {
    n.div_ceil(s)
}

/// Instrumented single-sample forward pass producing the per-layer table.
///
/// `extents` are the raw input `[H, W, L]`; they may differ from the
/// config's patch/band settings (the profiler drives layers directly).
pub fn model_flops_report<T: Scalar>(
    config: &TriFormerConfig,
    extents: [usize; 3],
    seed: u64,
) -> Result<CostReport> {
    let [h0, w0, l0] = extents;
    if h0 == 0 || w0 == 0 || l0 == 0 {
        return Err(Error::config(format!(
            "input extents must be positive, got {extents:?}"
        )));
    }
    let config = config.clone().normalize()?;
    let model = Model::<T>::init(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x = normal_tensor::<T>(vec![1, h0, w0, l0, 1], 0.5, &mut rng)?;

    let mut tape = Tape::new();
    let xv = tape.leaf(&x)?;
    let vars = model.bind(&mut tape, false)?;

    let mut layers: Vec<LayerCost> = Vec::new();
    let mut row = |tape: &mut Tape<T>, name: String, analytic: u64, before: u64| {
        layers.push(LayerCost { name, analytic, measured: tape.macs() - before });
    };

    let w_stem = config.stem_width as u64;
    // Stem compression: (1,1,3) conv, stride (1,1,spectral_stride).
    let l1 = out_extent(l0, config.spectral_stride);
    let mut before = tape.macs();
    let mut cur = tape.conv3d(xv, vars.stem_compress, [1, 1, config.spectral_stride], Padding::Same, 1)?;
    row(
        &mut tape,
        "stem.compress".into(),
        (h0 * w0 * l1) as u64 * 3 * w_stem,
        before,
    );

    before = tape.macs();
    cur = tape.conv3d(cur, vars.stem_conv, [1, 1, 1], Padding::Same, 1)?;
    row(
        &mut tape,
        "stem.conv".into(),
        (h0 * w0 * l1) as u64 * 27 * w_stem * w_stem,
        before,
    );
    cur = tape.layer_norm(cur, vars.stem_gamma, vars.stem_beta, LN_EPS)?;
    cur = tape.gelu(cur)?;

    let mut dims = [h0, w0, l1];
    let mut full_pairwise = 0u64;
    let mut fact_pairwise = 0u64;
    for (s, stage) in vars.stages.iter().enumerate() {
        let c_in = config.stage_widths[s] as u64;
        let c = config.stage_widths[s + 1];
        let c64 = c as u64;
        dims = [out_extent(dims[0], 2), out_extent(dims[1], 2), out_extent(dims[2], 2)];
        let [sh, sw, sl] = dims;
        let sites = (sh * sw * sl) as u64;

        before = tape.macs();
        cur = tape.conv3d(cur, stage.down, [2, 2, 2], Padding::Same, 1)?;
        row(&mut tape, format!("stages.{s}.down"), sites * 8 * c_in * c64, before);

        for (bi, blk) in stage.blocks.iter().enumerate() {
            let p = format!("stages.{s}.blocks.{bi}");
            let (hw, l64) = ((sh * sw) as u64, sl as u64);
            let spec_pairs = hw * l64 * l64;
            let spat_pairs = l64 * hw * hw;
            fact_pairwise += spec_pairs + spat_pairs;
            full_pairwise += (hw * l64) * (hw * l64);

            // Mirror block_forward exactly, sampling the counter per branch.
            let n1 = tape.layer_norm(cur, blk.norm1_gamma, blk.norm1_beta, LN_EPS)?;
            before = tape.macs();
            let a = spectral_attention(&mut tape, n1, &blk.spec)?;
            row(
                &mut tape,
                format!("{p}.spectral"),
                4 * sites * c64 * c64 + 2 * spec_pairs * c64,
                before,
            );
            before = tape.macs();
            let b = spatial_attention(&mut tape, n1, &blk.spat)?;
            row(
                &mut tape,
                format!("{p}.spatial"),
                4 * sites * c64 * c64 + 2 * spat_pairs * c64,
                before,
            );
            let y = tape.add(cur, a)?;
            let y = tape.add(y, b)?;

            let n2 = tape.layer_norm(y, blk.norm2_gamma, blk.norm2_beta, LN_EPS)?;
            before = tape.macs();
            let m = channel_mixer(&mut tape, n2, blk)?;
            row(
                &mut tape,
                format!("{p}.mixer"),
                sites * 27 * c64 + 2 * sites * (config.mlp_ratio as u64) * c64 * c64,
                before,
            );
            cur = tape.add(y, m)?;
        }
    }

    before = tape.macs();
    let _ = apply_head(&mut tape, vars.head_w, vars.head_b, cur)?;
    row(
        &mut tape,
        "head".into(),
        config.feature_width() as u64 * config.num_classes as u64,
        before,
    );

    let totals = CostTotals {
        analytic: layers.iter().map(|l| l.analytic).sum(),
        measured: layers.iter().map(|l| l.measured).sum(),
    };
    let elementwise = tape
        .eltwise_counts()
        .iter()
        .map(|(k, v)| ElementwiseCost { name: (*k).to_string(), count: *v })
        .collect();
    let ratio = (fact_pairwise > 0).then(|| full_pairwise as f64 / fact_pairwise as f64);
    Ok(CostReport { layers, elementwise, totals, ratio })
}
