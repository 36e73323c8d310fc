//! Operation-count accounting: closed-form MAC formulas against the live
//! tape counter, plus the full-vs-factorized attention cost comparison.

mod common;

use triformer::flops::{measure_token_mixer, pairwise_score_count, token_mixer_macs};
use triformer::{model_flops_report, CostReport, Error, MixerMode, TriFormerConfig};

const BOTH: [MixerMode; 2] = [MixerMode::Full3d, MixerMode::Factorized];

#[test]
fn pairwise_degenerate_and_reference_values() {
    assert_eq!(pairwise_score_count(1, 1, 1, MixerMode::Full3d), 1);
    assert_eq!(pairwise_score_count(1, 1, 1, MixerMode::Factorized), 2);

    let full = pairwise_score_count(9, 9, 16, MixerMode::Full3d);
    let fact = pairwise_score_count(9, 9, 16, MixerMode::Factorized);
    assert_eq!(full, 1_679_616);
    assert_eq!(fact, 104_976 + 20_736);
    assert_eq!(fact, 125_712);
    let ratio = full as f64 / fact as f64;
    assert!((ratio - 13.36).abs() < 5e-3, "ratio {ratio}");
}

#[test]
fn factorized_beats_full_beyond_degenerate_extents() {
    // full − fact = HWL·((HW−1)(L−1) − 1): strictly positive except the
    // single tie at HW = L = 2, where both mixers count 16 pairs.
    for h in 1..=6usize {
        for w in 1..=6usize {
            for l in 2..=6usize {
                if h * w < 2 {
                    continue;
                }
                let full = pairwise_score_count(h, w, l, MixerMode::Full3d);
                let fact = pairwise_score_count(h, w, l, MixerMode::Factorized);
                if h * w == 2 && l == 2 {
                    assert_eq!(fact, full, "H={h} W={w} L={l}");
                } else {
                    assert!(fact < full, "H={h} W={w} L={l}: {fact} !< {full}");
                }
            }
        }
    }
}

#[test]
fn token_mixer_closed_form_values() {
    // (5,6,7), C=8: N=210; projections 4·210·64 = 53,760.
    // Full pairwise 210² = 44,100 → 705,600 score/agg MACs.
    // Factorized pairwise 7·30² + 30·7² = 7,770 → 124,320.
    assert_eq!(token_mixer_macs(5, 6, 7, 8, 2, MixerMode::Full3d).unwrap(), 759_360);
    assert_eq!(token_mixer_macs(5, 6, 7, 8, 2, MixerMode::Factorized).unwrap(), 178_080);
}

#[test]
fn token_mixer_rejects_degenerate_inputs() {
    for (h, w, l, c, heads) in
        [(0, 3, 3, 4, 1), (3, 0, 3, 4, 1), (3, 3, 0, 4, 1), (3, 3, 3, 0, 1), (3, 3, 3, 4, 0), (3, 3, 3, 10, 3)]
    {
        for mode in BOTH {
            let err = token_mixer_macs(h, w, l, c, heads, mode).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
        }
    }
    assert!(measure_token_mixer::<f32>(0, 3, 3, 4, 1, MixerMode::Full3d, 0).is_err());
}

#[test]
fn measured_equals_analytic_exactly() {
    for mode in BOTH {
        let analytic = token_mixer_macs(5, 5, 6, 16, 2, mode).unwrap();
        let measured = measure_token_mixer::<f32>(5, 5, 6, 16, 2, mode, 7).unwrap();
        assert_eq!(measured, analytic, "{mode:?}");
        // The counter tracks shapes, not values or scalar width.
        let measured64 = measure_token_mixer::<f64>(5, 5, 6, 16, 2, mode, 8).unwrap();
        assert_eq!(measured64, analytic, "{mode:?} f64");
    }
}

#[test]
fn measured_matches_at_single_channel_heads() {
    for mode in BOTH {
        let analytic = token_mixer_macs(2, 2, 3, 4, 4, mode).unwrap();
        let measured = measure_token_mixer::<f32>(2, 2, 3, 4, 4, mode, 1).unwrap();
        assert_eq!(measured, analytic, "{mode:?}");
    }
}

fn small_cfg(in_bands: usize) -> TriFormerConfig {
    TriFormerConfig {
        patch: 9,
        stem_width: 8,
        stage_widths: vec![8, 16, 32, 64],
        stage_depths: vec![1, 1, 1],
        ..TriFormerConfig::new(in_bands, 4)
    }
}

fn row<'a>(report: &'a CostReport, name: &str) -> &'a triformer::flops::LayerCost {
    report
        .layers
        .iter()
        .find(|l| l.name == name)
        .unwrap_or_else(|| panic!("missing row {name}"))
}

#[test]
fn report_rows_measured_equals_analytic_and_totals_sum() {
    let report = model_flops_report::<f32>(&small_cfg(16), [9, 9, 16], 0).unwrap();
    assert!(!report.layers.is_empty());
    for l in &report.layers {
        assert_eq!(l.measured, l.analytic, "layer {}", l.name);
        assert!(l.analytic > 0, "layer {} costs nothing", l.name);
    }
    let analytic: u64 = report.layers.iter().map(|l| l.analytic).sum();
    let measured: u64 = report.layers.iter().map(|l| l.measured).sum();
    assert_eq!(report.totals.analytic, analytic);
    assert_eq!(report.totals.measured, measured);

    for name in [
        "stem.compress",
        "stem.conv",
        "stages.0.down",
        "stages.0.blocks.0.spectral",
        "stages.0.blocks.0.spatial",
        "stages.0.blocks.0.mixer",
        "stages.2.down",
        "head",
    ] {
        row(&report, name);
    }

    // Block extents: stem [9,9,8] then ceil-halved [5,5,4], [3,3,2], [2,2,1].
    let full: u64 = [(25u64 * 4).pow(2), (9u64 * 2).pow(2), (4u64 * 1).pow(2)].iter().sum();
    let fact: u64 = [(4 * 25u64 * 25 + 25 * 16), (2 * 81 + 9 * 4), (4 + 16)].iter().sum();
    let want = full as f64 / fact as f64;
    let got = report.ratio.expect("ratio present");
    assert!((got - want).abs() < 1e-12, "got {got}, want {want}");

    // Elementwise work is reported but kept out of the MAC totals.
    assert!(report.elementwise.iter().any(|e| e.name == "softmax"));
    let text = report.render_text();
    assert!(text.contains("stem.conv") && text.contains("total"));
}

#[test]
fn report_without_blocks_has_no_ratio() {
    let cfg = TriFormerConfig {
        stage_depths: vec![0, 0, 0],
        ..TriFormerConfig::new(16, 4)
    };
    let report = model_flops_report::<f32>(&cfg, [27, 27, 16], 0).unwrap();
    assert!(report.ratio.is_none());
    assert!(report.layers.iter().all(|l| !l.name.contains("blocks")));
}

#[test]
fn report_rejects_zero_extents() {
    let err = model_flops_report::<f32>(&small_cfg(16), [9, 0, 16], 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn doubling_bands_scales_attention_rows() {
    let r32 = model_flops_report::<f32>(&small_cfg(32), [9, 9, 32], 0).unwrap();
    let r64 = model_flops_report::<f32>(&small_cfg(64), [9, 9, 64], 0).unwrap();
    for b in ["stages.0.blocks.0", "stages.1.blocks.0", "stages.2.blocks.0"] {
        let spec1 = row(&r32, &format!("{b}.spectral")).analytic;
        let spec2 = row(&r64, &format!("{b}.spectral")).analytic;
        assert!(spec2 > 2 * spec1, "{b}: spectral {spec2} vs 2·{spec1}");
        let spat1 = row(&r32, &format!("{b}.spatial")).analytic;
        let spat2 = row(&r64, &format!("{b}.spatial")).analytic;
        assert_eq!(spat2, 2 * spat1, "{b}: spatial should scale linearly");
    }
}

#[test]
fn report_is_deterministic() {
    let a = model_flops_report::<f32>(&small_cfg(16), [9, 9, 16], 3).unwrap();
    let b = model_flops_report::<f32>(&small_cfg(16), [9, 9, 16], 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn pairwise_ratio_grows_on_geometric_sweep() {
    let mut prev = 0.0;
    for k in 1..=5u32 {
        let n = 2usize.pow(k);
        let full = pairwise_score_count(n, n, n, MixerMode::Full3d) as f64;
        let fact = pairwise_score_count(n, n, n, MixerMode::Factorized) as f64;
        let ratio = full / fact;
        assert!(ratio > prev, "ratio not increasing at n={n}");
        prev = ratio;
    }
    assert!(prev > 30.0, "sweep should end well above its start, got {prev}");
}

#[test]
fn factorized_cost_monotone_in_every_extent() {
    let base = (3usize, 4usize, 5usize, 8usize);
    let at = |h, w, l, c| token_mixer_macs(h, w, l, c, 1, MixerMode::Factorized).unwrap();
    let (h, w, l, c) = base;
    let v = at(h, w, l, c);
    assert!(at(h + 1, w, l, c) > v);
    assert!(at(h, w + 1, l, c) > v);
    assert!(at(h, w, l + 1, c) > v);
    assert!(at(h, w, l, c + 2) > v);
}
