//! Command bodies: each returns a library error that main maps to an exit
//! code, prints exactly one JSON document to stdout on success, and keeps
//! human commentary on stderr.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use triformer::data::{
    gen_synthetic, load_hsc, normalize, rgb_to_pseudo_hsi, save_hsc, spectral_resample,
    split_per_class, HsiCube, LabelMap, SplitSpec, SyntheticSpec,
};
use triformer::sdt::{
    load_dual, save_dual, summarize_dual, tune as tune_dual, DualModel, DualPatchSet, SdtConfig,
};
use triformer::train::{
    aa, kappa, load_checkpoint, oa, predict, repeat_runs, save_checkpoint, train as train_model,
    ConfusionMatrix, PatchSet, TrainConfig,
};
use triformer::{Error, Model, Result, Tensor, TriFormerConfig};

use crate::{ConvertRgbArgs, EvalArgs, FlopsArgs, GenDataArgs, TrainArgs, TuneArgs};

// ── shared plumbing ─────────────────────────────────────────────────────

/// One experiment file covering every subcommand; unknown keys rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Option<TriFormerConfig>,
    pub train: Option<TrainConfig>,
    pub sdt: Option<SdtConfig>,
    pub tune: Option<TrainConfig>,
    pub split: Option<SplitSpec>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => serde_json::from_slice(&fs::read(p)?)
                .map_err(|e| Error::format(format!("{}: {e}", p.display()))),
        }
    }
}

fn emit(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Resamples (when the band counts differ) and standardizes a cube.
fn prepare(cube: HsiCube, bands: usize) -> Result<HsiCube> {
    let cube = if bands != 0 && cube.l != bands {
        eprintln!("resampling {} bands -> {bands}", cube.l);
        spectral_resample(&cube, bands)?
    } else {
        cube
    };
    normalize(&cube)
}

/// Zero band/class counts in a config mean "take them from the data".
fn fill_from_data(mut m: TriFormerConfig, bands: usize, classes: usize) -> TriFormerConfig {
    if m.in_bands == 0 {
        m.in_bands = bands;
    }
    if m.num_classes == 0 {
        m.num_classes = classes;
    }
    m
}

fn metrics_of(cm: &ConfusionMatrix) -> Result<(f64, f64, f64)> {
    Ok((oa(cm)?, aa(cm)?, kappa(cm)?))
}

fn history_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.history.jsonl", out.display()))
}

fn write_history(path: &Path, history: &triformer::train::History) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    for e in &history.epochs {
        writeln!(f, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

// ── gen-data ────────────────────────────────────────────────────────────

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let spec: SyntheticSpec = match &a.spec {
        None => SyntheticSpec::default(),
        Some(p) => serde_json::from_slice(&fs::read(p)?)
            .map_err(|e| Error::format(format!("{}: {e}", p.display())))?,
    };
    let scene = gen_synthetic(&spec, a.seed)?;
    fs::create_dir_all(&a.out)?;
    save_hsc(&scene.sensor_a.0, &scene.sensor_a.1, &a.out.join("sensorA.hsc"))?;
    save_hsc(&scene.sensor_b.0, &scene.sensor_b.1, &a.out.join("sensorB.hsc"))?;
    let echo = json!({ "seed": a.seed, "spec": spec });
    fs::write(a.out.join("spec.json"), serde_json::to_string_pretty(&echo)? + "\n")?;

    let labels = &scene.sensor_a.1;
    let mut counts = vec![0usize; labels.num_classes()];
    for &l in &labels.labels {
        if l > 0 {
            counts[l as usize - 1] += 1;
        }
    }
    eprintln!(
        "wrote sensorA.hsc ({} bands) and sensorB.hsc ({} bands) to {}",
        scene.sensor_a.0.l,
        scene.sensor_b.0.l,
        a.out.display()
    );
    emit(&json!({
        "out": a.out,
        "files": ["sensorA.hsc", "sensorB.hsc", "spec.json"],
        "seed": a.seed,
        "classes": labels.num_classes(),
        "class_counts": counts,
        "bands_a": scene.sensor_a.0.l,
        "bands_b": scene.sensor_b.0.l,
    }))
}

// ── train ───────────────────────────────────────────────────────────────

pub fn train(a: &TrainArgs) -> Result<()> {
    let rc = RunConfig::load(a.config.as_deref())?;
    let mut tc = rc.train.unwrap_or_default();
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }

    let (cube, labels) = load_hsc(&a.data)?;
    let mc = fill_from_data(
        rc.model.unwrap_or_else(|| TriFormerConfig::new(0, 0)),
        cube.l,
        labels.num_classes(),
    );
    let cube = prepare(cube, mc.in_bands)?;

    let mut sp = rc.split.unwrap_or_else(|| SplitSpec::fixed(50, tc.seed));
    if let Some(p) = a.per_class {
        sp.per_class = p;
    }
    let split = split_per_class(&labels, &sp)?;
    let train_set = PatchSet::from_cube(&cube, &labels, &split.train, mc.patch)?;
    let test_set = PatchSet::from_cube(&cube, &labels, &split.test, mc.patch)?;
    eprintln!(
        "training on {} pixels ({} test), {} bands, {} classes, seed {}",
        train_set.len(),
        test_set.len(),
        mc.in_bands,
        mc.num_classes,
        tc.seed
    );

    let mut model = Model::<f32>::init(mc, tc.seed)?;
    let history = train_model(&mut model, &train_set, &tc)?;
    save_checkpoint(&model, &a.out)?;
    let hist = history_path(&a.out);
    write_history(&hist, &history)?;

    let last = history.epochs.last().cloned().unwrap_or_default();
    eprintln!(
        "finished epoch {}: loss {:.4}, train OA {:.4}",
        last.epoch, last.loss, last.train_oa
    );
    let preds = predict(&model, &test_set, tc.batch.max(1))?;
    let mut cm = ConfusionMatrix::new(test_set.classes);
    for (&want, got) in test_set.y.iter().zip(preds) {
        cm.record(want, got);
    }
    let (o, a_, k) = metrics_of(&cm)?;
    emit(&json!({
        "oa": o,
        "aa": a_,
        "kappa": k,
        "epochs_run": history.epochs.len(),
        "final_loss": last.loss,
        "final_train_oa": last.train_oa,
        "train_pixels": train_set.len(),
        "test_pixels": test_set.len(),
        "checkpoint": a.out,
        "history": hist,
    }))
}

// ── tune ────────────────────────────────────────────────────────────────

pub fn tune(a: &TuneArgs) -> Result<()> {
    let rc = RunConfig::load(a.config.as_deref())?;
    let base = load_checkpoint(&a.base)?;
    let (cube, labels) = load_hsc(&a.data)?;
    let classes = labels.num_classes();
    let cube = prepare(cube, base.config.in_bands)?;

    let mut sdt_cfg = rc
        .sdt
        .unwrap_or_else(|| SdtConfig::new(base.config.in_bands, classes));
    sdt_cfg.aux = fill_from_data(sdt_cfg.aux, base.config.in_bands, classes);
    if let Some(cf) = a.cold_factor {
        sdt_cfg.cold_factor = cf;
    }
    let mut tc = rc.tune.unwrap_or_else(TrainConfig::tuning);
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }

    let split = split_per_class(&labels, &SplitSpec::fixed(a.n_per_class, tc.seed))?;
    let tune_set =
        DualPatchSet::from_cube(&cube, &labels, &split.train, base.config.patch, sdt_cfg.aux.patch)?;
    let test_set =
        DualPatchSet::from_cube(&cube, &labels, &split.test, base.config.patch, sdt_cfg.aux.patch)?;
    eprintln!(
        "tuning {} pixels/class over {} repeats (cold factor {}, period {})",
        a.n_per_class, a.repeats, sdt_cfg.cold_factor, sdt_cfg.cold_period
    );

    let mut kept: Option<DualModel<f32>> = None;
    let report = repeat_runs(a.repeats, tc.seed, |seed| {
        let mut dual = DualModel::new(base.clone(), &sdt_cfg, seed)?;
        let mut per_run = tc.clone();
        per_run.seed = seed;
        tune_dual(&mut dual, &tune_set, &per_run)?;
        let (_, summary) = summarize_dual(&dual, &test_set, tc.batch.max(1))?;
        eprintln!("seed {seed}: OA {:.4} AA {:.4} kappa {:.4}", summary.oa, summary.aa, summary.kappa);
        if kept.is_none() {
            kept = Some(dual);
        }
        Ok(summary)
    })?;
    let kept = kept.expect("repeat_runs ran at least once");
    save_dual(&kept, &a.out)?;

    emit(&json!({
        "n_per_class": a.n_per_class,
        "repeats": a.repeats,
        "cold_factor": sdt_cfg.cold_factor,
        "cold_period": sdt_cfg.cold_period,
        "report": report,
        "checkpoint": a.out,
    }))
}

// ── eval ────────────────────────────────────────────────────────────────

fn read_magic(path: &Path) -> Result<[u8; 4]> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(Error::format(format!("{}: too short for a checkpoint", path.display())));
    }
    Ok([bytes[0], bytes[1], bytes[2], bytes[3]])
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (cube, labels) = load_hsc(&a.data)?;
    let pixels: Vec<usize> =
        (0..labels.labels.len()).filter(|&i| labels.labels[i] > 0).collect();
    if pixels.is_empty() {
        return Err(Error::data("no labeled pixels to evaluate"));
    }

    let (preds, truths, classes) = match &read_magic(&a.ckpt)? {
        b"TFCK" => {
            let model = load_checkpoint(&a.ckpt)?;
            let cube = prepare(cube, model.config.in_bands)?;
            let set = PatchSet::from_cube(&cube, &labels, &pixels, model.config.patch)?;
            let preds = predict(&model, &set, a.batch)?;
            (preds, set.y, model.config.num_classes)
        }
        b"TFCD" => {
            let dual = load_dual(&a.ckpt)?;
            let cube = prepare(cube, dual.base.config.in_bands)?;
            let set = DualPatchSet::from_cube(
                &cube,
                &labels,
                &pixels,
                dual.base.config.patch,
                dual.aux.config.patch,
            )?;
            let preds = triformer::sdt::predict_dual(&dual, &set, a.batch)?;
            (preds, set.aux.y, dual.aux.config.num_classes)
        }
        _ => {
            return Err(Error::format(format!(
                "{}: neither a TFCK checkpoint nor a TFCD dual archive",
                a.ckpt.display()
            )))
        }
    };

    let mut cm = ConfusionMatrix::new(classes);
    for (&want, &got) in truths.iter().zip(&preds) {
        cm.record(want, got);
    }
    let (o, a_, k) = metrics_of(&cm)?;
    eprintln!("evaluated {} pixels: OA {o:.4} AA {a_:.4} kappa {k:.4}", preds.len());

    let map = match &a.map_out {
        None => None,
        Some(path) => {
            let mut indices = vec![0u8; labels.h * labels.w];
            for (&px, &pred) in pixels.iter().zip(&preds) {
                indices[px] = (pred + 1) as u8;
            }
            write_class_map(path, labels.w, labels.h, &indices, classes)?;
            eprintln!("wrote {}x{} class map to {}", labels.w, labels.h, path.display());
            Some(path.clone())
        }
    };

    emit(&json!({
        "oa": o,
        "aa": a_,
        "kappa": k,
        "pixels": preds.len(),
        "confusion": cm,
        "map": map,
    }))
}

// ── flops ───────────────────────────────────────────────────────────────

fn parse_extents(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || Error::usage(format!("extents must look like 9x9x16, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0usize; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}

pub fn flops(a: &FlopsArgs) -> Result<()> {
    let extents = parse_extents(&a.extents)?;
    let rc = RunConfig::load(a.config.as_deref())?;
    let mc = fill_from_data(
        rc.model.unwrap_or_else(|| TriFormerConfig::new(0, 16)),
        extents[2],
        16,
    );
    let report = triformer::model_flops_report::<f32>(&mc, extents, a.seed)?;
    eprint!("{}", report.render_text());
    emit(&serde_json::to_value(&report)?)
}

// ── convert-rgb ─────────────────────────────────────────────────────────

pub fn convert_rgb(a: &ConvertRgbArgs) -> Result<()> {
    let rgb = read_rgb_png(&a.input)?;
    let cube = rgb_to_pseudo_hsi(&rgb)?;
    let labels = LabelMap::new(cube.h, cube.w, vec![0; cube.h * cube.w], Vec::new())?;
    save_hsc(&cube, &labels, &a.out)?;
    eprintln!("{}x{} image -> {} bands", cube.h, cube.w, cube.l);
    emit(&json!({
        "h": cube.h,
        "w": cube.w,
        "bands": cube.l,
        "out": a.out,
    }))
}

// ── png helpers ─────────────────────────────────────────────────────────

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::format(format!("{}: {e}", path.display()))
}

/// Decodes an 8-bit PNG into a `[H, W, 3]` unit-range tensor. Palette and
/// 16-bit images are expanded/narrowed by the decoder; alpha is dropped.
fn read_rgb_png(path: &Path) -> Result<Tensor<f32>> {
    let file = fs::File::open(path)?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(png_err(path, format!("unsupported color type {other:?}"))),
    };
    let src = &buf[..w * h * channels];
    let mut data = Vec::with_capacity(h * w * 3);
    for px in src.chunks_exact(channels) {
        let (r, g, b) = match channels {
            3 | 4 => (px[0], px[1], px[2]),
            _ => (px[0], px[0], px[0]),
        };
        data.extend([r, g, b].map(|v| v as f32 / 255.0));
    }
    Tensor::from_vec(vec![h, w, 3], data)
}

/// Fixed class palette: golden-angle hues, full saturation ramp avoided so
/// neighboring classes stay distinguishable in print.
fn class_color(i: usize) -> [u8; 3] {
    let h = (i as f64 * 0.618_033_988_749_895) % 1.0;
    let (s, v) = (0.72, 0.95);
    let f = h * 6.0;
    let sector = f as usize % 6;
    let frac = f - f.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * frac);
    let t = v * (1.0 - s * (1.0 - frac));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Writes an 8-bit indexed PNG: palette slot 0 is black (unlabeled), slot
/// `c+1` is the fixed color of class `c`.
fn write_class_map(
    path: &Path,
    w: usize,
    h: usize,
    indices: &[u8],
    classes: usize,
) -> Result<()> {
    if classes > 255 {
        return Err(Error::data(format!("{classes} classes exceed the 8-bit palette")));
    }
    let mut palette = vec![0u8, 0, 0];
    for c in 0..classes {
        palette.extend(class_color(c));
    }
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette);
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(indices).map_err(|e| png_err(path, e))?;
    Ok(())
}
