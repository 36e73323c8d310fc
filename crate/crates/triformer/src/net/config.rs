//! Model hyperparameters and the shape algebra they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of a Tri-Former classifier.
///
/// `stage_widths[0]` is the stem width; each later entry is one ViT stage,
/// entered through a stride-2 downsample conv that doubles the channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriFormerConfig {
    /// Band count of the raw input cube (before stem compression).
    pub in_bands: usize,
    /// Spatial patch extent; odd so the center pixel is defined.
    #[serde(default = "default_patch")]
    pub patch: usize,
    #[serde(default = "default_stem_width")]
    pub stem_width: usize,
    /// Stem width followed by one width per ViT stage, strictly doubling.
    #[serde(default = "default_stage_widths")]
    pub stage_widths: Vec<usize>,
    /// Blocks per ViT stage.
    #[serde(default = "default_stage_depths")]
    pub stage_depths: Vec<usize>,
    /// Attention heads per ViT stage; empty = `max(1, width / 32)`.
    #[serde(default)]
    pub heads_per_stage: Vec<usize>,
    /// Channel-mixer expansion factor.
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: usize,
    /// Spectral stride of the stem compression conv.
    #[serde(default = "default_spectral_stride")]
    pub spectral_stride: usize,
    pub num_classes: usize,
}

fn default_patch() -> usize {
    27
}
fn default_stem_width() -> usize {
    32
}
fn default_stage_widths() -> Vec<usize> {
    vec![32, 64, 128, 256]
}
fn default_stage_depths() -> Vec<usize> {
    vec![2, 2, 2]
}
fn default_mlp_ratio() -> usize {
    4
}
fn default_spectral_stride() -> usize {
    2
}

impl TriFormerConfig {
    /// Default-size model for the given input.
    pub fn new(in_bands: usize, num_classes: usize) -> Self {
        TriFormerConfig {
            in_bands,
            patch: default_patch(),
            stem_width: default_stem_width(),
            stage_widths: default_stage_widths(),
            stage_depths: default_stage_depths(),
            heads_per_stage: Vec::new(),
            mlp_ratio: default_mlp_ratio(),
            spectral_stride: default_spectral_stride(),
            num_classes,
        }
    }

    /// The tiny preset used for auxiliary branches: 13×13 patches, widths
    /// [16, 32, 64, 128], one block per stage.
    pub fn tiny(in_bands: usize, num_classes: usize) -> Self {
        TriFormerConfig {
            patch: 13,
            stem_width: 16,
            stage_widths: vec![16, 32, 64, 128],
            stage_depths: vec![1, 1, 1],
            ..TriFormerConfig::new(in_bands, num_classes)
        }
    }

    /// Fills derived defaults (head counts) and validates every invariant.
    pub fn normalize(mut self) -> Result<Self> {
        if self.heads_per_stage.is_empty() {
            self.heads_per_stage = self.stage_widths[1..]
                .iter()
                .map(|w| (w / 32).max(1))
                .collect();
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_bands < 2 {
            return Err(Error::config(format!(
                "in_bands must be at least 2, got {}",
                self.in_bands
            )));
        }
        if self.patch % 2 == 0 || self.patch == 0 {
            return Err(Error::config(format!("patch must be odd, got {}", self.patch)));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        if self.mlp_ratio == 0 {
            return Err(Error::config("mlp_ratio must be positive"));
        }
        if self.spectral_stride == 0 {
            return Err(Error::config("spectral_stride must be positive"));
        }
        if self.stage_widths.len() != self.stage_depths.len() + 1 {
            return Err(Error::config(format!(
                "expected {} stage widths (stem + one per stage), got {}",
                self.stage_depths.len() + 1,
                self.stage_widths.len()
            )));
        }
        if self.stage_widths.is_empty() || self.stage_widths[0] != self.stem_width {
            return Err(Error::config(format!(
                "stage_widths[0] ({:?}) must equal stem_width ({})",
                self.stage_widths.first(),
                self.stem_width
            )));
        }
        if self.stem_width == 0 {
            return Err(Error::config("stem_width must be positive"));
        }
        for pair in self.stage_widths.windows(2) {
            if pair[1] != 2 * pair[0] {
                return Err(Error::config(format!(
                    "stage widths must double stage to stage, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        if self.heads_per_stage.len() != self.stage_depths.len() {
            return Err(Error::config(format!(
                "expected {} head counts, got {}",
                self.stage_depths.len(),
                self.heads_per_stage.len()
            )));
        }
        for (heads, width) in self.heads_per_stage.iter().zip(&self.stage_widths[1..]) {
            if *heads == 0 || width % heads != 0 {
                return Err(Error::config(format!(
                    "stage width {width} not divisible by {heads} heads"
                )));
            }
        }
        Ok(())
    }

    /// `[H, W, L]` after the stem, then after each downsample.
    pub fn stage_extents(&self) -> Vec<[usize; 3]> {
        let ceil_div = |n: usize, d: usize| n.div_ceil(d);
        let mut dims = [self.patch, self.patch, ceil_div(self.in_bands, self.spectral_stride)];
        let mut chain = vec![dims];
        for _ in &self.stage_depths {
            dims = [ceil_div(dims[0], 2), ceil_div(dims[1], 2), ceil_div(dims[2], 2)];
            chain.push(dims);
        }
        chain
    }

    /// Channel count entering the classifier head.
    pub fn feature_width(&self) -> usize {
        *self.stage_widths.last().expect("validated non-empty")
    }
}
