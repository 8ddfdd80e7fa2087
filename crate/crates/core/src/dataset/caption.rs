use std::path::PathBuf;
use std::process::Command;

use super::manifest::DatasetManifest;
use super::DatasetError;
use crate::raster::Raster;

/// Image-to-text captioning model.
///
/// Implementations must be deterministic for a fixed configuration.
pub trait CaptionerAdapter {
    fn name(&self) -> &str;
    fn caption(&self, image: &Raster) -> Result<String, String>;
}

/// Replaces every record's caption with the adapter output.
///
/// Fails without touching the input if the adapter errors or returns an empty caption.
pub fn caption_records(
    manifest: &DatasetManifest,
    captioner: &dyn CaptionerAdapter,
) -> Result<DatasetManifest, DatasetError> {
    let mut out = manifest.clone();
    for record in &mut out.records {
        let failure = |reason: String| DatasetError::CaptionerFailure {
            name: captioner.name().to_string(),
            record: record.id.clone(),
            reason,
        };
        let text = captioner.caption(&record.image).map_err(failure)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(failure("empty caption".into()));
        }
        record.caption = text.to_string();
    }
    out.refresh_checksum();
    Ok(out)
}

const COLOR_NAMES: [(&str, [f64; 3]); 12] = [
    ("black", [0.05, 0.05, 0.05]),
    ("white", [0.95, 0.95, 0.95]),
    ("gray", [0.5, 0.5, 0.5]),
    ("red", [0.8, 0.1, 0.1]),
    ("orange", [0.95, 0.55, 0.1]),
    ("yellow", [0.95, 0.9, 0.2]),
    ("green", [0.15, 0.65, 0.2]),
    ("teal", [0.1, 0.55, 0.55]),
    ("blue", [0.15, 0.25, 0.8]),
    ("purple", [0.5, 0.2, 0.65]),
    ("pink", [0.95, 0.55, 0.7]),
    ("brown", [0.5, 0.3, 0.12]),
];

fn color_name(rgb: [f64; 3]) -> &'static str {
    COLOR_NAMES
        .iter()
        .min_by(|a, b| {
            let da: f64 = a.1.iter().zip(&rgb).map(|(p, q)| (p - q).powi(2)).sum();
            let db: f64 = b.1.iter().zip(&rgb).map(|(p, q)| (p - q).powi(2)).sum();
            da.total_cmp(&db)
        })
        .map(|c| c.0)
        .unwrap_or("gray")
}

/// Default in-repo captioner: names the dominant light and dark colours and the
/// dominant stroke direction, e.g. `"a blue and white vertical striped pattern"`.
#[derive(Debug, Clone, Default)]
pub struct TemplateCaptioner;

impl CaptionerAdapter for TemplateCaptioner {
    fn name(&self) -> &str {
        "template"
    }

    fn caption(&self, image: &Raster) -> Result<String, String> {
        if image.is_empty() || image.channels() != 3 {
            return Err("expected a non-empty RGB image".into());
        }
        let luma = image.luma();
        let mut order: Vec<usize> = (0..luma.len()).collect();
        order.sort_by(|&a, &b| luma.data()[a].total_cmp(&luma.data()[b]).then(a.cmp(&b)));
        let half = (order.len() / 2).max(1);
        let mean_of = |idx: &[usize]| {
            let mut acc = [0.0; 3];
            for &i in idx {
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += image.data()[i * 3 + c];
                }
            }
            acc.map(|v| v / idx.len() as f64)
        };
        let dark = color_name(mean_of(&order[..half]));
        let light = color_name(mean_of(&order[order.len() - half..]));

        let (mut gx, mut gy) = (0.0, 0.0);
        for y in 0..luma.height() as isize {
            for x in 0..luma.width() as isize {
                let c = luma.get_wrapped(y, x, 0);
                gx += (luma.get_wrapped(y, x + 1, 0) - c).abs();
                gy += (luma.get_wrapped(y + 1, x, 0) - c).abs();
            }
        }
        let total = gx + gy;
        let structure = if total < 1e-6 * luma.len() as f64 {
            "plain"
        } else if gx > 3.0 * gy {
            "vertical striped"
        } else if gy > 3.0 * gx {
            "horizontal striped"
        } else {
            "geometric"
        };
        let colors = if dark == light {
            dark.to_string()
        } else {
            format!("{light} and {dark}")
        };
        Ok(format!("a {colors} {structure} pattern"))
    }
}

/// Runs an external program per image: `program [args..] <png-path>`; stdout is the caption.
#[derive(Debug, Clone)]
pub struct ExternalCaptioner {
    pub program: String,
    pub args: Vec<String>,
    pub scratch_dir: PathBuf,
}

impl ExternalCaptioner {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            scratch_dir: std::env::temp_dir(),
        }
    }
}

impl CaptionerAdapter for ExternalCaptioner {
    fn name(&self) -> &str {
        &self.program
    }

    fn caption(&self, image: &Raster) -> Result<String, String> {
        let id = super::manifest::content_id(image);
        let path = self.scratch_dir.join(format!("ttx-caption-{id}.png"));
        image.save_png(&path).map_err(|e| e.to_string())?;
        let output = Command::new(&self.program).args(&self.args).arg(&path).output();
        let _ = std::fs::remove_file(&path);
        let output = output.map_err(|e| format!("failed to run {}: {e}", self.program))?;
        if !output.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        Ok(String::from_utf8_lossy(&output.stdout).trim().to_string())
    }
}
