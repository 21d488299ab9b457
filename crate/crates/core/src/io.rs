//! File formats: the line-oriented dataset format, the JSON result format,
//! and binary PGM (P5) images.
//!
//! Datasets store image coordinates in raw pixel convention (origin at the
//! top-left corner). Loading converts to centered coordinates with the
//! principal point at the image center `(height/2, width/2)` and scales by
//! the half diagonal, so solvers always operate on normalized units with
//! the reference row at zero.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GrayImage;
use crate::geom::{Correspondence, ImagePoint, RotationMatrix, RsCameraModel, ScenePoint};
use crate::synth::SynthDataset;

/// One record of the dataset file, raw pixel convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecord {
    pub r: f64,
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub inlier: Option<bool>,
}

/// Ground-truth block: the generating model in raw pixel units plus the
/// reference-row orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
    pub c0: Vector3<f64>,
    pub t: Vector3<f64>,
    pub f_px: f64,
    pub lambda_px: f64,
    pub rot0: Matrix3<f64>,
    pub seed: Option<u64>,
}

/// In-memory form of the `RSPOSE v1` dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub width: u32,
    pub height: u32,
    pub records: Vec<DatasetRecord>,
    pub gt: Option<GroundTruth>,
}

/// Conversion constants between raw pixel and centered normalized frames.
#[derive(Debug, Clone, Copy)]
pub struct NormContext {
    pub cx: f64,
    pub cy: f64,
    /// Half image diagonal in pixels.
    pub scale: f64,
}

impl NormContext {
    pub fn new(width: u32, height: u32) -> Self {
        let w = width as f64;
        let h = height as f64;
        Self { cx: w * 0.5, cy: h * 0.5, scale: (w * w + h * h).sqrt() * 0.5 }
    }

    pub fn raw_to_normalized(&self, r: f64, c: f64) -> ImagePoint<f64> {
        ImagePoint::new((r - self.cy) / self.scale, (c - self.cx) / self.scale)
    }

    pub fn normalized_to_raw(&self, p: &ImagePoint<f64>) -> (f64, f64) {
        (p.r * self.scale + self.cy, p.c * self.scale + self.cx)
    }

    /// Converts a model estimated in normalized units to pixel units.
    /// Per-row rates divide by the scale; `lambda` returns to per-px^2.
    pub fn model_to_px(&self, m: &RsCameraModel<f64>) -> RsCameraModel<f64> {
        let s = self.scale;
        RsCameraModel {
            v: m.v,
            w: m.w / s,
            c0: m.c0,
            t: m.t / s,
            f: m.f * s,
            lambda: m.lambda / (s * s),
            r0: m.r0 * s,
        }
    }

    pub fn model_to_normalized(&self, m: &RsCameraModel<f64>) -> RsCameraModel<f64> {
        let s = self.scale;
        RsCameraModel {
            v: m.v,
            w: m.w * s,
            c0: m.c0,
            t: m.t * s,
            f: m.f / s,
            lambda: m.lambda * s * s,
            r0: m.r0 / s,
        }
    }
}

impl DatasetFile {
    pub fn norm_context(&self) -> NormContext {
        NormContext::new(self.width, self.height)
    }

    /// Solver inputs: centered normalized correspondences.
    pub fn to_correspondences(&self) -> Vec<Correspondence<f64>> {
        let ctx = self.norm_context();
        self.records
            .iter()
            .map(|rec| Correspondence {
                image: ctx.raw_to_normalized(rec.r, rec.c),
                scene: ScenePoint::new(rec.x, rec.y, rec.z),
            })
            .collect()
    }

    /// Ground-truth model in normalized units, when present.
    pub fn gt_normalized(&self) -> Option<(RsCameraModel<f64>, RotationMatrix<f64>)> {
        let gt = self.gt.as_ref()?;
        let ctx = self.norm_context();
        let px = RsCameraModel {
            v: gt.v,
            w: gt.w,
            c0: gt.c0,
            t: gt.t,
            f: gt.f_px,
            lambda: gt.lambda_px,
            r0: 0.0,
        };
        Some((
            ctx.model_to_normalized(&px),
            RotationMatrix::new_unchecked(gt.rot0),
        ))
    }

    pub fn from_synth(ds: &SynthDataset) -> Self {
        let ctx = NormContext::new(ds.config.image_width, ds.config.image_height);
        let records = ds
            .correspondences
            .iter()
            .zip(ds.inlier_labels.iter())
            .map(|(corr, &inlier)| {
                let (r, c) = (corr.image.r + ctx.cy, corr.image.c + ctx.cx);
                DatasetRecord {
                    r,
                    c,
                    x: corr.scene.x,
                    y: corr.scene.y,
                    z: corr.scene.z,
                    inlier: Some(inlier),
                }
            })
            .collect();
        DatasetFile {
            width: ds.config.image_width,
            height: ds.config.image_height,
            records,
            gt: Some(GroundTruth {
                v: ds.gt.v,
                w: ds.gt.w,
                c0: ds.gt.c0,
                t: ds.gt.t,
                f_px: ds.gt.f,
                lambda_px: ds.gt.lambda,
                rot0: *ds.gt_r0.matrix(),
                seed: Some(ds.config.seed),
            }),
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_vec3(out: &mut String, key: &str, v: &Vector3<f64>) {
    let _ = writeln!(out, "{key} {} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
}

/// Serializes a dataset to the line-oriented text format.
pub fn dataset_to_string(ds: &DatasetFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "RSPOSE v1 {} {}", ds.width, ds.height);
    for rec in &ds.records {
        let _ = write!(
            out,
            "{} {} {} {} {}",
            fmt_f64(rec.r),
            fmt_f64(rec.c),
            fmt_f64(rec.x),
            fmt_f64(rec.y),
            fmt_f64(rec.z)
        );
        match rec.inlier {
            Some(flag) => {
                let _ = writeln!(out, " {}", if flag { 1 } else { 0 });
            }
            None => {
                let _ = writeln!(out);
            }
        }
    }
    if let Some(gt) = &ds.gt {
        let _ = writeln!(out, "GT");
        let _ = writeln!(out, "f {}", fmt_f64(gt.f_px));
        let _ = writeln!(out, "lambda {}", fmt_f64(gt.lambda_px));
        write_vec3(&mut out, "v", &gt.v);
        write_vec3(&mut out, "w", &gt.w);
        write_vec3(&mut out, "c0", &gt.c0);
        write_vec3(&mut out, "t", &gt.t);
        let m = &gt.rot0;
        let _ = write!(out, "rot0");
        for i in 0..3 {
            for j in 0..3 {
                let _ = write!(out, " {}", fmt_f64(m[(i, j)]));
            }
        }
        let _ = writeln!(out);
        if let Some(seed) = gt.seed {
            let _ = writeln!(out, "seed {seed}");
        }
    }
    out
}

fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line_no}: bad number `{tok}`")))
}

/// Parses the line-oriented text format.
pub fn dataset_from_str(text: &str) -> Result<DatasetFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "RSPOSE" || toks[1] != "v1" {
        return Err(Error::Parse("expected header `RSPOSE v1 <width> <height>`".into()));
    }
    let width: u32 = toks[2]
        .parse()
        .map_err(|_| Error::Parse("bad width".into()))?;
    let height: u32 = toks[3]
        .parse()
        .map_err(|_| Error::Parse("bad height".into()))?;

    let mut records = Vec::new();
    let mut gt: Option<GroundTruth> = None;
    let mut in_gt = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "GT" {
            in_gt = true;
            gt = Some(GroundTruth {
                v: Vector3::zeros(),
                w: Vector3::zeros(),
                c0: Vector3::zeros(),
                t: Vector3::zeros(),
                f_px: 0.0,
                lambda_px: 0.0,
                rot0: Matrix3::identity(),
                seed: None,
            });
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !in_gt {
            if toks.len() != 5 && toks.len() != 6 {
                return Err(Error::Parse(format!(
                    "line {line_no}: expected `r c X Y Z [inlier]`"
                )));
            }
            let vals: Result<Vec<f64>> =
                toks[..5].iter().map(|t| parse_f64(t, line_no)).collect();
            let vals = vals?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("line {line_no}: non-finite value")));
            }
            let inlier = if toks.len() == 6 {
                Some(match toks[5] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {line_no}: bad inlier flag `{other}`"
                        )))
                    }
                })
            } else {
                None
            };
            records.push(DatasetRecord {
                r: vals[0],
                c: vals[1],
                x: vals[2],
                y: vals[3],
                z: vals[4],
                inlier,
            });
        } else {
            let gt = gt.as_mut().expect("inside GT block");
            let key = toks[0];
            let nums: Result<Vec<f64>> =
                toks[1..].iter().map(|t| parse_f64(t, line_no)).collect();
            let nums = nums?;
            let need = |n: usize| -> Result<()> {
                if nums.len() != n {
                    Err(Error::Parse(format!(
                        "line {line_no}: key `{key}` expects {n} values"
                    )))
                } else {
                    Ok(())
                }
            };
            match key {
                "f" => {
                    need(1)?;
                    gt.f_px = nums[0];
                }
                "lambda" => {
                    need(1)?;
                    gt.lambda_px = nums[0];
                }
                "v" => {
                    need(3)?;
                    gt.v = Vector3::new(nums[0], nums[1], nums[2]);
                }
                "w" => {
                    need(3)?;
                    gt.w = Vector3::new(nums[0], nums[1], nums[2]);
                }
                "c0" => {
                    need(3)?;
                    gt.c0 = Vector3::new(nums[0], nums[1], nums[2]);
                }
                "t" => {
                    need(3)?;
                    gt.t = Vector3::new(nums[0], nums[1], nums[2]);
                }
                "rot0" => {
                    need(9)?;
                    gt.rot0 = Matrix3::from_row_slice(&nums);
                }
                "seed" => {
                    need(1)?;
                    gt.seed = Some(nums[0] as u64);
                }
                other => {
                    return Err(Error::Parse(format!(
                        "line {line_no}: unknown GT key `{other}`"
                    )))
                }
            }
        }
    }
    Ok(DatasetFile { width, height, records, gt })
}

pub fn write_dataset(path: &Path, ds: &DatasetFile) -> Result<()> {
    fs::write(path, dataset_to_string(ds))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let text = fs::read_to_string(path)?;
    dataset_from_str(&text)
}

/// Serialized solver result; units are embedded so the file stands alone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultFile {
    pub artifact_version: String,
    pub solver: String,
    pub image_width: u32,
    pub image_height: u32,
    /// Half image diagonal used to normalize; `lambda` is per squared
    /// normalized radius, `w`/`t` are per normalized row unit.
    pub norm_scale: f64,
    pub v: [f64; 3],
    pub w: [f64; 3],
    pub c0: [f64; 3],
    pub t: [f64; 3],
    /// Focal length in pixels.
    pub f_px: f64,
    /// Distortion coefficient in normalized units.
    pub lambda_norm: f64,
    /// Reference row, centered pixels.
    pub r0_px: f64,
    /// Pre-rotation applied to the scene, row major.
    pub r_gs: [[f64; 3]; 3],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inlier_mask: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inlier_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inlier_count_pre_lo: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Elimination template dimensions for the distortion solver.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub template_dims: Option<(usize, usize)>,
    /// Echo of the command-line configuration that produced this result.
    pub config_echo: serde_json::Value,
}

impl ResultFile {
    /// Reconstructs the estimated model in normalized units.
    pub fn model_normalized(&self) -> RsCameraModel<f64> {
        RsCameraModel {
            v: Vector3::from_column_slice(&self.v),
            w: Vector3::from_column_slice(&self.w),
            c0: Vector3::from_column_slice(&self.c0),
            t: Vector3::from_column_slice(&self.t),
            f: self.f_px / self.norm_scale,
            lambda: self.lambda_norm,
            r0: self.r0_px / self.norm_scale,
        }
    }

    /// Model in centered pixel units (for image rectification).
    pub fn model_px(&self) -> RsCameraModel<f64> {
        let ctx = NormContext::new(self.image_width, self.image_height);
        ctx.model_to_px(&self.model_normalized())
    }

    pub fn rotation_gs(&self) -> RotationMatrix<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.r_gs[i][j];
            }
        }
        RotationMatrix::new_unchecked(m)
    }
}

pub fn write_result(path: &Path, result: &ResultFile) -> Result<()> {
    let json = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Parse(format!("serialize result: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_result(path: &Path) -> Result<ResultFile> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("parse result: {e}")))
}

/// Writes an 8-bit binary PGM (P5).
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.samples)?;
    Ok(())
}

/// Reads an 8-bit binary PGM (P5), tolerating comment lines in the header.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut fields = Vec::new();
    // Header: magic, width, height, maxval separated by whitespace/comments.
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated pgm header".into()));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| Error::Parse("bad pgm header".into()))?
                .to_string(),
        );
    }
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("expected P5 pgm, got `{}`", fields[0])));
    }
    let width: u32 = fields[1].parse().map_err(|_| Error::Parse("bad pgm width".into()))?;
    let height: u32 = fields[2].parse().map_err(|_| Error::Parse("bad pgm height".into()))?;
    if fields[3] != "255" {
        return Err(Error::Parse("only 8-bit pgm supported".into()));
    }
    pos += 1; // single whitespace after maxval
    let n = (width as usize) * (height as usize);
    if bytes.len() < pos + n {
        return Err(Error::Parse("truncated pgm data".into()));
    }
    Ok(GrayImage { width, height, samples: bytes[pos..pos + n].to_vec() })
}
