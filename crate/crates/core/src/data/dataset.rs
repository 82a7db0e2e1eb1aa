//! Scene records, dataset ingestion (manifest and Cornell layouts), and the
//! manifest writer used by the synthetic generator.
//!
//! Manifest layout: `index.txt` lists scene directories one per line; each
//! directory holds `rgb.png` (8-bit RGB), `depth.png` (16-bit gray,
//! millimeters, 0 = invalid), `grasps.txt`, and optionally `hand_mask.png`
//! (8-bit, nonzero = hand).

use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::frame::RgbdFrame;
use super::grasp::{format_grasps, read_grasps, rects_to_quality, GraspRect, GroundTruthMaps};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub frame: RgbdFrame,
    pub gt: GroundTruthMaps,
    pub grasps: Vec<GraspRect>,
    pub hand_mask: Option<Mask>,
}

impl SceneRecord {
    pub fn new(
        id: impl Into<String>,
        frame: RgbdFrame,
        grasps: Vec<GraspRect>,
        hand_mask: Option<Mask>,
    ) -> Result<Self> {
        let (h, w) = frame.hw();
        if let Some(m) = &hand_mask {
            if m.hw() != (h, w) {
                return Err(Error::Shape(format!("hand mask {:?} for a {h}x{w} frame", m.hw())));
            }
        }
        let (gt, _) = rects_to_quality(&grasps, h, w);
        Ok(Self {
            id: id.into(),
            frame,
            gt,
            grasps,
            hand_mask,
        })
    }

    pub fn hw(&self) -> (usize, usize) {
        self.frame.hw()
    }
}

/// Loads every scene under `root` and splits it into `(train, test)`.
///
/// Records are shuffled with `seed`; the first `round(n·split_fraction)` go to
/// the training split.
pub fn load_dataset(root: &Path, split_fraction: f64, seed: u64) -> Result<(Vec<SceneRecord>, Vec<SceneRecord>)> {
    if !(0.0..=1.0).contains(&split_fraction) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {split_fraction} outside [0, 1]"
        )));
    }
    let records = load_all(root)?;
    Ok(split_records(records, split_fraction, seed))
}

pub fn split_records(
    mut records: Vec<SceneRecord>,
    split_fraction: f64,
    seed: u64,
) -> (Vec<SceneRecord>, Vec<SceneRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    let n_train = ((records.len() as f64 * split_fraction).round() as usize).min(records.len());
    let test = records.split_off(n_train);
    (records, test)
}

/// Loads every scene under `root` in index order.
pub fn load_all(root: &Path) -> Result<Vec<SceneRecord>> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let index = root.join("index.txt");
    let records = if index.is_file() {
        load_manifest(root, &index)?
    } else {
        load_cornell(root)?
    };
    if records.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(records)
}

fn load_manifest(root: &Path, index: &Path) -> Result<Vec<SceneRecord>> {
    let text = std::fs::read_to_string(index).map_err(|e| Error::io(index, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|name| load_manifest_scene(&root.join(name), name))
        .collect()
}

fn load_manifest_scene(dir: &Path, id: &str) -> Result<SceneRecord> {
    let rgb = read_rgb(&dir.join("rgb.png"))?;
    let depth_path = dir.join("depth.png");
    let (raw, valid) = read_depth_mm_png(&depth_path)?;
    if raw.len() != rgb.plane_len() {
        return Err(Error::format(&depth_path, "depth size differs from rgb.png"));
    }
    let frame = RgbdFrame::from_raw(rgb, &raw, valid).map_err(|e| Error::format(&depth_path, e.to_string()))?;
    let grasps = read_grasps(&dir.join("grasps.txt"))?;
    let hand_path = dir.join("hand_mask.png");
    let hand_mask = if hand_path.is_file() {
        Some(read_mask(&hand_path, frame.hw())?)
    } else {
        None
    };
    SceneRecord::new(id, frame, grasps, hand_mask)
}

fn load_cornell(root: &Path) -> Result<Vec<SceneRecord>> {
    let mut cpos: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("pcd") && n.ends_with("cpos.txt"))
        })
        .collect();
    cpos.sort();
    cpos.iter().map(|p| load_cornell_scene(p)).collect()
}

fn load_cornell_scene(cpos: &Path) -> Result<SceneRecord> {
    let name = cpos.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name.trim_end_matches("cpos.txt");
    let dir = cpos.parent().unwrap_or(Path::new("."));
    let rgb = read_rgb(&dir.join(format!("{stem}r.png")))?;
    let tiff_path = dir.join(format!("{stem}d.tiff"));
    let png_path = dir.join(format!("{stem}d.png"));
    let (raw, valid, depth_path) = if tiff_path.is_file() {
        let (r, v) = read_depth_tiff(&tiff_path)?;
        (r, v, tiff_path)
    } else {
        let (r, v) = read_depth_mm_png(&png_path)?;
        (r, v, png_path)
    };
    if raw.len() != rgb.plane_len() {
        return Err(Error::format(&depth_path, "depth size differs from rgb image"));
    }
    let frame = RgbdFrame::from_raw(rgb, &raw, valid).map_err(|e| Error::format(&depth_path, e.to_string()))?;
    let grasps = read_grasps(cpos)?;
    SceneRecord::new(stem, frame, grasps, None)
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    image::open(path).map_err(|e| Error::format(path, e.to_string()))
}

fn read_rgb(path: &Path) -> Result<Image> {
    let img = open_image(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let mut out = Image::zeros(3, h, w);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            out.set(c, y as usize, x as usize, px[c] as f64 / 255.0);
        }
    }
    Ok(out)
}

fn read_depth_mm_png(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    match open_image(path)? {
        DynamicImage::ImageLuma16(buf) => Ok(buf.pixels().map(|p| (p[0] as f64 / 1000.0, p[0] != 0)).unzip()),
        other => Err(Error::format(
            path,
            format!("expected 16-bit single-channel depth, found {:?}", other.color()),
        )),
    }
}

fn read_depth_tiff(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    use tiff::decoder::{Decoder, DecodingResult};
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |e: tiff::TiffError| Error::format(path, e.to_string());
    let mut dec = Decoder::new(std::io::BufReader::new(file)).map_err(bad)?;
    let vals: Vec<f64> = match dec.read_image().map_err(bad)? {
        DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F64(v) => v,
        DecodingResult::U16(v) => v.into_iter().map(|d| d as f64 / 1000.0).collect(),
        _ => return Err(Error::format(path, "unsupported depth sample type")),
    };
    Ok(vals
        .into_iter()
        .map(|d| {
            let ok = d.is_finite() && d > 0.0;
            (if ok { d } else { 0.0 }, ok)
        })
        .unzip())
}

fn read_mask(path: &Path, hw: (usize, usize)) -> Result<Mask> {
    let img = open_image(path)?.to_luma8();
    let (w, h) = img.dimensions();
    if (h as usize, w as usize) != hw {
        return Err(Error::format(path, "mask size differs from rgb.png"));
    }
    Mask::from_bits(hw.0, hw.1, img.pixels().map(|p| p[0] != 0).collect())
}

fn save_png(path: &Path, img: DynamicImage) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
}

/// Writes scenes in the manifest layout under `root`.
pub fn write_manifest_dataset(root: &Path, records: &[SceneRecord]) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut index = String::new();
    for rec in records {
        let dir = root.join(&rec.id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_scene(&dir, rec)?;
        index.push_str(&rec.id);
        index.push('\n');
    }
    let path = root.join("index.txt");
    std::fs::write(&path, index).map_err(|e| Error::io(&path, e))
}

fn write_scene(dir: &Path, rec: &SceneRecord) -> Result<()> {
    let (h, w) = rec.hw();
    let f = &rec.frame;
    let rgb = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let px = |c| (f.rgb.get(c, y as usize, x as usize) * 255.0).round() as u8;
        image::Rgb([px(0), px(1), px(2)])
    });
    save_png(&dir.join("rgb.png"), DynamicImage::ImageRgb8(rgb))?;

    let depth_m = f.depth_m();
    let depth: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        let mm = if f.valid[i] {
            (depth_m[i] * 1000.0).round().clamp(1.0, u16::MAX as f64) as u16
        } else {
            0
        };
        Luma([mm])
    });
    save_png(&dir.join("depth.png"), DynamicImage::ImageLuma16(depth))?;

    let gpath = dir.join("grasps.txt");
    std::fs::write(&gpath, format_grasps(&rec.grasps)).map_err(|e| Error::io(&gpath, e))?;

    if let Some(m) = &rec.hand_mask {
        let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
            Luma([if m.get(y as usize, x as usize) { 255 } else { 0 }])
        });
        save_png(&dir.join("hand_mask.png"), DynamicImage::ImageLuma8(img))?;
    }
    Ok(())
}
