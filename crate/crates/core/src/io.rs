//! Files: dataset manifests, images and labels, edge-map PNGs and checkpoints.
//!
//! Checkpoint layout (all integers little-endian `u32`):
//!
//! ```text
//! "TINCKPT1"  variant-tag
//! repeated:   name_len  name(utf-8)  rank  dims[rank]  data(f32 LE × ∏dims)
//! crc32 of every preceding byte
//! ```
//!
//! Enrichment branch `b` is stored under `enrich{i}.b{b}` and is rebuilt with
//! dilation rate `2^b`, so only networks with rates `1, 2, 4, …` can be saved.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::augment::Sample;
use crate::error::{Error, Result};
use crate::maps::{EdgeMap, GroundTruth};
use crate::model::{EnrichmentSpec, Network, Variant};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TINCKPT1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub gt: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses `image<TAB>gt` lines; blank lines and `#` comments are skipped.
/// Relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, source: &Path, base: &Path) -> Result<Manifest> {
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut parts = line.split('\t');
        let (Some(img), Some(gt), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected `image<TAB>gt`".into()));
        };
        let (img, gt) = (img.trim(), gt.trim());
        if img.is_empty() || gt.is_empty() {
            return Err(err("empty path".into()));
        }
        let image = base.join(img);
        if entries.iter().any(|e| e.image == image) {
            return Err(err(format!("duplicate image path {img}")));
        }
        entries.push(ManifestEntry {
            image,
            gt: base.join(gt),
        });
    }
    Ok(Manifest { entries })
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path, path.parent().unwrap_or(Path::new("")))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let image_err = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(image_err)
}

/// 8-bit RGB (or gray, replicated) as `[1, 3, H, W]` scaled by 1/255.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let img = decode(path)?;
    let rgb = match img {
        DynamicImage::ImageRgb8(rgb) => rgb,
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => img.to_rgb8(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                msg: format!("{:?} (8-bit images only)", other.color()),
            })
        }
    };
    Ok(image_to_tensor(&rgb))
}

pub fn image_to_tensor(rgb: &RgbImage) -> Tensor<f32> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut data = vec![0f32; 3 * h * w];
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            data[(c * h + y as usize) * w + x as usize] = px[c] as f32 / 255.0;
        }
    }
    Tensor::new(vec![1, 3, h, w], data).expect("sizes agree")
}

/// Inverse of [`image_to_tensor`] with rounding and clamping.
pub fn tensor_to_image(t: &Tensor<f32>) -> Result<RgbImage> {
    let (_, c, h, w) = t.dims4()?;
    if c != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {c}")));
    }
    let d = t.data();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let at = |ch: usize| (d[(ch * h + y as usize) * w + x as usize].clamp(0.0, 1.0) * 255.0).round() as u8;
        image::Rgb([at(0), at(1), at(2)])
    }))
}

/// Single-channel 8-bit labels (PNG or PGM), values kept as `0..=255`.
pub fn load_gt(path: &Path) -> Result<GroundTruth> {
    match decode(path)? {
        DynamicImage::ImageLuma8(g) => {
            GroundTruth::new(g.height() as usize, g.width() as usize, g.into_raw())
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            msg: format!("{:?} (ground truth must be 8-bit single channel)", other.color()),
        }),
    }
}

pub fn save_gt(gt: &GroundTruth, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(gt.width as u32, gt.height as u32, gt.values.clone()).expect("sizes agree");
    save(DynamicImage::ImageLuma8(img), path)
}

pub fn save_image(t: &Tensor<f32>, path: &Path) -> Result<()> {
    save(DynamicImage::ImageRgb8(tensor_to_image(t)?), path)
}

/// 8-bit grayscale PNG with value `round(255·p)`.
pub fn save_edge_map(map: &EdgeMap, path: &Path) -> Result<()> {
    save(DynamicImage::ImageLuma8(edge_map_to_gray(map)), path)
}

pub fn edge_map_to_gray(map: &EdgeMap) -> GrayImage {
    let bytes = map.data.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    GrayImage::from_raw(map.width as u32, map.height as u32, bytes).expect("sizes agree")
}

/// Reads an 8-bit map back as probabilities `v / 255`.
pub fn load_edge_map(path: &Path) -> Result<EdgeMap> {
    let gt = load_gt(path)?;
    EdgeMap::new(gt.height, gt.width, gt.values.iter().map(|&v| v as f64 / 255.0).collect())
}

fn save(img: DynamicImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every manifest entry, checking that image and labels agree in size.
pub fn load_samples(manifest: &Manifest) -> Result<Vec<Sample>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let image = load_image(&e.image)?;
            let gt = load_gt(&e.gt)?;
            let (_, _, h, w) = image.dims4()?;
            if (h, w) != (gt.height, gt.width) {
                return Err(Error::Shape(format!(
                    "{}: image {h}x{w} but ground truth {}x{}",
                    e.image.display(),
                    gt.height,
                    gt.width
                )));
            }
            Ok(Sample { image, gt })
        })
        .collect()
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn checkpoint_bytes(net: &Network<f32>) -> Result<Vec<u8>> {
    for e in net.enrichments() {
        let representable = e.dilation_rates.iter().enumerate().all(|(b, &r)| r == 1 << b);
        if !representable {
            return Err(Error::Checkpoint(format!(
                "dilation rates {:?} cannot be stored; branch b must use rate 2^b",
                e.dilation_rates
            )));
        }
    }
    let mut out = Vec::with_capacity(16 + 4 * net.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&net.variant().tag().to_le_bytes());
    for p in net.params() {
        put_u32(&mut out, p.name.len())?;
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.tensor.shape().len())?;
        for &d in p.tensor.shape() {
            put_u32(&mut out, d)?;
        }
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of tensor data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Network<f32>> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
        return Err(Error::Checkpoint(format!("file too short ({} bytes)", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let tag = r.u32()? as u32;
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown variant tag {tag}")))?;

    let mut tensors: Vec<(String, Tensor<f32>)> = Vec::new();
    while r.pos < body.len() {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let numel = numel.ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflow")))?;
        let raw = r.take(numel.checked_mul(4).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if tensors.iter().any(|(n, _)| *n == name) {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
        tensors.push((name, Tensor::new(shape, data)?));
    }

    let specs = match variant {
        Variant::Tin1 => vec![enrichment_from(&tensors, 1)?],
        Variant::Tin2 => vec![enrichment_from(&tensors, 1)?, enrichment_from(&tensors, 3)?],
    };
    let mut net = Network::build(variant, specs)?;
    if net.params().len() != tensors.len() {
        let extra: Vec<&str> = tensors
            .iter()
            .map(|(n, _)| n.as_str())
            .filter(|n| net.param(n).is_none())
            .collect();
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {} (unexpected: {extra:?})",
            net.params().len(),
            tensors.len()
        )));
    }
    for (name, t) in tensors {
        let p = net
            .param_mut(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
        if p.tensor.shape() != t.shape() {
            return Err(Error::Checkpoint(format!(
                "{name}: stored shape {:?}, expected {:?}",
                t.shape(),
                p.tensor.shape()
            )));
        }
        p.tensor = t;
    }
    Ok(net)
}

/// Recovers the Enrichment shape of block `i` from its branch tensors.
fn enrichment_from(tensors: &[(String, Tensor<f32>)], i: usize) -> Result<EnrichmentSpec> {
    let prefix = format!("enrich{i}.b");
    let mut branches = 0;
    let mut dims = None;
    while let Some((_, t)) = tensors.iter().find(|(n, _)| *n == format!("{prefix}{branches}.weight")) {
        dims.get_or_insert_with(|| t.shape().to_vec());
        branches += 1;
    }
    match dims.as_deref() {
        Some(&[out, cin, _, _]) => EnrichmentSpec::new(cin, out, (0..branches).map(|b| 1 << b).collect()),
        _ => Err(Error::Checkpoint(format!("missing tensor {prefix}0.weight"))),
    }
}

pub fn save_checkpoint(net: &Network<f32>, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(net)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network<f32>> {
    checkpoint_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
