//! Labeled synthetic pairs for exercising the filters.
//!
//! Each pair is a drawn "portrait" (textured background, elliptical face
//! with eyes and optionally visible teeth) plus a generated counterpart
//! carrying exactly one kind of defect:
//!
//! * `clean`: face recolored, everything else untouched
//! * `misaligned`: face recolored, generated masks translated
//! * `nomakeup`: generated image byte-identical to the source
//! * `bgshift`: face recolored and a band of background shifted in intensity

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::filters::FilterName;
use crate::model::{
    mask_path_for, save_image, save_mask, write_manifest, ImageBuffer, Mask, PairRecord, Region,
    RegionMaskSet,
};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
const PAIR_DIR: &str = "pairs";

const MAKEUP_WORDS: [&str; 8] = [
    "smoky", "coral", "glossy", "matte", "rosy", "bronze", "cherry", "peach",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectClass {
    Clean,
    Misaligned,
    NoMakeup,
    BgShift,
}

impl DefectClass {
    pub const ALL: [DefectClass; 4] = [
        DefectClass::Clean,
        DefectClass::Misaligned,
        DefectClass::NoMakeup,
        DefectClass::BgShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::Clean => "clean",
            DefectClass::Misaligned => "misaligned",
            DefectClass::NoMakeup => "nomakeup",
            DefectClass::BgShift => "bgshift",
        }
    }

    /// Filters the class is built to fail.
    pub fn expected_failures(self) -> Vec<FilterName> {
        match self {
            DefectClass::Clean => vec![],
            DefectClass::Misaligned => vec![FilterName::Misalignment],
            DefectClass::NoMakeup => vec![FilterName::MakeupFailed],
            DefectClass::BgShift => vec![FilterName::Background],
        }
    }
}

impl FromStr for DefectClass {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        DefectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ForgeError::Config(format!("unknown defect class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub clean: usize,
    pub misaligned: usize,
    pub nomakeup: usize,
    pub bgshift: usize,
}

impl ClassCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            clean: n,
            misaligned: n,
            nomakeup: n,
            bgshift: n,
        }
    }

    pub fn get(&self, class: DefectClass) -> usize {
        match class {
            DefectClass::Clean => self.clean,
            DefectClass::Misaligned => self.misaligned,
            DefectClass::NoMakeup => self.nomakeup,
            DefectClass::BgShift => self.bgshift,
        }
    }

    pub fn total(&self) -> usize {
        self.clean + self.misaligned + self.nomakeup + self.bgshift
    }
}

/// Parses `clean=25,misaligned=25,nomakeup=25,bgshift=25`; omitted classes are 0.
impl FromStr for ClassCounts {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        let mut counts = ClassCounts::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| ForgeError::Config(format!("expected class=count, got {part:?}")))?;
            let n: usize = value
                .trim()
                .parse()
                .map_err(|_| ForgeError::Config(format!("bad count in {part:?}")))?;
            match name.trim().parse::<DefectClass>()? {
                DefectClass::Clean => counts.clean = n,
                DefectClass::Misaligned => counts.misaligned = n,
                DefectClass::NoMakeup => counts.nomakeup = n,
                DefectClass::BgShift => counts.bgshift = n,
            }
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub counts: ClassCounts,
    pub width: u32,
    pub height: u32,
    /// Mask translation for misaligned pairs, as a fraction of face width.
    pub mask_shift: f64,
}

impl CorpusSpec {
    pub fn new(seed: u64, counts: ClassCounts, width: u32, height: u32) -> Self {
        Self {
            seed,
            counts,
            width,
            height,
            mask_shift: 0.15,
        }
    }
}

/// Ground truth for one generated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLabel {
    pub id: String,
    pub class: DefectClass,
    pub expected_failures: Vec<FilterName>,
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub manifest_path: PathBuf,
    pub labels_path: PathBuf,
    pub records: Vec<PairRecord>,
    pub labels: Vec<CorpusLabel>,
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<CorpusLabel>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ForgeError::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ForgeError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        labels.push(
            serde_json::from_str(&line).map_err(|e| ForgeError::ManifestParse {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(labels)
}

/// Writes images, masks, `manifest.jsonl` and `labels.jsonl` under `out_dir`.
///
/// Output bytes depend only on `spec`.
pub fn gen_synthetic_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<GeneratedCorpus> {
    if spec.width < 64 || spec.height < 64 {
        return Err(ForgeError::Config(format!(
            "corpus dimensions {}x{} are below the 64x64 minimum",
            spec.width, spec.height
        )));
    }
    let pair_dir = out_dir.join(PAIR_DIR);
    std::fs::create_dir_all(&pair_dir).map_err(|e| ForgeError::io(&pair_dir, e))?;

    let mut classes: Vec<DefectClass> = DefectClass::ALL
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, spec.counts.get(c)))
        .collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    classes.shuffle(&mut order_rng);

    let records = classes
        .par_iter()
        .enumerate()
        .map(|(index, &class)| write_pair(spec, out_dir, index, class))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<CorpusLabel> = records
        .iter()
        .zip(&classes)
        .map(|(r, &class)| CorpusLabel {
            id: r.id.clone(),
            class,
            expected_failures: class.expected_failures(),
        })
        .collect();

    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &records)?;
    let labels_path = out_dir.join(LABELS_FILE);
    let file = File::create(&labels_path).map_err(|e| ForgeError::io(&labels_path, e))?;
    let mut w = BufWriter::new(file);
    for l in &labels {
        writeln!(w, "{}", serde_json::to_string(l).expect("label serializes"))
            .map_err(|e| ForgeError::io(&labels_path, e))?;
    }
    w.flush().map_err(|e| ForgeError::io(&labels_path, e))?;

    Ok(GeneratedCorpus {
        manifest_path,
        labels_path,
        records,
        labels,
    })
}

struct Face {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    teeth: bool,
}

fn in_ellipse(x: u32, y: u32, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let dx = (x as f64 + 0.5 - cx) / rx;
    let dy = (y as f64 + 0.5 - cy) / ry;
    dx * dx + dy * dy <= 1.0
}

fn draw_masks(face: &Face, w: u32, h: u32) -> RegionMaskSet {
    let band = (w.min(h) as f64 / 48.0).max(2.0);
    let face_mask = Mask::from_fn(w, h, |x, y| {
        in_ellipse(x, y, face.cx, face.cy, face.rx, face.ry)
    });
    let contour = Mask::from_fn(w, h, |x, y| {
        in_ellipse(x, y, face.cx, face.cy, face.rx, face.ry)
            && !in_ellipse(x, y, face.cx, face.cy, face.rx - band, face.ry - band)
    });
    let (erx, ery) = (0.16 * face.rx, 0.09 * face.ry);
    let ey = face.cy - 0.25 * face.ry;
    let eyes = Mask::from_fn(w, h, |x, y| {
        in_ellipse(x, y, face.cx - 0.4 * face.rx, ey, erx, ery)
            || in_ellipse(x, y, face.cx + 0.4 * face.rx, ey, erx, ery)
    });
    let teeth = if face.teeth {
        let ty = face.cy + 0.5 * face.ry;
        Mask::from_fn(w, h, |x, y| {
            in_ellipse(x, y, face.cx, ty, 0.25 * face.rx, 0.08 * face.ry)
        })
    } else {
        Mask::zeros(w, h)
    };
    RegionMaskSet::new(face_mask, eyes, teeth, contour).expect("masks share dimensions")
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn draw_source(rng: &mut ChaCha8Rng, masks: &RegionMaskSet, w: u32, h: u32) -> ImageBuffer {
    let base: [f64; 3] = [
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
        rng.gen_range(40.0..200.0),
    ];
    let grad: [f64; 3] = [
        rng.gen_range(-40.0..40.0),
        rng.gen_range(-40.0..40.0),
        rng.gen_range(-40.0..40.0),
    ];
    let skin = [
        rng.gen_range(170.0..210.0),
        rng.gen_range(130.0..165.0),
        rng.gen_range(110.0..145.0),
    ];
    let mut img = ImageBuffer::filled(w, h, 3, 0).expect("positive extents");
    for y in 0..h {
        for x in 0..w {
            let t = (x + y) as f64 / (w + h) as f64;
            let color: [f64; 3] = if masks.eyes.get(x, y) {
                [55.0, 45.0, 45.0]
            } else if masks.teeth.get(x, y) {
                [235.0, 232.0, 225.0]
            } else if masks.face.get(x, y) {
                skin
            } else {
                [
                    base[0] + grad[0] * t,
                    base[1] + grad[1] * t,
                    base[2] + grad[2] * t,
                ]
            };
            for (c, &v) in color.iter().enumerate() {
                let noise: f64 = rng.gen_range(-6.0..6.0);
                img.set(x, y, c as u8, clamp_u8(v + noise));
            }
        }
    }
    img
}

// Moves a value by exactly `delta` toward the middle of the range.
fn shift_toward_middle(v: u8, delta: u8) -> u8 {
    if v < 128 {
        v + delta
    } else {
        v - delta
    }
}

fn apply_makeup(rng: &mut ChaCha8Rng, img: &mut ImageBuffer, face: &Mask) {
    let deltas = [
        rng.gen_range(35..=70u8),
        rng.gen_range(0..=15u8),
        rng.gen_range(20..=45u8),
    ];
    for y in 0..img.height() {
        for x in 0..img.width() {
            if face.get(x, y) {
                for (c, &d) in deltas.iter().enumerate() {
                    let v = img.get(x, y, c as u8);
                    img.set(x, y, c as u8, shift_toward_middle(v, d));
                }
            }
        }
    }
}

fn shift_background_band(rng: &mut ChaCha8Rng, img: &mut ImageBuffer, face: &Mask) {
    let (w, h) = (img.width(), img.height());
    let side = rng.gen_range(0..4);
    let frac = rng.gen_range(0.25..0.35);
    let delta = rng.gen_range(55..=75u8);
    let band_w = (w as f64 * frac) as u32;
    let band_h = (h as f64 * frac) as u32;
    for y in 0..h {
        for x in 0..w {
            let inside = match side {
                0 => y < band_h,
                1 => y >= h - band_h,
                2 => x < band_w,
                _ => x >= w - band_w,
            };
            if inside && !face.get(x, y) {
                for c in 0..3 {
                    let v = img.get(x, y, c);
                    img.set(x, y, c, shift_toward_middle(v, delta));
                }
            }
        }
    }
}

fn translate(mask: &Mask, dx: i64, dy: i64) -> Mask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    Mask::from_fn(mask.width(), mask.height(), |x, y| {
        let sx = x as i64 - dx;
        let sy = y as i64 - dy;
        sx >= 0 && sy >= 0 && sx < w && sy < h && mask.get(sx as u32, sy as u32)
    })
}

fn write_pair(
    spec: &CorpusSpec,
    out_dir: &Path,
    index: usize,
    class: DefectClass,
) -> Result<PairRecord> {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);

    let face = Face {
        cx: w as f64 * rng.gen_range(0.47..0.53),
        cy: h as f64 * rng.gen_range(0.47..0.53),
        rx: w as f64 * rng.gen_range(0.24..0.28),
        ry: h as f64 * rng.gen_range(0.30..0.34),
        teeth: rng.gen_bool(0.5),
    };
    let source_masks = draw_masks(&face, w, h);
    let source = draw_source(&mut rng, &source_masks, w, h);

    let mut generated = source.clone();
    let mut generated_masks = source_masks.clone();
    match class {
        DefectClass::Clean => apply_makeup(&mut rng, &mut generated, &source_masks.face),
        DefectClass::NoMakeup => {}
        DefectClass::BgShift => {
            apply_makeup(&mut rng, &mut generated, &source_masks.face);
            shift_background_band(&mut rng, &mut generated, &source_masks.face);
        }
        DefectClass::Misaligned => {
            apply_makeup(&mut rng, &mut generated, &source_masks.face);
            let magnitude = (spec.mask_shift * 2.0 * face.rx).round().max(1.0) as i64;
            let dx = if rng.gen_bool(0.5) {
                magnitude
            } else {
                -magnitude
            };
            let dy = rng.gen_range(-(magnitude / 3)..=(magnitude / 3));
            for region in Region::ALL {
                let moved = translate(source_masks.region(region), dx, dy);
                *generated_masks.region_mut(region) = moved;
            }
        }
    }

    let id = format!("pair-{index:05}");
    let source_rel = PathBuf::from(PAIR_DIR).join(format!("{id}.src.png"));
    let generated_rel = PathBuf::from(PAIR_DIR).join(format!("{id}.gen.png"));
    save_image(&source, out_dir.join(&source_rel))?;
    save_image(&generated, out_dir.join(&generated_rel))?;
    for region in Region::ALL {
        save_mask(
            source_masks.region(region),
            out_dir.join(mask_path_for(&source_rel, region)),
        )?;
        save_mask(
            generated_masks.region(region),
            out_dir.join(mask_path_for(&generated_rel, region)),
        )?;
    }
    let word = MAKEUP_WORDS[rng.gen_range(0..MAKEUP_WORDS.len())];
    Ok(PairRecord::with_layout(
        id,
        source_rel,
        generated_rel,
        format!("{word} makeup."),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_counts() {
        let c: ClassCounts = "clean=3, misaligned=2,nomakeup=1,bgshift=0"
            .parse()
            .unwrap();
        assert_eq!(c.total(), 6);
        assert_eq!(c.get(DefectClass::Misaligned), 2);
        assert!("clean=x".parse::<ClassCounts>().is_err());
        assert!("dirty=1".parse::<ClassCounts>().is_err());
        assert!("clean".parse::<ClassCounts>().is_err());
    }

    #[test]
    fn label_serialization() {
        let l = CorpusLabel {
            id: "pair-00001".into(),
            class: DefectClass::NoMakeup,
            expected_failures: DefectClass::NoMakeup.expected_failures(),
        };
        assert_eq!(
            serde_json::to_string(&l).unwrap(),
            r#"{"id":"pair-00001","class":"nomakeup","expected_failures":["makeup_failed"]}"#
        );
    }

    #[test]
    fn rejects_small_dims() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec::new(1, ClassCounts::uniform(1), 32, 64);
        assert!(gen_synthetic_corpus(&spec, dir.path()).is_err());
    }

    #[test]
    fn shift_toward_middle_is_exact() {
        for v in 0..=255u8 {
            let d = 70;
            assert_eq!(v.abs_diff(shift_toward_middle(v, d)), d);
        }
    }

    #[test]
    fn translate_moves_pixels() {
        let m = Mask::from_fn(5, 5, |x, y| x == 1 && y == 1);
        let t = translate(&m, 2, -1);
        assert!(t.get(3, 0));
        assert_eq!(crate::mask_algebra::area(&t), 1);
        assert_eq!(crate::mask_algebra::area(&translate(&m, 10, 0)), 0);
    }
}
