use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::image::{load_image, ImageBuffer};
use super::mask::{load_mask, Region, RegionMaskSet};
use crate::error::{ForgeError, Result};
use crate::filters::FilterVerdict;
use crate::metrics::MetricsRow;

/// One line of a manifest: a source/generated pair and its parsing masks.
///
/// Relative paths are resolved against the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub source_path: PathBuf,
    pub generated_path: PathBuf,
    pub prompt_tag: String,
    pub source_face: PathBuf,
    pub source_eyes: PathBuf,
    pub source_teeth: PathBuf,
    pub source_contour: PathBuf,
    pub generated_face: PathBuf,
    pub generated_eyes: PathBuf,
    pub generated_teeth: PathBuf,
    pub generated_contour: PathBuf,
    /// Style image the generation was conditioned on; CLIP-I compares against it when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<PathBuf>,
    /// Result of a manual inspection, kept apart from the automatic verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<FilterVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PairRecord {
    /// A record whose image and mask paths follow the `<stem>.<region>.png` layout.
    pub fn with_layout(
        id: impl Into<String>,
        source_path: impl Into<PathBuf>,
        generated_path: impl Into<PathBuf>,
        prompt_tag: impl Into<String>,
    ) -> Self {
        let source_path = source_path.into();
        let generated_path = generated_path.into();
        let m = |img: &Path, r: Region| mask_path_for(img, r);
        Self {
            id: id.into(),
            source_face: m(&source_path, Region::Face),
            source_eyes: m(&source_path, Region::Eyes),
            source_teeth: m(&source_path, Region::Teeth),
            source_contour: m(&source_path, Region::Contour),
            generated_face: m(&generated_path, Region::Face),
            generated_eyes: m(&generated_path, Region::Eyes),
            generated_teeth: m(&generated_path, Region::Teeth),
            generated_contour: m(&generated_path, Region::Contour),
            source_path,
            generated_path,
            prompt_tag: prompt_tag.into(),
            reference_path: None,
            manual_pass: None,
            verdicts: None,
            passed: None,
            metrics: None,
            error: None,
        }
    }

    pub fn source_mask_path(&self, region: Region) -> &Path {
        match region {
            Region::Face => &self.source_face,
            Region::Eyes => &self.source_eyes,
            Region::Teeth => &self.source_teeth,
            Region::Contour => &self.source_contour,
        }
    }

    pub fn generated_mask_path(&self, region: Region) -> &Path {
        match region {
            Region::Face => &self.generated_face,
            Region::Eyes => &self.generated_eyes,
            Region::Teeth => &self.generated_teeth,
            Region::Contour => &self.generated_contour,
        }
    }

    /// Drops everything the pipeline writes, leaving the input record.
    pub fn clear_annotations(&mut self) {
        self.verdicts = None;
        self.passed = None;
        self.metrics = None;
        self.error = None;
    }
}

/// `dir/stem.png` -> `dir/stem.<region>.png`, the layout the mask extractor writes.
pub fn mask_path_for(image_path: &Path, region: Region) -> PathBuf {
    let stem = image_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    image_path.with_file_name(format!("{stem}.{}.png", region.as_str()))
}

/// Fully loaded inputs of one pair.
#[derive(Debug, Clone)]
pub struct PairResources {
    pub source: ImageBuffer,
    pub generated: ImageBuffer,
    pub source_masks: RegionMaskSet,
    pub generated_masks: RegionMaskSet,
}

impl PairResources {
    /// Loads images and masks, resolving relative paths against `base_dir`.
    ///
    /// A grayscale/RGB mismatch between the two images is an error.
    pub fn load(record: &PairRecord, base_dir: &Path) -> Result<Self> {
        let source = load_image(base_dir.join(&record.source_path))?;
        let generated = load_image(base_dir.join(&record.generated_path))?;
        source.check_compatible(&generated)?;
        let dims = source.dims();
        let load_set = |generated: bool| -> Result<RegionMaskSet> {
            let path_of = |r| {
                if generated {
                    record.generated_mask_path(r)
                } else {
                    record.source_mask_path(r)
                }
            };
            RegionMaskSet::new(
                load_mask(base_dir.join(path_of(Region::Face)), dims)?,
                load_mask(base_dir.join(path_of(Region::Eyes)), dims)?,
                load_mask(base_dir.join(path_of(Region::Teeth)), dims)?,
                load_mask(base_dir.join(path_of(Region::Contour)), dims)?,
            )
        };
        let source_masks = load_set(false)?;
        let generated_masks = load_set(true)?;
        Ok(Self {
            source,
            generated,
            source_masks,
            generated_masks,
        })
    }
}

/// Parses line-delimited JSON records. Blank lines are skipped; ids must be unique.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<PairRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord =
            serde_json::from_str(line).map_err(|e| ForgeError::ManifestParse {
                path: origin.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if !ids.insert(record.id.clone()) {
            return Err(ForgeError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ForgeError::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| ForgeError::io(path, e))?);
        text.push('\n');
    }
    parse_manifest(&text, path)
}

/// Serializes records one per line. Output bytes depend only on the records.
pub fn write_manifest<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a PairRecord>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ForgeError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| ForgeError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("PairRecord serializes");
        writeln!(out, "{line}").map_err(|e| ForgeError::io(path, e))?;
    }
    out.flush().map_err(|e| ForgeError::io(path, e))
}

/// Directory that relative paths in the manifest at `path` refer to.
pub fn manifest_base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_layout() {
        let p = mask_path_for(Path::new("img/pair-1.src.png"), Region::Teeth);
        assert_eq!(p, PathBuf::from("img/pair-1.src.teeth.png"));
    }

    #[test]
    fn parse_skips_blank_and_rejects_duplicates() {
        let r = PairRecord::with_layout("a", "a.png", "b.png", "red makeup.");
        let line = serde_json::to_string(&r).unwrap();
        let text = format!("{line}\n\n{line}\n");
        assert!(matches!(
            parse_manifest(&text, Path::new("m")),
            Err(ForgeError::DuplicateId(_))
        ));
        let parsed = parse_manifest(&format!("{line}\n\n"), Path::new("m")).unwrap();
        assert_eq!(parsed, vec![r]);
    }

    #[test]
    fn bad_line_names_line_number() {
        let err = parse_manifest("{\"id\": 3}\n", Path::new("m.jsonl")).unwrap_err();
        assert!(matches!(err, ForgeError::ManifestParse { line: 1, .. }));
    }

    #[test]
    fn input_records_have_exact_keys() {
        let r = PairRecord::with_layout("a", "a.png", "b.png", "t");
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "generated_contour",
                "generated_eyes",
                "generated_face",
                "generated_path",
                "generated_teeth",
                "id",
                "prompt_tag",
                "source_contour",
                "source_eyes",
                "source_face",
                "source_path",
                "source_teeth",
            ]
        );
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/m.jsonl");
        let records: Vec<_> = (0..3)
            .map(|i| PairRecord::with_layout(format!("p{i}"), "s.png", "g.png", "x"))
            .collect();
        write_manifest(&path, &records).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), records);
        assert_eq!(manifest_base_dir(&path), dir.path().join("sub"));
        assert_eq!(manifest_base_dir(Path::new("m.jsonl")), PathBuf::from("."));
    }
}
