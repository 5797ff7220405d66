use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::font;
use crate::error::{Error, Result};
use crate::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Car,
    Plate,
}

/// Ground-truth object in full-resolution pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub id: String,
    pub image_id: String,
    pub object_kind: ObjectKind,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub parent_id: Option<String>,
    pub text: Option<String>,
    pub difficulty: Difficulty,
}

/// Whether `text` is a legal plate string.
pub fn valid_plate_text(text: &str) -> bool {
    (6..=7).contains(&text.len()) && text.chars().all(|c| font::glyph(c).is_some())
}

impl Annotation {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match (self.object_kind, &self.text) {
            (ObjectKind::Plate, Some(t)) if !valid_plate_text(t) => {
                Err(format!("invalid plate text {t:?}"))
            }
            (ObjectKind::Plate, None) => Err("plate without text".into()),
            (ObjectKind::Car, Some(_)) => Err("car with text".into()),
            (ObjectKind::Plate, _) if self.parent_id.is_none() => {
                Err("plate without parent".into())
            }
            _ => Ok(()),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_annotations(anns: &[Annotation], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for a in anns {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Annotation {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let a: Annotation = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        a.validate().map_err(err)?;
        out.push(a);
    }
    Ok(out)
}
