//! Box annotation files.
//!
//! One JSON object per line, one line per image:
//!
//! ```json
//! {"image":"doc-001","characters":[{"cx":12.5,"cy":30.0,"w":9.0,"h":14.0}],"words":[],"paragraphs":[]}
//! ```
//!
//! Coordinates are pixels at the working resolution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BaseBox, ChunkLevel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationDoc {
    pub image: String,
    #[serde(default)]
    pub characters: Vec<BoxRecord>,
    #[serde(default)]
    pub words: Vec<BoxRecord>,
    #[serde(default)]
    pub paragraphs: Vec<BoxRecord>,
}

impl AnnotationDoc {
    /// Flattens every level into validated [`BaseBox`]es.
    pub fn base_boxes(&self) -> Result<Vec<BaseBox>> {
        let levels = [
            (ChunkLevel::Character, &self.characters),
            (ChunkLevel::Word, &self.words),
            (ChunkLevel::Paragraph, &self.paragraphs),
        ];
        let mut out = Vec::new();
        for (level, records) in levels {
            for r in records {
                out.push(BaseBox::new(r.cx, r.cy, r.w, r.h, level).map_err(|e| {
                    Error::invalid(format!("image `{}`: {e}", self.image))
                })?);
            }
        }
        Ok(out)
    }

    pub fn push(&mut self, b: &BaseBox) {
        let rec = BoxRecord {
            cx: b.center_x,
            cy: b.center_y,
            w: b.width_a,
            h: b.height_b,
        };
        match b.chunk_level {
            ChunkLevel::Character => self.characters.push(rec),
            ChunkLevel::Word => self.words.push(rec),
            ChunkLevel::Paragraph => self.paragraphs.push(rec),
        }
    }
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationDoc>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationDoc>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

pub fn write_annotations(path: impl AsRef<Path>, docs: &[AnnotationDoc]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for d in docs {
        text.push_str(&serde_json::to_string(d)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Picks the document for `image_id`; a file holding a single document is
/// accepted regardless of its id.
pub fn select_doc<'a>(docs: &'a [AnnotationDoc], image_id: &str) -> Option<&'a AnnotationDoc> {
    match docs {
        [only] => Some(only),
        _ => docs.iter().find(|d| d.image == image_id),
    }
}
