//! Pascal VOC XML annotations.
//!
//! VOC corners are 1-based inclusive pixel indices. They map to the internal
//! half-open extent as `x_min = xmin - 1`, `x_max = xmax` (same for y), so the
//! full 600×600 frame `(1, 1, 600, 600)` becomes `(0, 0, 600, 600)`.

use std::fmt::Write;
use std::path::Path;

use crackbench_core::{AnnotatedImage, BoundingBox, ClassMap};
use roxmltree::{Document, Node};

use super::FormatError;

/// What to do with an `<object>` whose `<name>` is not in the class map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LabelPolicy {
    /// Fail on the first such object.
    #[default]
    Error,
    /// Leave the object out and count it in `VocParse::skipped`.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocParse {
    pub image: AnnotatedImage,
    /// Value of `<filename>`, when present.
    pub filename: Option<String>,
    pub skipped: usize,
}

/// Parses a VOC document whose image id is the stem of its `<filename>`.
pub fn parse_voc(xml: &str, classes: &ClassMap) -> Result<AnnotatedImage, FormatError> {
    Ok(parse_voc_with(xml, classes, None, LabelPolicy::Error)?.image)
}

/// Parses a VOC document. `image_id` overrides the id derived from
/// `<filename>`; one of the two must be available.
pub fn parse_voc_with(
    xml: &str,
    classes: &ClassMap,
    image_id: Option<&str>,
    policy: LabelPolicy,
) -> Result<VocParse, FormatError> {
    let doc = Document::parse(xml).map_err(|e| FormatError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("annotation") {
        return Err(FormatError::MissingField("annotation".into()));
    }

    let filename = child(root, "filename").map(|n| text_of(n).to_string());
    let image_id = match (image_id, &filename) {
        (Some(id), _) => id.to_string(),
        (None, Some(f)) => Path::new(f).file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
        (None, None) => return Err(FormatError::MissingField("filename".into())),
    };

    let size = child(root, "size").ok_or_else(|| FormatError::MissingField("size".into()))?;
    let width = number::<u32>(size, "width")?;
    let height = number::<u32>(size, "height")?;

    let mut boxes = Vec::new();
    let mut skipped = 0;
    for obj in root.children().filter(|n| n.has_tag_name("object")) {
        let name = child(obj, "name").map(text_of).ok_or_else(|| FormatError::MissingField("name".into()))?;
        let bnd = child(obj, "bndbox").ok_or_else(|| FormatError::MissingField("bndbox".into()))?;
        let corners = [
            number::<f64>(bnd, "xmin")?,
            number::<f64>(bnd, "ymin")?,
            number::<f64>(bnd, "xmax")?,
            number::<f64>(bnd, "ymax")?,
        ];
        let Some(class_id) = classes.id_of(name) else {
            match policy {
                LabelPolicy::Error => return Err(FormatError::UnknownLabel(name.to_string())),
                LabelPolicy::Skip => {
                    skipped += 1;
                    continue;
                }
            }
        };
        let [xmin, ymin, xmax, ymax] = corners;
        boxes.push(BoundingBox::new(xmin - 1.0, ymin - 1.0, xmax, ymax, class_id)?);
    }

    let image = AnnotatedImage::new(image_id, width, height).with_boxes(boxes);
    image.validate(Some(classes))?;
    Ok(VocParse { image, filename, skipped })
}

/// Serializes with `<filename>{image_id}.jpg`.
pub fn serialize_voc(img: &AnnotatedImage, classes: &ClassMap) -> Result<String, FormatError> {
    serialize_voc_named(img, classes, &format!("{}.jpg", img.image_id))
}

pub fn serialize_voc_named(img: &AnnotatedImage, classes: &ClassMap, filename: &str) -> Result<String, FormatError> {
    img.validate(Some(classes))?;
    let mut out = String::new();
    out.push_str("<annotation>\n");
    let _ = writeln!(out, "  <filename>{}</filename>", escape(filename));
    out.push_str("  <size>\n");
    let _ = writeln!(out, "    <width>{}</width>", img.width);
    let _ = writeln!(out, "    <height>{}</height>", img.height);
    out.push_str("    <depth>3</depth>\n");
    out.push_str("  </size>\n");
    for b in &img.boxes {
        let label = classes.require_label(b.class_id)?;
        out.push_str("  <object>\n");
        let _ = writeln!(out, "    <name>{}</name>", escape(label));
        out.push_str("    <bndbox>\n");
        let _ = writeln!(out, "      <xmin>{}</xmin>", b.x_min + 1.0);
        let _ = writeln!(out, "      <ymin>{}</ymin>", b.y_min + 1.0);
        let _ = writeln!(out, "      <xmax>{}</xmax>", b.x_max);
        let _ = writeln!(out, "      <ymax>{}</ymax>", b.y_max);
        out.push_str("    </bndbox>\n");
        out.push_str("  </object>\n");
    }
    out.push_str("</annotation>\n");
    Ok(out)
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(tag))
}

fn text_of<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().unwrap_or_default().trim()
}

fn number<T: std::str::FromStr>(parent: Node, tag: &str) -> Result<T, FormatError> {
    let node = child(parent, tag).ok_or_else(|| FormatError::MissingField(tag.into()))?;
    let raw = text_of(node);
    raw.parse().map_err(|_| FormatError::InvalidNumber { field: tag.into(), value: raw.into() })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
