use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Box2D, Box3D, FormatError};

pub const DONT_CARE: &str = "DontCare";

/// Where a label set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    GroundTruth,
    Initial,
    Pseudo { round: u32 },
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledObject {
    pub class: String,
    pub box2d: Box2D,
    pub box3d: Option<Box3D>,
    pub truncation: f64,
    pub occlusion: u8,
}

impl LabeledObject {
    pub fn new(class: impl Into<String>, box2d: Box2D) -> Self {
        Self {
            class: class.into(),
            box2d,
            box3d: None,
            truncation: 0.0,
            occlusion: 0,
        }
    }

    pub fn with_box3d(mut self, b: Box3D) -> Self {
        self.box3d = Some(b);
        self
    }

    pub fn is_dont_care(&self) -> bool {
        self.class == DONT_CARE
    }

    /// The score written into the optional 16th column: the 3D score when a
    /// 3D box is present, otherwise the 2D score.
    pub fn score(&self) -> Option<f64> {
        match &self.box3d {
            Some(b) => b.score,
            None => self.box2d.score,
        }
    }
}

/// All labeled objects of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLabelSet {
    pub frame_id: String,
    pub objects: Vec<LabeledObject>,
    pub provenance: Provenance,
}

impl FrameLabelSet {
    pub fn new(frame_id: impl Into<String>, provenance: Provenance) -> Self {
        Self {
            frame_id: frame_id.into(),
            objects: Vec::new(),
            provenance,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Objects other than `DontCare` regions.
    pub fn cared(&self) -> impl Iterator<Item = &LabeledObject> {
        self.objects.iter().filter(|o| !o.is_dont_care())
    }

    pub fn boxes3d(&self) -> impl Iterator<Item = &Box3D> {
        self.cared().filter_map(|o| o.box3d.as_ref())
    }
}

fn parse_f64(tok: &str) -> Result<f64, FormatError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| FormatError::UnparsableNumber(tok.to_string()))?;
    if !v.is_finite() {
        return Err(FormatError::UnparsableNumber(tok.to_string()));
    }
    Ok(v)
}

/// Parse a `label_2` file. With `expects_3d == false` the 3D columns are
/// skipped; with `true` they become a [`Box3D`] unless they hold the
/// placeholder dimensions used for 2D-only rows.
pub fn parse_label_file(
    frame_id: &str,
    text: &str,
    expects_3d: bool,
) -> Result<FrameLabelSet, FormatError> {
    let mut set = FrameLabelSet::new(frame_id, Provenance::GroundTruth);
    for (line_no, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 15 && fields.len() != 16 {
            return Err(FormatError::FieldCount {
                line: line_no + 1,
                found: fields.len(),
            });
        }
        let nums = fields[1..]
            .iter()
            .map(|t| parse_f64(t))
            .collect::<Result<Vec<_>, _>>()?;
        let score = nums.get(14).copied();
        let occlusion = nums[1];
        let mut box2d = Box2D::new(nums[3], nums[4], nums[5], nums[6]);
        let (h, w, l) = (nums[7], nums[8], nums[9]);
        let box3d = if expects_3d && h > 0.0 && w > 0.0 && l > 0.0 {
            let mut b = Box3D::new([nums[10], nums[11], nums[12]], h, w, l, nums[13]);
            b.score = score;
            Some(b)
        } else {
            box2d.score = score;
            None
        };
        set.objects.push(LabeledObject {
            class: fields[0].to_string(),
            box2d,
            box3d,
            truncation: nums[0],
            occlusion: occlusion.round().clamp(0.0, 255.0) as u8,
        });
    }
    Ok(set)
}

/// Emit a `label_2` file with two-decimal fixed formatting (scores get four
/// decimals). Objects without a 3D box are written with placeholder 3D
/// columns; that is an error in 3D mode except for `DontCare` rows.
pub fn write_label_file(set: &FrameLabelSet, mode_3d: bool) -> Result<String, FormatError> {
    let mut out = String::new();
    for (index, o) in set.objects.iter().enumerate() {
        let b = &o.box2d;
        let (alpha, dims, loc, ry) = match &o.box3d {
            Some(b3) => (
                b3.alpha(),
                [b3.dims.h, b3.dims.w, b3.dims.l],
                b3.location,
                b3.yaw,
            ),
            None if mode_3d && !o.is_dont_care() => {
                return Err(FormatError::MissingBox3D { index });
            }
            None => (-10.0, [-1.0; 3], [-1000.0; 3], -10.0),
        };
        let _ = write!(
            out,
            "{} {:.2} {} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}",
            o.class,
            o.truncation,
            o.occlusion,
            alpha,
            b.x1,
            b.y1,
            b.x2,
            b.y2,
            dims[0],
            dims[1],
            dims[2],
            loc[0],
            loc[1],
            loc[2],
            ry
        );
        if let Some(s) = o.score() {
            let _ = write!(out, " {s:.4}");
        }
        out.push('\n');
    }
    Ok(out)
}
