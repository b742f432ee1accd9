use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::SequenceResult;
use crate::error::Error;

/// Sequence attribute codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    /// Low resolution.
    LR,
    /// Scale variation.
    SV,
    /// Shape complexity.
    SC,
    /// Fast motion.
    FM,
    /// Dynamic background.
    DB,
    /// Motion blur.
    MB,
    /// Occlusion.
    OCC,
    /// Appearance change.
    AC,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Attribute::LR,
        Attribute::SV,
        Attribute::SC,
        Attribute::FM,
        Attribute::DB,
        Attribute::MB,
        Attribute::OCC,
        Attribute::AC,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Attribute::LR => "LR",
            Attribute::SV => "SV",
            Attribute::SC => "SC",
            Attribute::FM => "FM",
            Attribute::DB => "DB",
            Attribute::MB => "MB",
            Attribute::OCC => "OCC",
            Attribute::AC => "AC",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.code() == s)
            .ok_or_else(|| Error::invalid("attribute", format!("unknown code {s:?}")))
    }
}

/// Mean J of the sequences carrying an attribute and its gain over those
/// that do not. `None` when either side is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeStat {
    pub attribute: Attribute,
    pub with: usize,
    pub without: usize,
    pub mean: Option<f64>,
    pub gain: Option<f64>,
}

impl AttributeStat {
    pub fn is_defined(&self) -> bool {
        self.gain.is_some()
    }
}

/// One entry per attribute code, in [`Attribute::ALL`] order.
pub fn attribute_summary(results: &[SequenceResult]) -> Vec<AttributeStat> {
    let means: Vec<f64> = results.iter().map(SequenceResult::mean_j).collect();
    Attribute::ALL
        .into_iter()
        .map(|a| {
            let (mut sw, mut nw, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
            for (r, m) in results.iter().zip(&means) {
                if r.attributes.contains(&a) {
                    sw += m;
                    nw += 1;
                } else {
                    so += m;
                    no += 1;
                }
            }
            let mean = (nw > 0).then(|| sw / nw as f64);
            let gain = match (mean, no) {
                (Some(m), n) if n > 0 => Some(m - so / n as f64),
                _ => None,
            };
            AttributeStat {
                attribute: a,
                with: nw,
                without: no,
                mean,
                gain,
            }
        })
        .collect()
}
