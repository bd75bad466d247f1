use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::geometry::{oriented_rect, Vec2};

/// Evidence taxonomy. `Other` carries a free-form label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KindName {
    FirearmPhoto,
    KnifeLarge,
    KnifeSmall,
    Shoes,
    BloodSheetPassive,
    BloodSheetActive,
    BloodSheetTransfer,
    Body,
    Accelerant,
    Tool,
    Other(String),
}

impl KindName {
    pub const STANDARD: [KindName; 10] = [
        KindName::FirearmPhoto,
        KindName::KnifeLarge,
        KindName::KnifeSmall,
        KindName::Shoes,
        KindName::BloodSheetPassive,
        KindName::BloodSheetActive,
        KindName::BloodSheetTransfer,
        KindName::Body,
        KindName::Accelerant,
        KindName::Tool,
    ];

    pub fn is_blood_sheet(&self) -> bool {
        matches!(
            self,
            KindName::BloodSheetPassive | KindName::BloodSheetActive | KindName::BloodSheetTransfer
        )
    }
}

impl fmt::Display for KindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KindName::FirearmPhoto => "firearm_photo",
            KindName::KnifeLarge => "knife_large",
            KindName::KnifeSmall => "knife_small",
            KindName::Shoes => "shoes",
            KindName::BloodSheetPassive => "blood_sheet_passive",
            KindName::BloodSheetActive => "blood_sheet_active",
            KindName::BloodSheetTransfer => "blood_sheet_transfer",
            KindName::Body => "body",
            KindName::Accelerant => "accelerant",
            KindName::Tool => "tool",
            KindName::Other(label) => return write!(f, "other:{label}"),
        };
        f.write_str(s)
    }
}

impl FromStr for KindName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(label) = s.strip_prefix("other:") {
            if label.is_empty() {
                return Err("empty label for `other` evidence kind".into());
            }
            return Ok(KindName::Other(label.to_string()));
        }
        KindName::STANDARD
            .iter()
            .find(|k| k.to_string() == s)
            .cloned()
            .ok_or_else(|| format!("unknown evidence kind `{s}`"))
    }
}

impl From<KindName> for String {
    fn from(k: KindName) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KindName {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassClass {
    Light,
    Medium,
    Heavy,
}

/// Physical description of an evidence kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceKind {
    pub name: KindName,
    /// (length along the item's orientation, width across it), meters.
    pub footprint_m: [f64; 2],
    pub mass_class: MassClass,
    pub scatterable: bool,
}

impl EvidenceKind {
    /// Default physical properties for a kind name.
    pub fn standard(name: KindName) -> Self {
        use KindName::*;
        use MassClass::*;
        let (footprint_m, mass_class, scatterable) = match &name {
            FirearmPhoto => ([0.15, 0.10], Light, true),
            KnifeLarge => ([0.30, 0.05], Medium, false),
            KnifeSmall => ([0.16, 0.025], Medium, false),
            Shoes => ([0.30, 0.25], Medium, false),
            BloodSheetPassive | BloodSheetActive | BloodSheetTransfer => {
                ([0.297, 0.210], Light, true)
            }
            Body => ([1.75, 0.50], Heavy, false),
            Accelerant => ([0.20, 0.20], Medium, false),
            Tool => ([0.30, 0.08], Medium, false),
            Other(_) => ([0.10, 0.10], Medium, false),
        };
        Self {
            name,
            footprint_m,
            mass_class,
            scatterable,
        }
    }

    pub fn area_m2(&self) -> f64 {
        self.footprint_m[0] * self.footprint_m[1]
    }

    /// Whether the kind conducts heat away quickly (metal).
    pub fn is_metallic(&self) -> bool {
        matches!(self.name, KindName::KnifeLarge | KindName::KnifeSmall | KindName::Tool)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.footprint_m[0] > 0.0 && self.footprint_m[1] > 0.0) {
            return Err(format!("{}: footprint dimensions must be positive", self.name));
        }
        if (self.name.is_blood_sheet() || self.name == KindName::FirearmPhoto)
            && (self.mass_class != MassClass::Light || !self.scatterable)
        {
            return Err(format!("{}: paper evidence must be light and scatterable", self.name));
        }
        Ok(())
    }
}

/// The seven objects used in the lab trials: a firearm photo, two knives,
/// a pair of shoes and three mock blood sheets.
pub fn default7() -> Vec<EvidenceKind> {
    [
        KindName::FirearmPhoto,
        KindName::KnifeLarge,
        KindName::KnifeSmall,
        KindName::Shoes,
        KindName::BloodSheetPassive,
        KindName::BloodSheetActive,
        KindName::BloodSheetTransfer,
    ]
    .into_iter()
    .map(EvidenceKind::standard)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: u32,
    pub kind: EvidenceKind,
    pub position_m: Vec2,
    pub orientation_rad: f64,
    #[serde(default)]
    pub touched_at_s: Option<f64>,
    #[serde(default)]
    pub displaced: bool,
}

impl EvidenceItem {
    pub fn footprint_polygon(&self) -> Vec<Vec2> {
        oriented_rect(
            self.position_m,
            self.orientation_rad,
            self.kind.footprint_m[0],
            self.kind.footprint_m[1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip_through_strings() {
        for k in KindName::STANDARD {
            assert_eq!(k.to_string().parse::<KindName>().unwrap(), k);
        }
        let o: KindName = "other:bullet casing".parse().unwrap();
        assert_eq!(o, KindName::Other("bullet casing".into()));
        assert!("sword".parse::<KindName>().is_err());
        assert!("other:".parse::<KindName>().is_err());
    }

    #[test]
    fn standard_kinds_satisfy_invariants() {
        for k in KindName::STANDARD {
            EvidenceKind::standard(k).validate().unwrap();
        }
        let sheet = EvidenceKind::standard(KindName::BloodSheetActive);
        assert_eq!(sheet.mass_class, MassClass::Light);
        assert!(sheet.scatterable);
        assert!(!EvidenceKind::standard(KindName::Shoes).scatterable);
    }

    #[test]
    fn bad_paper_kind_is_rejected() {
        let mut photo = EvidenceKind::standard(KindName::FirearmPhoto);
        photo.mass_class = MassClass::Heavy;
        assert!(photo.validate().is_err());
    }

    #[test]
    fn default7_has_seven_distinct_kinds() {
        let set = default7();
        assert_eq!(set.len(), 7);
        let mut names: Vec<_> = set.iter().map(|k| k.name.clone()).collect();
        names.dedup();
        assert_eq!(names.len(), 7);
    }
}
