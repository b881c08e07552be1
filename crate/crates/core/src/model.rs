//! Record types shared by every pipeline stage.
//!
//! Enum values serialize as uppercase snake-case tokens (`SCREENING`,
//! `HISPANIC_OR_LATINO`, `B0`, ...), which is also the on-disk form used by
//! the delimited input files.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Implements `Display` through the serde token so rendered tables and input
/// files always agree on spelling.
macro_rules! token_display {
    ($($ty:ty),* $(,)?) => {
        $(
            impl ::std::fmt::Display for $ty {
                fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                    f.write_str(self.token())
                }
            }
        )*
    };
}

macro_rules! token_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $token:literal),* $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ::serde::Serialize, ::serde::Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),*];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),*
                }
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)*
                    other => Err(format!("unknown {} token `{}`", stringify!($name), other)),
                }
            }
        }

        token_display!($name);
    };
}

token_enum! {
    pub enum ExamType { Screening => "SCREENING", Diagnostic => "DIAGNOSTIC" }
}

token_enum! {
    /// BI-RADS breast composition category.
    pub enum Density { A => "A", B => "B", C => "C", D => "D", Unknown => "UNKNOWN" }
}

token_enum! {
    pub enum Race {
        Black => "BLACK",
        White => "WHITE",
        Asian => "ASIAN",
        Other => "OTHER",
        Unknown => "UNKNOWN",
    }
}

token_enum! {
    pub enum Ethnicity {
        HispanicOrLatino => "HISPANIC_OR_LATINO",
        NotHispanicOrLatino => "NOT_HISPANIC_OR_LATINO",
        Unknown => "UNKNOWN",
    }
}

token_enum! {
    pub enum Laterality { Left => "LEFT", Right => "RIGHT", Bilateral => "BILATERAL" }
}

token_enum! {
    /// BI-RADS assessment category, ordered by numeric value.
    pub enum Birads { B0 => "B0", B1 => "B1", B2 => "B2", B3 => "B3", B4 => "B4", B5 => "B5" }
}

impl Birads {
    pub fn value(self) -> u8 {
        self as u8
    }

    /// B4 and B5 are the suspicious assessments that call for tissue sampling.
    pub fn is_suspicious(self) -> bool {
        matches!(self, Birads::B4 | Birads::B5)
    }
}

token_enum! {
    pub enum MassShape {
        Oval => "OVAL",
        Round => "ROUND",
        Irregular => "IRREGULAR",
        Generic => "GENERIC",
    }
}

token_enum! {
    pub enum MassMargin {
        Circumscribed => "CIRCUMSCRIBED",
        Obscured => "OBSCURED",
        Microlobulated => "MICROLOBULATED",
        Indistinct => "INDISTINCT",
        Spiculated => "SPICULATED",
        Generic => "GENERIC",
    }
}

token_enum! {
    /// Calcification morphology from the BI-RADS 5th edition lexicon.
    pub enum CalcMorphology {
        Skin => "SKIN",
        Vascular => "VASCULAR",
        CoarseOrPopcorn => "COARSE_OR_POPCORN",
        LargeRodLike => "LARGE_ROD_LIKE",
        Round => "ROUND",
        RimOrEggshell => "RIM_OR_EGGSHELL",
        Dystrophic => "DYSTROPHIC",
        MilkOfCalcium => "MILK_OF_CALCIUM",
        Suture => "SUTURE",
        Amorphous => "AMORPHOUS",
        CoarseHeterogeneous => "COARSE_HETEROGENEOUS",
        FinePleomorphic => "FINE_PLEOMORPHIC",
        FineLinearBranching => "FINE_LINEAR_BRANCHING",
        Generic => "GENERIC",
    }
}

token_enum! {
    pub enum CalcDistribution {
        Diffuse => "DIFFUSE",
        Regional => "REGIONAL",
        Grouped => "GROUPED",
        Linear => "LINEAR",
        Segmental => "SEGMENTAL",
        Generic => "GENERIC",
    }
}

token_enum! {
    pub enum AsymmetryType {
        Asymmetry => "ASYMMETRY",
        Focal => "FOCAL",
        Global => "GLOBAL",
        Developing => "DEVELOPING",
    }
}

token_enum! {
    pub enum Procedure { Biopsy => "BIOPSY", Resection => "RESECTION" }
}

token_enum! {
    /// Pathology outcome category.
    ///
    /// Declaration order is the severity ladder used for chain resolution;
    /// `NonBreastCancer` sits outside it and is never compared by rank.
    pub enum Severity {
        NoPathology => "NO_PATHOLOGY",
        Benign => "BENIGN",
        Borderline => "BORDERLINE",
        HighRisk => "HIGH_RISK",
        NonInvasiveCancer => "NON_INVASIVE_CANCER",
        InvasiveCancer => "INVASIVE_CANCER",
        NonBreastCancer => "NON_BREAST_CANCER",
    }
}

impl Severity {
    pub fn is_cancer(self) -> bool {
        matches!(self, Severity::NonInvasiveCancer | Severity::InvasiveCancer)
    }

    /// Benign, borderline and high-risk lesions: sampled but not malignant.
    pub fn is_benign_lesion(self) -> bool {
        matches!(
            self,
            Severity::Benign | Severity::Borderline | Severity::HighRisk
        )
    }
}

token_enum! {
    pub enum FindingType {
        Mass => "MASS",
        Asymmetry => "ASYMMETRY",
        ArchDistortion => "ARCH_DISTORTION",
        Calcification => "CALCIFICATION",
    }
}

token_enum! {
    /// Screen-detected cancer split used by the cancer-type subgroups.
    pub enum CancerType { Invasive => "INVASIVE", NonInvasive => "NON_INVASIVE" }
}

impl CancerType {
    pub fn from_severity(severity: Severity) -> Option<Self> {
        match severity {
            Severity::InvasiveCancer => Some(CancerType::Invasive),
            Severity::NonInvasiveCancer => Some(CancerType::NonInvasive),
            _ => None,
        }
    }
}

/// Blank density is common in exports and means the same as UNKNOWN.
fn blank_density<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Density, D::Error> {
    let raw = String::deserialize(d)?;
    if raw.trim().is_empty() {
        return Ok(Density::Unknown);
    }
    raw.parse().map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamRecord {
    pub exam_id: String,
    pub patient_id: String,
    pub exam_date: NaiveDate,
    pub exam_type: ExamType,
    #[serde(deserialize_with = "blank_density")]
    pub density: Density,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub age_at_exam: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingRecord {
    pub finding_id: String,
    pub exam_id: String,
    pub laterality: Laterality,
    pub birads: Birads,
    pub has_mass: bool,
    pub has_asymmetry: bool,
    pub has_arch_distortion: bool,
    pub has_calcification: bool,
    pub mass_shape: Option<MassShape>,
    pub mass_margin: Option<MassMargin>,
    pub calc_morphology: Option<CalcMorphology>,
    pub calc_distribution: Option<CalcDistribution>,
    pub asymmetry_type: Option<AsymmetryType>,
}

impl FindingRecord {
    /// A finding with no imaging feature flags set and no descriptors.
    pub fn plain(
        finding_id: impl Into<String>,
        exam_id: impl Into<String>,
        laterality: Laterality,
        birads: Birads,
    ) -> Self {
        FindingRecord {
            finding_id: finding_id.into(),
            exam_id: exam_id.into(),
            laterality,
            birads,
            has_mass: false,
            has_asymmetry: false,
            has_arch_distortion: false,
            has_calcification: false,
            mass_shape: None,
            mass_margin: None,
            calc_morphology: None,
            calc_distribution: None,
            asymmetry_type: None,
        }
    }

    pub fn finding_types(&self) -> impl Iterator<Item = FindingType> + '_ {
        [
            (self.has_mass, FindingType::Mass),
            (self.has_asymmetry, FindingType::Asymmetry),
            (self.has_arch_distortion, FindingType::ArchDistortion),
            (self.has_calcification, FindingType::Calcification),
        ]
        .into_iter()
        .filter_map(|(set, ty)| set.then_some(ty))
    }

    /// Name of the first descriptor field populated without its feature flag.
    pub fn orphan_descriptor(&self) -> Option<&'static str> {
        if !self.has_mass && self.mass_shape.is_some() {
            return Some("mass_shape");
        }
        if !self.has_mass && self.mass_margin.is_some() {
            return Some("mass_margin");
        }
        if !self.has_calcification && self.calc_morphology.is_some() {
            return Some("calc_morphology");
        }
        if !self.has_calcification && self.calc_distribution.is_some() {
            return Some("calc_distribution");
        }
        if !self.has_asymmetry && self.asymmetry_type.is_some() {
            return Some("asymmetry_type");
        }
        None
    }

    /// Non-generic BI-RADS lexicon descriptors carried by this finding.
    pub fn descriptors(&self) -> Vec<Descriptor> {
        let mut out = Vec::new();
        if let Some(v) = self.mass_shape.filter(|v| *v != MassShape::Generic) {
            out.push(Descriptor::MassShape(v));
        }
        if let Some(v) = self.mass_margin.filter(|v| *v != MassMargin::Generic) {
            out.push(Descriptor::MassMargin(v));
        }
        if let Some(v) = self
            .calc_morphology
            .filter(|v| *v != CalcMorphology::Generic)
        {
            out.push(Descriptor::CalcMorphology(v));
        }
        if let Some(v) = self
            .calc_distribution
            .filter(|v| *v != CalcDistribution::Generic)
        {
            out.push(Descriptor::CalcDistribution(v));
        }
        if let Some(v) = self.asymmetry_type {
            out.push(Descriptor::AsymmetryType(v));
        }
        if self.has_arch_distortion {
            out.push(Descriptor::ArchDistortion);
        }
        out
    }
}

/// One BI-RADS lexicon descriptor value.
///
/// Architectural distortion carries no sub-descriptor in the finding table,
/// so it forms a single stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Descriptor {
    MassShape(MassShape),
    MassMargin(MassMargin),
    CalcMorphology(CalcMorphology),
    CalcDistribution(CalcDistribution),
    AsymmetryType(AsymmetryType),
    ArchDistortion,
}

token_enum! {
    pub enum DescriptorAxis {
        MassShape => "MASS_SHAPE",
        MassMargin => "MASS_MARGIN",
        CalcMorphology => "CALC_MORPHOLOGY",
        CalcDistribution => "CALC_DISTRIBUTION",
        AsymmetryType => "ASYMMETRY_TYPE",
        ArchDistortion => "ARCH_DISTORTION",
    }
}

impl Descriptor {
    pub fn axis(self) -> DescriptorAxis {
        match self {
            Descriptor::MassShape(_) => DescriptorAxis::MassShape,
            Descriptor::MassMargin(_) => DescriptorAxis::MassMargin,
            Descriptor::CalcMorphology(_) => DescriptorAxis::CalcMorphology,
            Descriptor::CalcDistribution(_) => DescriptorAxis::CalcDistribution,
            Descriptor::AsymmetryType(_) => DescriptorAxis::AsymmetryType,
            Descriptor::ArchDistortion => DescriptorAxis::ArchDistortion,
        }
    }

    pub fn value_token(self) -> &'static str {
        match self {
            Descriptor::MassShape(v) => v.token(),
            Descriptor::MassMargin(v) => v.token(),
            Descriptor::CalcMorphology(v) => v.token(),
            Descriptor::CalcDistribution(v) => v.token(),
            Descriptor::AsymmetryType(v) => v.token(),
            Descriptor::ArchDistortion => "ARCH_DISTORTION",
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.axis(), self.value_token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathologyResult {
    pub finding_id: String,
    pub procedure: Procedure,
    pub severity: Severity,
    pub subtype: Option<String>,
    pub result_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub exam_id: String,
    pub image_id: String,
    pub malignancy_score: f64,
}

/// Patient age bins used by the demographic tables and subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBin {
    #[serde(rename = "<50")]
    Under50,
    #[serde(rename = "50-75")]
    From50To75,
    #[serde(rename = ">=75")]
    From75,
}

impl AgeBin {
    pub const ALL: &'static [AgeBin] = &[AgeBin::Under50, AgeBin::From50To75, AgeBin::From75];

    /// `[0,50)`, `[50,75)`, `[75,∞)`.
    pub fn of(age: u32) -> Self {
        match age {
            0..=49 => AgeBin::Under50,
            50..=74 => AgeBin::From50To75,
            _ => AgeBin::From75,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            AgeBin::Under50 => "<50",
            AgeBin::From50To75 => "50-75",
            AgeBin::From75 => ">=75",
        }
    }
}

token_display!(AgeBin);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_bin_boundaries() {
        assert_eq!(AgeBin::of(49), AgeBin::Under50);
        assert_eq!(AgeBin::of(50), AgeBin::From50To75);
        assert_eq!(AgeBin::of(74), AgeBin::From50To75);
        assert_eq!(AgeBin::of(75), AgeBin::From75);
        assert_eq!(AgeBin::of(75).token(), ">=75");
    }

    #[test]
    fn tokens_round_trip() {
        for s in Severity::ALL {
            assert_eq!(s.token().parse::<Severity>().unwrap(), *s);
        }
        for c in CalcMorphology::ALL {
            assert_eq!(c.to_string().parse::<CalcMorphology>().unwrap(), *c);
        }
        assert!("b0".parse::<Birads>().is_err());
    }

    #[test]
    fn severity_ladder_order() {
        assert!(Severity::InvasiveCancer > Severity::NonInvasiveCancer);
        assert!(Severity::NonInvasiveCancer > Severity::HighRisk);
        assert!(Severity::HighRisk > Severity::Borderline);
        assert!(Severity::Borderline > Severity::Benign);
        assert!(Severity::Benign > Severity::NoPathology);
    }

    #[test]
    fn generic_descriptors_are_dropped() {
        let mut f = FindingRecord::plain("f", "e", Laterality::Left, Birads::B0);
        f.has_mass = true;
        f.mass_shape = Some(MassShape::Generic);
        f.mass_margin = Some(MassMargin::Spiculated);
        assert_eq!(
            f.descriptors(),
            vec![Descriptor::MassMargin(MassMargin::Spiculated)]
        );
        assert_eq!(f.orphan_descriptor(), None);
        f.has_mass = false;
        assert_eq!(f.orphan_descriptor(), Some("mass_shape"));
    }
}
