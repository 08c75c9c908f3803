use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::textproc::Polarity;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Female, Gender::Male, Gender::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }
}

/// Ordered by severity: `Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    Low,
    Medium,
    High,
}

impl Risk {
    pub const ALL: [Risk; 3] = [Risk::High, Risk::Medium, Risk::Low];

    pub fn index(self) -> usize {
        match self {
            Risk::High => 0,
            Risk::Medium => 1,
            Risk::Low => 2,
        }
    }

    pub fn from_index(i: usize) -> Risk {
        Risk::ALL[i]
    }

    /// One level more severe; `High` stays `High`.
    pub fn raised(self) -> Risk {
        match self {
            Risk::Low => Risk::Medium,
            _ => Risk::High,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Risk::High => "high",
            Risk::Medium => "medium",
            Risk::Low => "low",
        }
    }
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointOfCare {
    EmergencyCall,
    Teleconsultation,
    PhysicalVisit,
    SelfCare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFrame {
    Immediate,
    #[serde(rename = "within_24h")]
    Within24h,
    WithinWeek,
    Unscheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecommendationLabel {
    pub risk: Risk,
    pub point_of_care: PointOfCare,
    pub time_frame: TimeFrame,
}

impl RecommendationLabel {
    pub fn new(risk: Risk, point_of_care: PointOfCare, time_frame: TimeFrame) -> Self {
        RecommendationLabel {
            risk,
            point_of_care,
            time_frame,
        }
    }

    /// Label used when a risk class has no evidence of its own.
    pub fn default_for(risk: Risk) -> Self {
        match risk {
            Risk::High => Self::new(risk, PointOfCare::EmergencyCall, TimeFrame::Immediate),
            Risk::Medium => Self::new(risk, PointOfCare::Teleconsultation, TimeFrame::Within24h),
            Risk::Low => Self::new(risk, PointOfCare::SelfCare, TimeFrame::Unscheduled),
        }
    }

    pub fn is_consistent(&self) -> bool {
        match self.risk {
            Risk::High => self.time_frame == TimeFrame::Immediate,
            Risk::Low => matches!(
                self.time_frame,
                TimeFrame::WithinWeek | TimeFrame::Unscheduled
            ),
            Risk::Medium => true,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.is_consistent() {
            Ok(())
        } else {
            Err(format!(
                "time frame {:?} is not allowed for {} risk",
                self.time_frame, self.risk
            ))
        }
    }

    /// Every label that satisfies the risk/time-frame invariants.
    pub fn all_valid() -> Vec<RecommendationLabel> {
        use PointOfCare::*;
        use TimeFrame::*;
        let mut out = Vec::new();
        for risk in [Risk::High, Risk::Medium, Risk::Low] {
            for poc in [EmergencyCall, Teleconsultation, PhysicalVisit, SelfCare] {
                for tf in [Immediate, Within24h, WithinWeek, Unscheduled] {
                    let l = RecommendationLabel::new(risk, poc, tf);
                    if l.is_consistent() {
                        out.push(l);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptMention {
    pub concept: String,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl ConceptMention {
    pub fn present(concept: impl Into<String>) -> Self {
        ConceptMention {
            concept: concept.into(),
            polarity: Polarity::Present,
            location: None,
        }
    }

    pub fn negated(concept: impl Into<String>) -> Self {
        ConceptMention {
            polarity: Polarity::Negated,
            ..Self::present(concept)
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }
}

/// One historical teleconsultation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub mentions: Vec<ConceptMention>,
    #[serde(rename = "text")]
    pub free_text: String,
    pub label: RecommendationLabel,
}

impl CaseRecord {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            id: self.id.clone(),
            message,
        };
        if self.id.is_empty() {
            return Err(fail("empty id".into()));
        }
        if self.age > MAX_AGE {
            return Err(fail(format!("age {} outside 0..={MAX_AGE}", self.age)));
        }
        if self.mentions.is_empty() {
            return Err(fail("labeled record without mentions".into()));
        }
        self.label.validate().map_err(fail)
    }

    pub fn present(&self) -> impl Iterator<Item = &ConceptMention> {
        self.mentions
            .iter()
            .filter(|m| m.polarity == Polarity::Present)
    }
}
