use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    University,
    ResearchInstitute,
    PublicAuthority,
    Commercial,
    NonprofitOther,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::University,
        EntityKind::ResearchInstitute,
        EntityKind::PublicAuthority,
        EntityKind::Commercial,
        EntityKind::NonprofitOther,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfitHandling {
    NotForProfit,
    ReinvestsProfits,
    ForProfit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    ScientificResearch,
    Commercial,
    Mixed,
}

/// Who is processing, and on what institutional footing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherProfile {
    pub entity_kind: EntityKind,
    pub primary_goal_research: bool,
    pub profit_handling: ProfitHandling,
    pub public_interest_mission: bool,
    pub decisive_commercial_influence: bool,
    pub preferential_commercial_access: bool,
    pub purpose: Purpose,
    /// Statutory or constitutional task under which research is carried out.
    /// Mandatory for public authorities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub official_task_scope: Option<String>,
    /// Whether commercialisation of results is planned. Mandatory for mixed purposes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commercialisation_planned: Option<bool>,
}

impl ResearcherProfile {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.entity_kind == EntityKind::PublicAuthority
            && self
                .official_task_scope
                .as_deref()
                .is_none_or(|s| s.trim().is_empty())
        {
            return Err(PolicyError::InvalidProfile(
                "public authority must declare an official task scope".into(),
            ));
        }
        if self.purpose == Purpose::Mixed && self.commercialisation_planned.is_none() {
            return Err(PolicyError::InvalidProfile(
                "mixed purpose requires a declared commercialisation plan flag".into(),
            ));
        }
        Ok(())
    }

    /// True when the entity acts as a public authority performing its tasks.
    /// Universities whose research remit is laid down in law count as such.
    pub fn acts_within_official_task(&self) -> bool {
        let has_scope = self
            .official_task_scope
            .as_deref()
            .is_some_and(|s| !s.trim().is_empty());
        has_scope
            && matches!(
                self.entity_kind,
                EntityKind::PublicAuthority | EntityKind::University | EntityKind::ResearchInstitute
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectScale {
    Small,
    Large,
}

/// Research outputs that may be disseminated in the Present stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    PaperWithQuotes,
    AggregateStats,
    DatasetIdsOnly,
    DatasetRaw,
    ModelWeights,
    SyntheticDataset,
}

impl OutputKind {
    pub const ALL: [OutputKind; 6] = [
        OutputKind::PaperWithQuotes,
        OutputKind::AggregateStats,
        OutputKind::DatasetIdsOnly,
        OutputKind::DatasetRaw,
        OutputKind::ModelWeights,
        OutputKind::SyntheticDataset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::PaperWithQuotes => "paper_with_quotes",
            OutputKind::AggregateStats => "aggregate_stats",
            OutputKind::DatasetIdsOnly => "dataset_ids_only",
            OutputKind::DatasetRaw => "dataset_raw",
            OutputKind::ModelWeights => "model_weights",
            OutputKind::SyntheticDataset => "synthetic_dataset",
        }
    }

    pub fn parse(s: &str) -> Result<OutputKind, PolicyError> {
        OutputKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PolicyError::UnknownOutputKind(s.to_owned()))
    }
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Jurisdiction code: ISO 3166 alpha-2 or `EU`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(String);

impl Region {
    pub fn new(code: impl AsRef<str>) -> Self {
        Region(code.as_ref().trim().to_ascii_uppercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub source: Region,
    pub dest: Region,
}

impl Route {
    pub fn new(source: impl AsRef<str>, dest: impl AsRef<str>) -> Self {
        Route {
            source: Region::new(source),
            dest: Region::new(dest),
        }
    }
}

/// What is being processed and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessingContext {
    pub platform_id: String,
    pub data_publicly_accessible: bool,
    pub special_category_possible: bool,
    pub subject_count_scale: SubjectScale,
    pub vulnerable_subjects: bool,
    pub combines_datasets: bool,
    pub innovative_technology: bool,
    pub profiling_of_public_social_media: bool,
    #[serde(default)]
    pub intended_outputs: BTreeSet<OutputKind>,
    #[serde(default)]
    pub cross_border: Vec<Route>,
}

impl ProcessingContext {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.platform_id.trim().is_empty() {
            return Err(PolicyError::InvalidContext("platform_id is empty".into()));
        }
        Ok(())
    }

    pub fn validate_for_present(&self) -> Result<(), PolicyError> {
        self.validate()?;
        if self.intended_outputs.is_empty() {
            return Err(PolicyError::InvalidContext(
                "intended_outputs must be declared before Present-stage checks".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn university() -> ResearcherProfile {
        ResearcherProfile {
            entity_kind: EntityKind::University,
            primary_goal_research: true,
            profit_handling: ProfitHandling::NotForProfit,
            public_interest_mission: true,
            decisive_commercial_influence: false,
            preferential_commercial_access: false,
            purpose: Purpose::ScientificResearch,
            official_task_scope: Some("statutory research remit".into()),
            commercialisation_planned: None,
        }
    }

    #[test]
    fn public_authority_needs_scope() {
        let mut p = university();
        p.entity_kind = EntityKind::PublicAuthority;
        p.official_task_scope = None;
        assert!(p.validate().is_err());
        p.official_task_scope = Some("  ".into());
        assert!(p.validate().is_err());
        p.official_task_scope = Some("census".into());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn mixed_purpose_needs_plan_flag() {
        let mut p = university();
        p.purpose = Purpose::Mixed;
        assert!(p.validate().is_err());
        p.commercialisation_planned = Some(false);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn output_kind_round_trips() {
        for kind in OutputKind::ALL {
            assert_eq!(OutputKind::parse(kind.as_str()).unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.as_str()));
        }
        assert!(matches!(
            OutputKind::parse("hologram"),
            Err(PolicyError::UnknownOutputKind(_))
        ));
    }

    #[test]
    fn region_normalises() {
        assert_eq!(Region::new(" de "), Region::new("DE"));
    }
}
