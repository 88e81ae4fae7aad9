//! Extraction channel legality.

use serde::{Deserialize, Serialize};

use super::rules::RuleId;
use super::tdm::{TdmDecision, TdmException};
use super::types::ProcessingContext;
use crate::trace::DecisionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionChannel {
    /// Official platform API under developer terms.
    PlatformAuthorised,
    /// Data donated or exported by users themselves.
    UserMediated,
    /// Archives or datasets collected by someone else.
    ThirdPartyAggregation,
    /// Researcher-operated scraping.
    SelfDirected,
}

impl ExtractionChannel {
    pub const ALL: [ExtractionChannel; 4] = [
        ExtractionChannel::PlatformAuthorised,
        ExtractionChannel::UserMediated,
        ExtractionChannel::ThirdPartyAggregation,
        ExtractionChannel::SelfDirected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionChannel::PlatformAuthorised => "platform_authorised",
            ExtractionChannel::UserMediated => "user_mediated",
            ExtractionChannel::ThirdPartyAggregation => "third_party_aggregation",
            ExtractionChannel::SelfDirected => "self_directed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionVerdict {
    Blocked,
    PermittedWithConditions,
    Permitted,
}

/// Request quota a channel must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimit {
    pub capacity: u32,
    pub window_secs: u64,
}

impl RateLimit {
    /// Reddit Data API free tier: 100 queries per minute per OAuth client.
    pub const PLATFORM_DEFAULT: RateLimit = RateLimit {
        capacity: 100,
        window_secs: 60,
    };
}

pub mod obligation {
    pub const RESPECT_API_TERMS: &str = "respect_developer_terms_and_rate_limits";
    pub const PUBLIC_NOTICE: &str = "publish_art14_notice_on_project_website";
    pub const DONOR_CONSENT: &str = "document_donor_information_and_consent";
    pub const VERIFY_PROVENANCE: &str = "verify_lawful_provenance_of_third_party_data";
    pub const PROPORTIONATE_SCRAPING: &str = "proportionate_scraping_without_circumventing_technical_measures";
    pub const RAW_FORM_STORAGE: &str = "heightened_security_for_raw_form_storage";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionDecision {
    pub channel: ExtractionChannel,
    pub verdict: ExtractionVerdict,
    pub rate_limit: Option<RateLimit>,
    pub obligations: Vec<String>,
    pub trace: DecisionTrace,
}

pub fn assess_extraction(
    channel: ExtractionChannel,
    tdm: &TdmDecision,
    context: &ProcessingContext,
) -> ExtractionDecision {
    let mut trace = DecisionTrace::new();
    trace.fire(RuleId::ExtractChannel, &channel, channel.as_str());

    if tdm.exception == TdmException::None {
        trace.fire(
            RuleId::ExtractNoLawfulBasis,
            &(channel, tdm.exception),
            "no lawful extraction basis: rights reserved and no research exception",
        );
        return ExtractionDecision {
            channel,
            verdict: ExtractionVerdict::Blocked,
            rate_limit: None,
            obligations: vec![],
            trace,
        };
    }

    let mut obligations: Vec<String> = Vec::new();
    let mut rate_limit = None;
    let verdict = match channel {
        ExtractionChannel::PlatformAuthorised => {
            obligations.push(obligation::RESPECT_API_TERMS.into());
            rate_limit = Some(RateLimit::PLATFORM_DEFAULT);
            ExtractionVerdict::Permitted
        }
        ExtractionChannel::UserMediated => {
            obligations.push(obligation::DONOR_CONSENT.into());
            ExtractionVerdict::PermittedWithConditions
        }
        ExtractionChannel::ThirdPartyAggregation => {
            if tdm.exception == TdmException::Article3 {
                obligations.push(obligation::VERIFY_PROVENANCE.into());
                ExtractionVerdict::PermittedWithConditions
            } else {
                trace.fire(
                    RuleId::ExtractNoLawfulBasis,
                    &(channel, tdm.exception),
                    "third-party copies fall outside the general exception; licence needed",
                );
                return ExtractionDecision {
                    channel,
                    verdict: ExtractionVerdict::Blocked,
                    rate_limit: None,
                    obligations: vec![],
                    trace,
                };
            }
        }
        ExtractionChannel::SelfDirected => {
            obligations.push(obligation::PROPORTIONATE_SCRAPING.into());
            ExtractionVerdict::PermittedWithConditions
        }
    };

    trace.fire(
        RuleId::ExtractPublic,
        &context.data_publicly_accessible,
        if context.data_publicly_accessible {
            "data obtained from a public source, not from the subjects"
        } else {
            "non-public source"
        },
    );
    if context.data_publicly_accessible && channel != ExtractionChannel::UserMediated {
        trace.fire(
            RuleId::ExtractNotification,
            &context.subject_count_scale,
            "individual notice disproportionate; public notice instead",
        );
        obligations.push(obligation::PUBLIC_NOTICE.into());
    }

    ExtractionDecision {
        channel,
        verdict,
        rate_limit,
        obligations,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tdm::RetentionAllowance;
    use crate::policy::types::SubjectScale;

    fn tdm(exception: TdmException) -> TdmDecision {
        TdmDecision {
            exception,
            tos_override: exception == TdmException::Article3,
            retention_allowance: RetentionAllowance::None,
            obligations: vec![],
            trace: DecisionTrace::new(),
        }
    }

    fn ctx() -> ProcessingContext {
        ProcessingContext {
            platform_id: "reddit".into(),
            data_publicly_accessible: true,
            special_category_possible: true,
            subject_count_scale: SubjectScale::Large,
            vulnerable_subjects: false,
            combines_datasets: false,
            innovative_technology: true,
            profiling_of_public_social_media: false,
            intended_outputs: Default::default(),
            cross_border: vec![],
        }
    }

    #[test]
    fn api_channel_gets_quota() {
        let d = assess_extraction(ExtractionChannel::PlatformAuthorised, &tdm(TdmException::Article3), &ctx());
        assert_eq!(d.verdict, ExtractionVerdict::Permitted);
        assert_eq!(d.rate_limit, Some(RateLimit { capacity: 100, window_secs: 60 }));
        assert!(d.obligations.iter().any(|o| o == obligation::PUBLIC_NOTICE));
    }

    #[test]
    fn no_exception_blocks_every_channel() {
        for ch in ExtractionChannel::ALL {
            let d = assess_extraction(ch, &tdm(TdmException::None), &ctx());
            assert_eq!(d.verdict, ExtractionVerdict::Blocked);
            assert!(d.trace.rule_ids().contains(&"F6.no_lawful_extraction"));
        }
    }

    #[test]
    fn third_party_needs_research_exception() {
        let d = assess_extraction(ExtractionChannel::ThirdPartyAggregation, &tdm(TdmException::Article4), &ctx());
        assert_eq!(d.verdict, ExtractionVerdict::Blocked);
        let d = assess_extraction(ExtractionChannel::ThirdPartyAggregation, &tdm(TdmException::Article3), &ctx());
        assert_eq!(d.verdict, ExtractionVerdict::PermittedWithConditions);
    }
}
