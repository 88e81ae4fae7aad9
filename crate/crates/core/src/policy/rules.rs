//! Rules manifest.
//!
//! Every rule the engine can fire has one entry here: a stable id, the
//! decision tree it belongs to, a one-line description of the node, and the
//! legal anchor it rests on. Tree node ids used by the questionnaire are the
//! same ids, so a wizard path and a library trace line up one-to-one.

use serde::{Deserialize, Serialize};

/// Decision trees, in pipeline-stage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tree {
    Controllership,
    LegalBasis,
    ResearchOrganisation,
    DpiaScreening,
    PlatformTerms,
    Extraction,
    Transform,
    Storage,
    ModelRelease,
    Distribution,
}

impl Tree {
    pub const ALL: [Tree; 10] = [
        Tree::Controllership,
        Tree::LegalBasis,
        Tree::ResearchOrganisation,
        Tree::DpiaScreening,
        Tree::PlatformTerms,
        Tree::Extraction,
        Tree::Transform,
        Tree::Storage,
        Tree::ModelRelease,
        Tree::Distribution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tree::Controllership => "controllership",
            Tree::LegalBasis => "legal_basis",
            Tree::ResearchOrganisation => "research_organisation",
            Tree::DpiaScreening => "dpia_screening",
            Tree::PlatformTerms => "platform_terms",
            Tree::Extraction => "extraction",
            Tree::Transform => "transform",
            Tree::Storage => "storage",
            Tree::ModelRelease => "model_release",
            Tree::Distribution => "distribution",
        }
    }

    pub fn parse(s: &str) -> Option<Tree> {
        Tree::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

macro_rules! rules {
    ($( $variant:ident => ($id:literal, $tree:ident, $title:literal, $citation:literal), )*) => {
        /// Identifier of a rule in the manifest.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RuleId { $( $variant, )* }

        impl RuleId {
            pub const ALL: &'static [RuleId] = &[ $( RuleId::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( RuleId::$variant => $id, )* }
            }

            pub fn tree(self) -> Tree {
                match self { $( RuleId::$variant => Tree::$tree, )* }
            }

            pub fn title(self) -> &'static str {
                match self { $( RuleId::$variant => $title, )* }
            }

            pub fn parse(s: &str) -> Option<RuleId> {
                match s { $( $id => Some(RuleId::$variant), )* _ => None }
            }
        }

        pub fn citation(rule: RuleId) -> &'static str {
            match rule { $( RuleId::$variant => $citation, )* }
        }
    };
}

rules! {
    // Controller relationships.
    ControllerPurposes => ("F2.purposes", Controllership,
        "Does the researcher determine the purposes of processing?",
        "GDPR Art. 4(7); EDPB Guidelines 07/2020 on controller and processor"),
    ControllerMeans => ("F2.means", Controllership,
        "Does the researcher determine the essential means (collection, transformation, training)?",
        "GDPR Art. 4(7); EDPB Guidelines 07/2020, essential means"),
    ControllerInstitution => ("F2.institution", Controllership,
        "Does the institution also determine purposes or means?",
        "GDPR Art. 26(1) joint controllers; EDPB Guidelines 07/2020, converging decisions"),

    // Legal basis selection.
    BasisEntityKind => ("F3.entity_kind", LegalBasis,
        "What kind of entity is processing?",
        "GDPR Art. 6(1)"),
    BasisOfficialTask => ("F3.official_task", LegalBasis,
        "Is the research carried out within a statutory or constitutional research task?",
        "GDPR Art. 6(1)(e) and Art. 6(3): basis laid down by law"),
    BasisSpecialCategory => ("F3.special_category", LegalBasis,
        "Could the data reveal or allow inference of special category data?",
        "GDPR Art. 9(1); CJEU C-184/20 OT (inferred sensitive data)"),
    BasisRequested => ("F3.requested", LegalBasis,
        "Which legal basis does the controller intend to rely on?",
        "GDPR Art. 6(1); EDPB Opinion 28/2024 para. 60 (no hierarchy between bases)"),
    BasisPublicAuthorityBar => ("F3.public_authority_bar", LegalBasis,
        "Legitimate interests barred for public authorities acting within their tasks",
        "GDPR Art. 6(1) second subparagraph: point (f) shall not apply to processing carried out by public authorities in the performance of their tasks"),
    BasisPublicTask => ("F3.public_task", LegalBasis,
        "Public task basis",
        "GDPR Art. 6(1)(e): task carried out in the public interest or in the exercise of official authority"),
    BasisLegitimateInterest => ("F3.legitimate_interest", LegalBasis,
        "Legitimate interests basis with documented assessment",
        "GDPR Art. 6(1)(f); EDPB Guidelines 1/2024 on legitimate interests"),
    BasisConsent => ("F3.consent", LegalBasis,
        "Consent basis",
        "GDPR Art. 6(1)(a) and Art. 7"),
    BasisResearchSpecialCategory => ("F3.art9_2_j", LegalBasis,
        "Scientific research condition for special category data",
        "GDPR Art. 9(2)(j) with Art. 89(1) safeguards"),
    LiaLegitimacy => ("LIA.legitimacy", LegalBasis,
        "Is a legitimate interest pursued?",
        "EDPB ChatGPT Taskforce Report para. 16(i): existence of a legitimate interest"),
    LiaNecessity => ("LIA.necessity", LegalBasis,
        "Is the processing necessary (no less intrusive alternative)?",
        "EDPB Opinion 28/2024 para. 73: less intrusive alternatives"),
    LiaBalancing => ("LIA.balancing", LegalBasis,
        "Do the controller's interests outweigh data subjects' rights?",
        "EDPB ChatGPT Taskforce Report para. 16(iii); EDPB Opinion 28/2024 paras. 77-80"),

    // Research organisation qualification.
    OrgPrimaryGoal => ("F4.primary_goal", ResearchOrganisation,
        "Is the primary goal of the entity to conduct scientific research?",
        "DSM Directive Art. 2(1): the primary goal of which is to conduct scientific research"),
    OrgProfitHandling => ("F4.profit_handling", ResearchOrganisation,
        "How are profits handled?",
        "DSM Directive Art. 2(1)(a): on a not-for-profit basis or by reinvesting all the profits in its scientific research"),
    OrgPublicMission => ("F4.public_mission", ResearchOrganisation,
        "Does the entity act under a public interest mission recognised by a Member State?",
        "DSM Directive Art. 2(1)(b): pursuant to a public interest mission recognised by a Member State"),
    OrgDecisiveInfluence => ("F4.decisive_influence", ResearchOrganisation,
        "Does a commercial undertaking exercise decisive influence over the entity?",
        "DSM Directive Art. 2(1) and Recital 12: undertaking that exercises a decisive influence"),
    OrgPreferentialAccess => ("F4.preferential_access", ResearchOrganisation,
        "Can that undertaking enjoy preferential access to the research results?",
        "DSM Directive Recital 12: preferential access to the results of the research"),

    // DPIA screening.
    DpiaEvaluationScoring => ("B.evaluation_scoring", DpiaScreening,
        "Evaluation or scoring, including profiling", "WP29 DPIA Guidelines (WP248 rev.01), criterion 1"),
    DpiaAutomatedDecision => ("B.automated_decision", DpiaScreening,
        "Automated decision-making with legal or similar significant effect", "WP29 DPIA Guidelines, criterion 2"),
    DpiaSystematicMonitoring => ("B.systematic_monitoring", DpiaScreening,
        "Systematic monitoring", "WP29 DPIA Guidelines, criterion 3"),
    DpiaSensitive => ("B.sensitive", DpiaScreening,
        "Sensitive data or data of a highly personal nature", "WP29 DPIA Guidelines, criterion 4"),
    DpiaLargeScale => ("B.large_scale", DpiaScreening,
        "Data processed on a large scale", "WP29 DPIA Guidelines, criterion 5; GDPR Recital 91"),
    DpiaMatching => ("B.matching_combining", DpiaScreening,
        "Matching or combining datasets", "WP29 DPIA Guidelines, criterion 6"),
    DpiaVulnerable => ("B.vulnerable_subjects", DpiaScreening,
        "Data concerning vulnerable data subjects", "WP29 DPIA Guidelines, criterion 7"),
    DpiaInnovative => ("B.innovative_use", DpiaScreening,
        "Innovative use or new technological solutions", "WP29 DPIA Guidelines, criterion 8"),
    DpiaRightsPrevention => ("B.rights_prevention", DpiaScreening,
        "Processing that prevents exercising a right or using a service", "WP29 DPIA Guidelines, criterion 9"),
    DpiaProfilingSocialMedia => ("B.profiling_public_social_media", DpiaScreening,
        "Gathering of public social media data for generating profiles",
        "WP29 DPIA Guidelines, listed example: gathering of public social media data for generating profiles"),
    DpiaCount => ("B.criteria_count", DpiaScreening,
        "Two or more criteria typically require a DPIA",
        "WP29 DPIA Guidelines p. 11; GDPR Art. 35(1) and 35(3)"),

    // Platform terms versus statutory TDM rights.
    TdmPurpose => ("F5.purpose", PlatformTerms,
        "Is the mining carried out for the purposes of scientific research?",
        "DSM Directive Art. 3(1): for the purposes of scientific research"),
    TdmLawfulAccess => ("F5.lawful_access", PlatformTerms,
        "Does the miner have lawful access to the content?",
        "DSM Directive Art. 3(1) and 4(1): works to which they have lawful access; Recital 14"),
    TdmReservation => ("F5.reservation", PlatformTerms,
        "Has the rightholder expressly reserved TDM by machine-readable means?",
        "DSM Directive Art. 4(3) and Recital 18: machine-readable means"),
    TdmArticle3 => ("F5.article3", PlatformTerms,
        "Mandatory research TDM exception; contrary contract terms unenforceable",
        "DSM Directive Art. 3(1) and Art. 7(1); LG Hamburg 310 O 227/23 (LAION v. Kneschke)"),
    TdmArticle4 => ("F5.article4", PlatformTerms,
        "General TDM exception, retention limited to necessity",
        "DSM Directive Art. 4(1)-(2): retained for as long as is necessary for the purposes of text and data mining"),
    TdmNone => ("F5.no_exception", PlatformTerms,
        "No TDM exception; platform terms and database rights apply in full",
        "DSM Directive Art. 4(3); Database Directive Art. 7(1) and 7(5)"),

    // Extraction channel.
    ExtractChannel => ("F6.channel", Extraction,
        "Which extraction channel is used?",
        "Database Directive Art. 7(5); DSM Directive Art. 3(3)"),
    ExtractPublic => ("F6.public_data", Extraction,
        "Is the data publicly accessible (no direct collection from subjects)?",
        "GDPR Art. 14; EDPB ChatGPT Taskforce Report para. 18"),
    ExtractNotification => ("F6.notification", Extraction,
        "Would individual notification involve disproportionate effort?",
        "GDPR Art. 14(5)(b); WP29 Transparency Guidelines paras. 59-61; EDPB Opinion 28/2024 para. 63"),
    ExtractNoLawfulBasis => ("F6.no_lawful_extraction", Extraction,
        "No lawful extraction basis",
        "DSM Directive Art. 4(3); Database Directive Art. 7(1)"),

    // Transformation safeguards.
    TransformMinimisation => ("F7.minimisation", Transform,
        "Retain only fields necessary for the stated purpose",
        "GDPR Art. 5(1)(c); EDPB Opinion 28/2024 para. 51"),
    TransformIdentifiers => ("F7.direct_identifiers", Transform,
        "Does the data contain direct identifiers (usernames, user ids, post ids)?",
        "GDPR Art. 4(5) pseudonymisation; Art. 89(1)"),
    TransformSpecialCategory => ("F7.special_category", Transform,
        "Does the data contain special category data?",
        "GDPR Art. 9(2)(j) and Art. 89(1) appropriate safeguards"),
    TransformAnonymityClaim => ("F7.anonymity_claim", Transform,
        "Is the transformed dataset claimed to be anonymous?",
        "GDPR Recital 26: means reasonably likely to be used"),

    // Storage, transfers and retention.
    StorageDestination => ("F8.destination", Storage,
        "Where is the data stored or transferred to?",
        "GDPR Art. 44"),
    StorageIntraEea => ("F8.intra_eea", Storage,
        "No international transfer",
        "GDPR Art. 44 (transfers to third countries only)"),
    StorageAdequacy => ("F8.adequacy", Storage,
        "Adequacy decision or Data Privacy Framework coverage",
        "GDPR Art. 45(1): essentially equivalent protection; Commission Implementing Decision (EU) 2023/1795"),
    StorageSafeguards => ("F8.safeguards", Storage,
        "Appropriate safeguards",
        "GDPR Art. 46(2): standard contractual clauses, binding corporate rules, administrative arrangements"),
    StorageDerogation => ("F8.derogation", Storage,
        "Derogation for specific situations",
        "GDPR Art. 49(1): non-repetitive transfers, explicit consent or public interest"),
    StorageNoRoute => ("F8.no_lawful_route", Storage,
        "No lawful transfer mechanism",
        "GDPR Art. 44: transfers only under the conditions of Chapter V"),
    StorageRetention => ("F8.retention", Storage,
        "Retention allowance for mined copies",
        "DSM Directive Art. 3(2) verification retention; Art. 4(2) necessity; GDPR Art. 5(1)(e) and 89(1)"),

    // Model release.
    ModelReleaseScope => ("F9.release_scope", ModelRelease,
        "Is the model released publicly or only deployed internally?",
        "EDPB Opinion 28/2024 para. 46: public versus internal models"),
    ModelLeakageTesting => ("F9.leakage_testing", ModelRelease,
        "Has the model been tested against membership inference, regurgitation and extraction?",
        "EDPB Opinion 28/2024 paras. 31, 34 and 55"),
    ModelPlatformPermission => ("F9.platform_permission", ModelRelease,
        "Has the platform granted permission for derivative models?",
        "Platform developer terms; contract law"),

    // Distribution of outputs.
    DistributionOutputKind => ("F10.output_kind", Distribution,
        "What kind of output is being distributed?",
        "InfoSoc Directive Art. 3(1): communication to the public"),
    DistributionRulePack => ("F10.platform_rule", Distribution,
        "Platform rule-pack verdict",
        "Platform terms of service"),
    DistributionNoRight => ("F10.creation_not_distribution", Distribution,
        "TDM exceptions cover creation of copies, not their distribution",
        "DSM Directive Art. 3(2); InfoSoc Directive Art. 3(1); LG Hamburg 310 O 227/23 (LAION v. Kneschke)"),
    DistributionVerbatim => ("F10.verbatim_quotes", Distribution,
        "Verbatim quotations enable search-based re-identification and may reproduce protected expression",
        "CJEU C-5/08 Infopaq (eleven-word extracts); GDPR Art. 89(1)"),
    DistributionAggregate => ("F10.aggregate_privacy", Distribution,
        "Aggregate outputs are not anonymous by default",
        "GDPR Recital 26 and Art. 89(1); EDPB Opinion 28/2024 para. 52 (differential privacy)"),
    DistributionModel => ("F10.model_not_anonymous", Distribution,
        "Models trained on personal data cannot be presumed anonymous",
        "EDPB Opinion 28/2024 paras. 31 and 34"),
    DistributionNoExtraction => ("F10.no_lawful_extraction", Distribution,
        "Outputs derived from unlawfully mined data may not be distributed",
        "DSM Directive Art. 4(3); Database Directive Art. 7(1)"),
}

impl RuleId {
    pub fn citation(self) -> &'static str {
        citation(self)
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Serialisable manifest row.
#[derive(Debug, Clone, Serialize)]
pub struct RuleDefinition {
    pub rule_id: &'static str,
    pub tree: Tree,
    pub title: &'static str,
    pub citation: &'static str,
}

pub fn manifest() -> Vec<RuleDefinition> {
    RuleId::ALL
        .iter()
        .map(|&r| RuleDefinition {
            rule_id: r.as_str(),
            tree: r.tree(),
            title: r.title(),
            citation: r.citation(),
        })
        .collect()
}
