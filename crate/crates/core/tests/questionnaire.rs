use std::collections::BTreeMap;

use petlp_core::ledger::{StageId, StageStatus};
use petlp_core::optout::ReservationStatus;
use petlp_core::pipeline::{run_golden_scenario, CaseAssessment, CaseInputs, GoldenScenario, Outcome};
use petlp_core::policy::{OutputKind, Tree};
use petlp_core::questionnaire::*;
use petlp_core::DecisionTrace;

/// The case-study facts as questionnaire answers, in the order a wizard asks.
const CASE_STUDY: &[(&str, &str, &str)] = &[
    ("controllership", "F2.purposes", "yes"),
    ("controllership", "F2.means", "yes"),
    ("controllership", "F2.institution", "yes"),
    ("legal_basis", "F3.entity_kind", "university"),
    ("legal_basis", "F3.official_task", "yes"),
    ("legal_basis", "F3.special_category", "yes"),
    ("legal_basis", "F3.requested", "none"),
    ("research_organisation", "F4.primary_goal", "yes"),
    ("research_organisation", "F4.profit_handling", "not_for_profit"),
    ("research_organisation", "F4.public_mission", "yes"),
    ("research_organisation", "F4.decisive_influence", "no"),
    ("dpia_screening", "B.evaluation_scoring", "yes"),
    ("dpia_screening", "B.automated_decision", "no"),
    ("dpia_screening", "B.systematic_monitoring", "no"),
    ("dpia_screening", "B.sensitive", "yes"),
    ("dpia_screening", "B.large_scale", "yes"),
    ("dpia_screening", "B.matching_combining", "no"),
    ("dpia_screening", "B.vulnerable_subjects", "no"),
    ("dpia_screening", "B.innovative_use", "yes"),
    ("dpia_screening", "B.rights_prevention", "no"),
    ("dpia_screening", "B.profiling_public_social_media", "no"),
    ("platform_terms", "F5.lawful_access", "yes"),
    ("platform_terms", "F5.purpose", "scientific_research"),
    ("platform_terms", "F5.reservation", "robots_disallow"),
    ("extraction", "F6.channel", "platform_authorised"),
    ("extraction", "F6.public_data", "yes"),
    ("transform", "F7.direct_identifiers", "yes"),
    ("transform", "F7.anonymity_claim", "no"),
    ("storage", "F8.destination", "EEA"),
    ("model_release", "F9.release_scope", "public"),
    ("model_release", "F9.leakage_testing", "no"),
    ("model_release", "F9.platform_permission", "no"),
    ("distribution", "F10.output_kind", "model_weights"),
    ("distribution", "F10.verbatim_quotes", "no"),
    ("distribution", "F10.aggregate_privacy", "none"),
];

fn answer(svc: &CaseService, case: &str, tree: &str, node: &str, choice: &str) -> Result<AnswerResponse, QuestionnaireError> {
    svc.answer(
        case,
        &AnswerRequest {
            tree: tree.into(),
            node_id: node.into(),
            choice: choice.into(),
        },
    )
}

fn run_case_study(svc: &CaseService, base: Option<CaseInputs>) -> CaseView {
    let view = svc
        .create_case(CreateCaseRequest {
            case_id: Some("study".into()),
            inputs: base,
            ..Default::default()
        })
        .unwrap();
    for (tree, node, choice) in CASE_STUDY {
        answer(svc, &view.case_id, tree, node, choice).unwrap();
    }
    svc.get_case("study").unwrap()
}

fn ids(t: &DecisionTrace) -> Vec<String> {
    t.rule_ids().into_iter().map(String::from).collect()
}

/// Verdict and rule-id sequence the library assessment gives for a tree.
fn library(a: &CaseAssessment, tree: Tree) -> (String, Vec<String>) {
    fn s<T: serde::Serialize>(v: &T) -> String {
        serde_json::to_value(v).unwrap().as_str().unwrap().to_string()
    }
    fn ok<T>(o: &Outcome<T>) -> &T {
        o.decided().expect("decided")
    }
    match tree {
        Tree::Controllership => (s(&a.controllership.role), ids(&a.controllership.trace)),
        Tree::LegalBasis => {
            let d = ok(&a.legal_basis);
            (d.basis.as_str().into(), ids(&d.trace))
        }
        Tree::ResearchOrganisation => (
            if a.qualification.qualifies { "qualifies" } else { "does_not_qualify" }.into(),
            ids(&a.qualification.trace),
        ),
        Tree::DpiaScreening => (s(&a.dpia.status), ids(&a.dpia.trace)),
        Tree::PlatformTerms => {
            let d = ok(&a.tdm);
            (s(&d.exception), ids(&d.trace))
        }
        Tree::Extraction => {
            let d = ok(&a.extraction);
            (s(&d.verdict), ids(&d.trace))
        }
        Tree::Transform => (s(&a.transform.output_label), ids(&a.transform.trace)),
        Tree::Storage => {
            let d = ok(&a.transfers[0]);
            (s(&d.mechanism), ids(&d.trace))
        }
        Tree::ModelRelease => {
            let d = ok(&a.model_release);
            (d.verdict.as_str().into(), ids(&d.trace))
        }
        Tree::Distribution => {
            let d = ok(&a.distribution[&OutputKind::ModelWeights]);
            (d.verdict.as_str().into(), ids(&d.trace))
        }
    }
}

#[test]
fn case_study_answers_match_the_golden_assessment() {
    let golden = run_golden_scenario(&GoldenScenario::bundled()).unwrap();
    let mut scenario_base = GoldenScenario::bundled().inputs;
    scenario_base.reservation = ReservationStatus::none();
    for base in [None, Some(scenario_base)] {
        let svc = CaseService::in_memory();
        let view = run_case_study(&svc, base);
        for state in &view.trees {
            assert!(state.current.is_none(), "{:?} unanswered", state.tree);
            let Endpoint::Decided { verdict, trace, .. } = &state.endpoint else {
                panic!("{:?}: {:?}", state.tree, state.endpoint)
            };
            let (want, want_ids) = library(&golden.assessment, state.tree);
            assert_eq!(verdict, &want, "{:?}", state.tree);
            assert_eq!(ids(trace), want_ids, "{:?}", state.tree);
        }
    }
}

#[test]
fn case_study_endpoints_agree_with_golden_strings() {
    let golden = run_golden_scenario(&GoldenScenario::bundled()).unwrap();
    let svc = CaseService::in_memory();
    let view = run_case_study(&svc, None);
    let by_tree: BTreeMap<Tree, &str> = view
        .trees
        .iter()
        .map(|t| (t.tree, t.endpoint.verdict().unwrap()))
        .collect();
    assert_eq!(by_tree[&Tree::LegalBasis], golden.endpoints["legal_basis.basis"]);
    assert_eq!(by_tree[&Tree::DpiaScreening], golden.endpoints["dpia.status"]);
    assert_eq!(by_tree[&Tree::PlatformTerms], golden.endpoints["tdm.exception"]);
    assert_eq!(by_tree[&Tree::Extraction], golden.endpoints["extraction.verdict"]);
    assert_eq!(by_tree[&Tree::Storage], golden.endpoints["transfer.mechanism"]);
    assert_eq!(by_tree[&Tree::Distribution], golden.endpoints["present.model_weights"]);
}

#[test]
fn whatif_commercial_purpose_blocks_extraction_without_touching_the_case() {
    let svc = CaseService::in_memory();
    let before = run_case_study(&svc, None);
    let r = svc
        .whatif(
            "study",
            &WhatIfRequest {
                node_id: "F5.purpose".into(),
                choice: "commercial".into(),
            },
        )
        .unwrap();
    let x = r.trees.iter().find(|t| t.tree == Tree::Extraction).unwrap();
    assert_eq!(x.actual.verdict(), Some("permitted"));
    assert_eq!(x.hypothetical.verdict(), Some("blocked"));
    assert!(x.changed && r.changed_any);
    let c = r.trees.iter().find(|t| t.tree == Tree::Controllership).unwrap();
    assert!(!c.changed);
    assert_eq!(svc.get_case("study").unwrap(), before);
}

#[test]
fn unknown_and_invalid_answers_are_rejected() {
    let svc = CaseService::in_memory();
    svc.create_case(CreateCaseRequest {
        case_id: Some("c".into()),
        ..Default::default()
    })
    .unwrap();
    let e = answer(&svc, "c", "legal_basis", "F9.nope", "yes").unwrap_err();
    assert_eq!(e.code(), "unknown_node");
    let e = answer(&svc, "c", "legal_basis", "F4.primary_goal", "yes").unwrap_err();
    assert_eq!(e.code(), "unknown_node");
    let e = answer(&svc, "c", "no_such_tree", "F2.means", "yes").unwrap_err();
    assert_eq!(e.code(), "unknown_tree");
    let e = answer(&svc, "c", "controllership", "F2.purposes", "maybe").unwrap_err();
    assert_eq!(e.code(), "invalid_choice");
    let e = answer(&svc, "c", "controllership", "F2.means", "yes").unwrap_err();
    assert_eq!(e.code(), "node_not_reachable");
    let e = answer(&svc, "missing", "controllership", "F2.purposes", "yes").unwrap_err();
    assert_eq!(e.code(), "case_not_found");
    let e = svc
        .whatif(
            "c",
            &WhatIfRequest {
                node_id: "X.1".into(),
                choice: "yes".into(),
            },
        )
        .unwrap_err();
    assert_eq!(e.code(), "unknown_node");
    assert!(svc.get_case("c").unwrap().answers.is_empty());
}

#[test]
fn answers_advance_the_path_and_report_the_next_node() {
    let svc = CaseService::in_memory();
    svc.create_case(CreateCaseRequest {
        case_id: Some("c".into()),
        ..Default::default()
    })
    .unwrap();
    let r = answer(&svc, "c", "research_organisation", "F4.primary_goal", "yes").unwrap();
    assert_eq!(r.state.current.as_ref().unwrap().id, "F4.profit_handling");
    assert!(matches!(r.state.endpoint, Endpoint::Pending { .. }));
    for (n, c) in [
        ("F4.profit_handling", "not_for_profit"),
        ("F4.public_mission", "yes"),
        ("F4.decisive_influence", "yes"),
    ] {
        answer(&svc, "c", "research_organisation", n, c).unwrap();
    }
    let r = answer(&svc, "c", "research_organisation", "F4.preferential_access", "yes").unwrap();
    assert_eq!(r.state.endpoint.verdict(), Some("does_not_qualify"));
    assert_eq!(r.state.path.len(), 5);

    // Changing an earlier answer drops the branch after it.
    let r = answer(&svc, "c", "research_organisation", "F4.decisive_influence", "no").unwrap();
    assert_eq!(r.state.endpoint.verdict(), Some("qualifies"));
    assert_eq!(r.state.path.len(), 4);
    assert_eq!(r.warnings.len(), 1);
    assert!(r.warnings[0].contains("F4.preferential_access"));
}

#[test]
fn dependent_trees_stay_pending_until_their_inputs_are_answered() {
    let svc = CaseService::in_memory();
    svc.create_case(CreateCaseRequest {
        case_id: Some("c".into()),
        ..Default::default()
    })
    .unwrap();
    answer(&svc, "c", "extraction", "F6.channel", "self_directed").unwrap();
    let r = answer(&svc, "c", "extraction", "F6.public_data", "yes").unwrap();
    let Endpoint::Pending { missing } = r.state.endpoint else { panic!() };
    assert_eq!(missing, vec![Tree::ResearchOrganisation, Tree::PlatformTerms]);
}

#[test]
fn shared_nodes_are_answered_once() {
    let svc = CaseService::in_memory();
    svc.create_case(CreateCaseRequest {
        case_id: Some("c".into()),
        ..Default::default()
    })
    .unwrap();
    for (n, c) in [("F3.entity_kind", "university"), ("F3.official_task", "yes"), ("F3.special_category", "no")] {
        answer(&svc, "c", "legal_basis", n, c).unwrap();
    }
    let r = answer(&svc, "c", "transform", "F7.direct_identifiers", "yes").unwrap();
    assert_eq!(r.state.current.as_ref().unwrap().id, "F7.anonymity_claim");
    let r = answer(&svc, "c", "transform", "F7.anonymity_claim", "yes").unwrap();
    assert_eq!(r.state.endpoint.verdict(), Some("pseudonymised"));
}

#[test]
fn dpia_view_tracks_ledger_and_gates() {
    let svc = CaseService::in_memory();
    let fields = GoldenScenario::bundled().dpia;
    let view = run_case_study(&svc, None);
    let d = svc.dpia(&view.case_id).unwrap();
    assert!(!d.initialised);
    assert!(d.gates.iter().filter(|g| g.stage != StageId::PreRegistration).all(|g| !g.allowed));

    let d = svc
        .record_dpia(
            "study",
            DpiaUpdateRequest {
                stage: StageId::PreRegistration,
                fields: fields[&StageId::PreRegistration].clone(),
                citations: vec![],
                author: None,
            },
        )
        .unwrap();
    assert!(d.initialised);
    assert_eq!(d.stage_status[&StageId::PreRegistration], StageStatus::Complete);
    let extract = d.gates.iter().find(|g| g.stage == StageId::Extract).unwrap();
    assert!(extract.allowed, "{:?}", extract.blockers);

    let e = svc
        .record_dpia(
            "study",
            DpiaUpdateRequest {
                stage: StageId::Present,
                fields: fields[&StageId::Present].clone(),
                citations: vec![],
                author: None,
            },
        )
        .unwrap_err();
    assert_eq!(e.code(), "out_of_order_stage");
}

#[test]
fn tree_listing_covers_every_node() {
    let trees = tree_views();
    assert_eq!(trees.len(), 10);
    for t in &trees {
        assert_eq!(t.nodes[0].id, t.root);
        for n in &t.nodes {
            assert!(!n.citation.is_empty());
            assert!(!n.options.is_empty());
        }
    }
    let json = serde_json::to_value(&trees).unwrap();
    assert_eq!(json[0]["tree"], "controllership");
}

#[test]
fn duplicate_case_ids_conflict() {
    let svc = CaseService::in_memory();
    let req = CreateCaseRequest {
        case_id: Some("dup".into()),
        ..Default::default()
    };
    svc.create_case(req.clone()).unwrap();
    assert_eq!(svc.create_case(req).unwrap_err().code(), "case_exists");
    let auto = svc.create_case(CreateCaseRequest::default()).unwrap();
    assert_eq!(auto.case_id, "case-1");
}
