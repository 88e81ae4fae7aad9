use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use proptest::sample::subsequence;
use serde_json::json;

use petlp_core::ledger::{
    export_report, gate_check, replay, DpiaDocument, GateDecisions, PipelineMode, ReportFormat, StageId, StageStatus,
};
use petlp_core::optout::{is_allowed, parse_robots, plan_window, tdm_reservation, RobotsGroup, RobotsPolicy, RobotsRule, RuleKind, TimeRange};
use petlp_core::pipeline::{
    retention_tick, DataCategory, DatasetManifest, GoldenScenario, RetentionEventKind, RetentionSchedule, RetentionState,
};
use petlp_core::policy::distribution::safeguard;
use petlp_core::policy::{
    assess_dpia_requirement, check_distribution, evaluate_tdm, qualify_research_organisation, select_legal_basis,
    DpiaStatus, EntityKind, LegalBasis, OutputKind, PlatformRulePack, PolicyError, ProfitHandling, Purpose,
    ResearcherProfile, TdmException, Verdict, Wp29CriteriaSet,
};
use petlp_core::transform::{
    apply_minimisation, generalise_timestamps, normalise_words, pseudonymise, scan_verbatim_leak, AllowedField,
    CorpusDoc, MinimisationPlan, PseudonymisationSpec, Record, Salt,
};

fn base_profile() -> ResearcherProfile {
    GoldenScenario::bundled().inputs.profile
}

fn entity() -> impl Strategy<Value = EntityKind> {
    prop_oneof![
        Just(EntityKind::University),
        Just(EntityKind::ResearchInstitute),
        Just(EntityKind::PublicAuthority),
        Just(EntityKind::Commercial),
        Just(EntityKind::NonprofitOther),
    ]
}

fn profit() -> impl Strategy<Value = ProfitHandling> {
    prop_oneof![
        Just(ProfitHandling::NotForProfit),
        Just(ProfitHandling::ReinvestsProfits),
        Just(ProfitHandling::ForProfit),
    ]
}

fn profile() -> impl Strategy<Value = ResearcherProfile> {
    (
        entity(),
        any::<bool>(),
        profit(),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        prop_oneof![Just(Purpose::ScientificResearch), Just(Purpose::Commercial), Just(Purpose::Mixed)],
        proptest::option::of(Just("statutory research mandate".to_string())),
        any::<bool>(),
    )
        .prop_map(|(kind, goal, profit, mission, influence, preferential, purpose, task, commercialise)| {
            let mut p = base_profile();
            p.entity_kind = kind;
            p.primary_goal_research = goal;
            p.profit_handling = profit;
            p.public_interest_mission = mission;
            p.decisive_commercial_influence = influence;
            p.preferential_commercial_access = preferential;
            p.purpose = purpose;
            p.official_task_scope = task;
            p.commercialisation_planned = Some(commercialise);
            p
        })
}

fn stage_fields(stage: StageId) -> BTreeMap<String, String> {
    stage.required_fields().iter().map(|f| (f.to_string(), "recorded".into())).collect()
}

fn ts(n: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(n)
}

fn mode() -> impl Strategy<Value = PipelineMode> {
    prop_oneof![Just(PipelineMode::Etl), Just(PipelineMode::Elt)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dpia_is_monotone_and_traced(bits in 0u16..512, extra in 0u16..9, profiling in any::<bool>()) {
        let mut ctx = GoldenScenario::bundled().inputs.context;
        ctx.profiling_of_public_social_media = profiling;
        let before = assess_dpia_requirement(&Wp29CriteriaSet::from_bits(bits), &ctx);
        let after = assess_dpia_requirement(&Wp29CriteriaSet::from_bits(bits | (1 << extra)), &ctx);
        prop_assert!(after.status >= before.status);
        prop_assert!(before.trace.entries().iter().any(|e| !e.citation.is_empty()));
        let again = assess_dpia_requirement(&Wp29CriteriaSet::from_bits(bits), &ctx);
        prop_assert_eq!(before.trace.rule_ids(), again.trace.rule_ids());
        prop_assert_eq!(before.status, again.status);
    }

    #[test]
    fn basis_routing_is_exhaustive(p in profile(), special in any::<bool>(),
        requested in proptest::option::of(prop_oneof![
            Just(LegalBasis::Consent), Just(LegalBasis::PublicTask), Just(LegalBasis::LegitimateInterest)
        ])) {
        let mut ctx = GoldenScenario::bundled().inputs.context;
        ctx.special_category_possible = special;
        match select_legal_basis(&p, &ctx, requested) {
            Ok(d) => {
                prop_assert!(d.trace.entries().iter().all(|e| !e.citation.is_empty()));
                if let Some(r) = requested {
                    prop_assert_eq!(d.basis, r);
                }
            }
            Err(PolicyError::ForbiddenBasis { .. }) => prop_assert!(requested.is_some()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn qualification_matches_formula(p in profile()) {
        let r = qualify_research_organisation(&p);
        let want = p.primary_goal_research
            && (matches!(p.profit_handling, ProfitHandling::NotForProfit | ProfitHandling::ReinvestsProfits)
                || p.public_interest_mission)
            && !(p.decisive_commercial_influence && p.preferential_commercial_access);
        prop_assert_eq!(r.qualifies, want);
        prop_assert_eq!(r.failed_criteria.is_empty(), want);
        prop_assert!(r.trace.entries().iter().any(|e| !e.citation.is_empty()));
    }

    #[test]
    fn article3_never_loosens_raw_dataset(p in profile(), reserved in any::<bool>(), lawful in any::<bool>(),
        tags in subsequence(vec![
            safeguard::PLATFORM_PERMISSION,
            safeguard::VERBATIM_LEAK_SCAN_PASSED,
            safeguard::DIFFERENTIAL_PRIVACY,
            safeguard::K_ANONYMITY_AUDIT,
            safeguard::MODEL_LEAKAGE_TESTED,
        ], 0..=5)) {
        let mut reservation = GoldenScenario::bundled().inputs.reservation;
        reservation.reserved = reserved;
        let Ok(tdm) = evaluate_tdm(&p, p.purpose, &reservation, lawful) else { return Ok(()) };
        if tdm.exception != TdmException::Article3 {
            return Ok(());
        }
        prop_assert!(tdm.tos_override);
        let pack = PlatformRulePack::reddit();
        let safeguards: BTreeSet<String> = tags.iter().map(|s| s.to_string()).collect();
        let d = check_distribution(OutputKind::DatasetRaw, Some(&pack), &tdm, &safeguards).unwrap();
        let ceiling = pack.select(OutputKind::DatasetRaw, &safeguards).map_or(Verdict::Blocked, |r| r.verdict);
        prop_assert!(d.verdict <= ceiling, "{:?} above pack {:?}", d.verdict, ceiling);
    }

    #[test]
    fn ledger_replay_staleness_and_gates(mode in mode(), done in 1usize..=5, reopen_at in 0usize..5) {
        let order = mode.order();
        let mut doc = DpiaDocument::init("p", mode, stage_fields(StageId::PreRegistration), "r", ts(0)).unwrap();
        let mut allowed_before: BTreeSet<StageId> = BTreeSet::new();
        for (i, stage) in order[1..done].iter().enumerate() {
            let versions = doc.version();
            for s in StageId::ALL {
                if gate_check(&doc, s, &GateDecisions::default()).allowed {
                    allowed_before.insert(s);
                }
            }
            doc = doc.record_update(*stage, stage_fields(*stage), vec![], "r", ts(i as i64 + 1)).unwrap();
            prop_assert_eq!(doc.version(), versions + 1);
            for s in &allowed_before {
                let s = *s;
                // The extract gate also depends on decisions, which stay absent here.
                if s != StageId::Extract {
                    prop_assert!(gate_check(&doc, s, &GateDecisions::default()).allowed, "{s} gate closed");
                }
            }
        }
        let before = doc.stage_status();
        let at = order[reopen_at];
        let doc = doc.reopen_on_change("change", at, "r", ts(100));
        let after = doc.stage_status();
        for s in StageId::ALL {
            let expect_stale = mode.position(s) >= mode.position(at) && before[&s] == StageStatus::Complete;
            if expect_stale {
                prop_assert_eq!(after[&s], StageStatus::Stale, "{}", s);
            } else {
                prop_assert_eq!(after[&s], before[&s], "{}", s);
            }
        }
        prop_assert_eq!(replay(mode, doc.versions()), after);
        let log = serde_json::to_string(doc.versions()).unwrap();
        let rebuilt = DpiaDocument::from_entries("p", mode, serde_json::from_str(&log).unwrap()).unwrap();
        prop_assert_eq!(rebuilt.stage_status(), doc.stage_status());
        for f in [ReportFormat::Json, ReportFormat::Markdown] {
            prop_assert_eq!(export_report(&doc, f), export_report(&rebuilt, f));
        }
    }
}

fn pattern() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![Just("/"), Just("a"), Just("b"), Just("*"), Just(".")], 0..5).prop_flat_map(
        |parts| {
            let body = parts.concat();
            (Just(body), any::<bool>()).prop_map(|(b, anchor)| {
                let b = if b.starts_with('/') || b.starts_with('*') || b.is_empty() { b } else { format!("/{b}") };
                if anchor && !b.is_empty() {
                    format!("{b}$")
                } else {
                    b
                }
            })
        },
    )
}

fn policy() -> impl Strategy<Value = RobotsPolicy> {
    let rule = (any::<bool>(), pattern()).prop_map(|(allow, p)| RobotsRule {
        kind: if allow || p.is_empty() { RuleKind::Allow } else { RuleKind::Disallow },
        path_prefix: p,
    });
    let group = (
        subsequence(vec!["*", "bot", "crawler"], 1..=2),
        prop::collection::vec(rule, 1..5),
    )
        .prop_map(|(agents, rules)| RobotsGroup {
            agents: agents.into_iter().map(String::from).collect(),
            rules,
        });
    prop::collection::vec(group, 0..4).prop_map(|groups| RobotsPolicy { groups })
}

fn path() -> impl Strategy<Value = String> {
    "/[ab./]{0,6}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn robots_round_trip(p in policy()) {
        let again = parse_robots(&p.serialize());
        prop_assert_eq!(&again, &p);
        for agent in ["bot", "crawler", "other"] {
            for path in ["/", "/a", "/ab", "/a.b", "/b/a", ""] {
                prop_assert_eq!(is_allowed(&p, agent, path), is_allowed(&again, agent, path));
            }
        }
    }

    #[test]
    fn adding_disallow_never_allows(mut p in policy(), extra in pattern(), agent in prop_oneof![Just("bot"), Just("other")], path in path()) {
        let was = is_allowed(&p, agent, &path);
        let target = p.groups.iter().position(|g| g.agents.iter().any(|a| a == agent))
            .or_else(|| p.groups.iter().position(|g| g.agents.iter().any(|a| a == "*")));
        let Some(i) = target else { return Ok(()) };
        if extra.is_empty() {
            return Ok(());
        }
        p.groups[i].rules.push(RobotsRule { kind: RuleKind::Disallow, path_prefix: extra });
        if !was {
            prop_assert!(!is_allowed(&p, agent, &path));
        }
    }

    #[test]
    fn reservation_is_conjunction(p in policy(), scope in prop::collection::vec(path(), 1..4)) {
        let r = tdm_reservation(&p, "bot", &scope).unwrap();
        prop_assert_eq!(r.reserved, scope.iter().all(|s| !is_allowed(&p, "bot", s)));
    }

    #[test]
    fn window_is_within_request_and_horizon(a in 0i64..1000, len in 0i64..1000, back in 0i64..500, months in 1u32..12) {
        let now = ts(0) + Duration::days(2000);
        let start = now - Duration::days(a + len + back);
        let end = now - Duration::days(back);
        let requested = TimeRange::new(start, end);
        let r = plan_window(requested, now, months).unwrap();
        let horizon = now.checked_sub_months(chrono::Months::new(months)).unwrap();
        if let Some(acc) = r.accessible_range {
            prop_assert!(requested.contains_range(&acc));
            prop_assert!(acc.start >= horizon && acc.end <= now);
        } else {
            prop_assert!(end < horizon);
        }
    }
}

fn records() -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec(
        (0u32..6, "[a-z]{0,8}", 1_600_000_000i64..1_700_000_000, any::<bool>()),
        0..12,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(id, body, t, score)| {
                let mut r = Record::new();
                r.insert("id".into(), json!(format!("t3_{id}")));
                r.insert("body".into(), json!(body));
                r.insert("created_utc".into(), json!(t));
                if score {
                    r.insert("score".into(), json!(id));
                }
                r
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minimisation_is_idempotent(rs in records(), keep in subsequence(vec!["id", "body", "score", "absent"], 0..=4)) {
        let plan = MinimisationPlan {
            allowlist: keep.iter().map(|f| AllowedField { field_name: f.to_string(), justification: "needed".into() }).collect(),
        };
        let (once, _) = apply_minimisation(&rs, &plan).unwrap();
        let (twice, _) = apply_minimisation(&once, &plan).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn pseudonyms_are_consistent(rs in records()) {
        let salt = Salt::new(vec![7u8; 32]).unwrap();
        let (out, _) = pseudonymise(&rs, &PseudonymisationSpec::reddit_default(), Some(&salt)).unwrap();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (raw, r) in rs.iter().zip(&out) {
            let raw_id = raw["id"].as_str().unwrap().to_string();
            let digest = r["id"].as_str().unwrap().to_string();
            prop_assert!(digest.len() * 4 >= 128);
            if let Some(prev) = seen.insert(digest.clone(), raw_id.clone()) {
                prop_assert_eq!(prev, raw_id);
            }
        }
        let raw_ids: BTreeSet<_> = rs.iter().map(|r| r["id"].to_string()).collect();
        prop_assert_eq!(seen.len(), raw_ids.len());
    }

    #[test]
    fn generalisation_coarsens(rs in records()) {
        let field = vec!["created_utc".to_string()];
        let (out, _) = generalise_timestamps(&rs, &field).unwrap();
        let distinct = |v: &[Record]| v.iter().map(|r| r["created_utc"].to_string()).collect::<BTreeSet<_>>().len();
        prop_assert!(distinct(&out) <= distinct(&rs));
    }

    #[test]
    fn leak_scan_matches_exhaustive_alignment(
        out in prop::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c")], 0..40),
        docs in prop::collection::vec(prop::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c")], 0..40), 1..3),
        k in 1usize..6,
    ) {
        let corpus: Vec<CorpusDoc> = docs.iter().enumerate()
            .map(|(i, d)| CorpusDoc { id: format!("d{i}"), text: d.join(" ") })
            .collect();
        let report = scan_verbatim_leak(&out.join(" "), &corpus, k);
        let o = normalise_words(&out.join(" "));
        let mut want = BTreeSet::new();
        for doc in &corpus {
            let w = normalise_words(&doc.text);
            for i in 0..o.len() {
                for j in 0..w.len() {
                    if i > 0 && j > 0 && o[i - 1] == w[j - 1] {
                        continue;
                    }
                    let mut n = 0;
                    while i + n < o.len() && j + n < w.len() && o[i + n] == w[j + n] {
                        n += 1;
                    }
                    if n >= k {
                        want.insert((doc.id.clone(), i, j, n));
                    }
                }
            }
        }
        let got: BTreeSet<_> = report.matches.iter()
            .map(|m| (m.corpus_doc_id.clone(), m.output_start, m.corpus_start, m.length_words))
            .collect();
        prop_assert_eq!(got.len(), report.matches.len());
        prop_assert!(report.matches.iter().all(|m| m.length_words >= k));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn retention_events_fire_once_and_in_order(
        datasets in prop::collection::vec((0usize..3, 0i64..3000, any::<bool>()), 1..5),
        ticks in prop::collection::vec(0i64..4000, 1..40),
    ) {
        let cats = DataCategory::ALL;
        let manifests: Vec<DatasetManifest> = datasets.iter().enumerate().map(|(i, (c, loaded, hold))| {
            let mut m = DatasetManifest::new(&format!("ds{i}"), cats[*c], "eu");
            m.loaded_at = Some(ts(0) + Duration::days(*loaded));
            m.legal_hold = *hold;
            m
        }).collect();
        let mut ticks = ticks;
        ticks.sort();
        let schedule = RetentionSchedule::default();
        let mut state = RetentionState::new();
        let mut seen: BTreeMap<(String, RetentionEventKind), DateTime<Utc>> = BTreeMap::new();
        for t in ticks {
            for e in retention_tick(&schedule, &manifests, ts(0) + Duration::days(t), &mut state).unwrap() {
                prop_assert!(seen.insert((e.dataset_id.clone(), e.kind), e.due_at).is_none(), "{:?} twice", e);
                if e.kind != RetentionEventKind::Alert {
                    let alert = seen.get(&(e.dataset_id.clone(), RetentionEventKind::Alert));
                    prop_assert!(alert.is_some_and(|a| *a <= e.due_at));
                }
            }
        }
        for m in &manifests {
            if m.category == DataCategory::AggregateOutput {
                prop_assert!(!seen.keys().any(|(id, _)| *id == m.dataset_id));
            }
        }
    }
}

#[test]
fn golden_is_deterministic() {
    let s = GoldenScenario::bundled();
    let a = serde_json::to_string(&petlp_core::pipeline::run_golden_scenario(&s).unwrap()).unwrap();
    let b = serde_json::to_string(&petlp_core::pipeline::run_golden_scenario(&s).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn wp29_criteria_count_is_popcount() {
    for bits in 0u16..512 {
        assert_eq!(Wp29CriteriaSet::from_bits(bits).count(), bits.count_ones());
    }
    assert_eq!(Wp29CriteriaSet::LEN, 9);
    let ctx = GoldenScenario::bundled().inputs.context;
    assert_eq!(assess_dpia_requirement(&Wp29CriteriaSet::default(), &ctx).status, DpiaStatus::NotRequired);
}
