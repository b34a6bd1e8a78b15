mod common;

use proptest::prelude::*;

use tailor_core::gateway::{ChatTask, MockGateway, MockMode, ScriptEntry};
use tailor_core::generation::RenderFormat;
use tailor_core::jd::{extract_elements, ElementCategory, SkillLexicon};
use tailor_core::pipeline::{NodeId, Pipeline, PipelineError, RunConfig, RunInputs};
use tailor_core::vault::Vault;

#[test]
fn golden_element_counts() {
    let golden: serde_json::Value =
        serde_json::from_str(&common::read("golden/jd_data_analyst.elements.json")).unwrap();
    let jd =
        extract_elements(&common::jd("jd_data_analyst.txt"), &SkillLexicon::default()).unwrap();
    assert_eq!(jd.role_title.as_deref(), golden["role_title"].as_str());
    let count = |c| jd.of_category(c).count() as u64;
    assert_eq!(
        count(ElementCategory::Responsibility),
        golden["responsibility"]
    );
    assert_eq!(
        count(ElementCategory::Qualification),
        golden["qualification"]
    );
    assert_eq!(count(ElementCategory::Skill), golden["skill"]);
    let skills: Vec<&str> = jd
        .of_category(ElementCategory::Skill)
        .map(|e| e.text.as_str())
        .collect();
    let want: Vec<&str> = golden["skills"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(skills, want);
}

#[test]
fn baseline_never_reads_the_vault() {
    let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
    let vault = common::fixture_vault(&gw);
    let lex = SkillLexicon::default();
    let p = Pipeline::new(&vault, &gw, &lex);
    let cfg = RunConfig {
        retrieval_enabled: false,
        ..RunConfig::default()
    };
    let st = p
        .run("b", &common::inputs("jd_data_analyst.txt"), &cfg)
        .unwrap();
    assert_eq!(vault.read_count(), 0);
    assert!(st.retrieved.is_empty());
    assert!(st
        .draft
        .as_ref()
        .unwrap()
        .entries()
        .flat_map(|e| e.bullets())
        .all(|b| !b.provenance.tag.is_vault()));

    p.run(
        "v",
        &common::inputs("jd_data_analyst.txt"),
        &RunConfig::default(),
    )
    .unwrap();
    assert!(vault.read_count() > 0);
}

#[test]
fn ok_run_visits_every_node_once_in_order() {
    let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
    let vault = common::fixture_vault(&gw);
    let lex = SkillLexicon::default();
    let mut seen = Vec::new();
    let st = Pipeline::new(&vault, &gw, &lex)
        .run_observed(
            "o",
            &common::inputs("jd_bi_analyst.txt"),
            &RunConfig::default(),
            &mut |e| seen.push(e.node_id),
        )
        .unwrap();
    assert_eq!(seen, NodeId::ORDER.to_vec());
    assert_eq!(st.trace.len(), 12);
    assert!(st
        .trace
        .iter()
        .enumerate()
        .all(|(i, e)| e.seq == i && e.pass == 1));
    assert_eq!(st.pass_count, 1);
}

#[test]
fn one_rewrite_repeats_stages_six_to_eleven() {
    let script = vec![ScriptEntry {
        task: Some(ChatTask::Review),
        text: r#"{"status":"needs_rewrite","issues":[{"kind":"duplication","note":"merge the two SQL bullets"}]}"#.into(),
        error: None,
    }];
    let gw = MockGateway::new(MockMode::Scripted, 42, 64).with_script(script);
    let vault = common::fixture_vault(&gw);
    let lex = SkillLexicon::default();
    let st = Pipeline::new(&vault, &gw, &lex)
        .run(
            "r",
            &common::inputs("jd_data_analyst.txt"),
            &RunConfig::default(),
        )
        .unwrap();
    let ids: Vec<NodeId> = st.trace.iter().map(|e| e.node_id).collect();
    let mut want = NodeId::ORDER[..11].to_vec();
    want.extend_from_slice(&NodeId::ORDER[5..]);
    assert_eq!(ids, want);
    assert_eq!(st.pass_count, 2);
    assert!(st.trace[11..].iter().all(|e| e.pass == 2));
    // Review feedback reaches the second rewrite.
    let rewrites: Vec<_> = gw
        .requests()
        .into_iter()
        .filter(|r| r.task == ChatTask::Rewrite)
        .collect();
    assert!(rewrites.iter().any(|r| r
        .messages
        .iter()
        .any(|m| m.content.contains("merge the two SQL bullets"))));
}

#[test]
fn offline_gateway_degrades_but_completes() {
    let gw = MockGateway::new(MockMode::Offline, 42, 64);
    let vault = common::fixture_vault(&gw);
    let lex = SkillLexicon::default();
    let st = Pipeline::new(&vault, &gw, &lex)
        .run(
            "off",
            &common::inputs("jd_data_analyst.txt"),
            &RunConfig::default(),
        )
        .unwrap();
    assert!(!st.flags.is_empty());
    assert_eq!(st.trace.len(), 12);
    assert!(st.rendered[&RenderFormat::Txt].contains("Jordan Avery"));
}

#[test]
fn invalid_config_is_rejected_before_any_node() {
    let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
    let vault = Vault::new(64);
    let lex = SkillLexicon::default();
    let cfg = RunConfig {
        tau: 1.5,
        ..RunConfig::default()
    };
    match Pipeline::new(&vault, &gw, &lex).run("x", &common::inputs("jd_data_analyst.txt"), &cfg) {
        Err(PipelineError::InvalidConfig { field, .. }) => assert_eq!(field, "tau"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unparseable_resume_fails_at_ingest_with_partial_trace() {
    let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
    let vault = Vault::new(64);
    let lex = SkillLexicon::default();
    let inputs = RunInputs::markdown(common::jd("jd_data_analyst.txt"), "   \n");
    match Pipeline::new(&vault, &gw, &lex).run("x", &inputs, &RunConfig::default()) {
        Err(e @ PipelineError::NodeFailure { .. }) => assert_eq!(e.node(), Some("ingest_resume")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_vault_routes_everything_to_fallback() {
    let gw = MockGateway::new(MockMode::IdentityRewrite, 42, 64);
    let vault = Vault::new(64);
    let lex = SkillLexicon::default();
    let st = Pipeline::new(&vault, &gw, &lex)
        .run(
            "e",
            &common::inputs("jd_clinical_nurse.txt"),
            &RunConfig::default(),
        )
        .unwrap();
    assert!(st.snippets.is_empty());
    let draft = st.draft.as_ref().unwrap();
    assert!(draft.check_merge_exclusion().is_ok());
    assert!(draft
        .tailored_highlights
        .iter()
        .all(|h| h.provenance.tag.is_fallback()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn review_scripts_bound_the_feedback_edge(verdicts in prop::collection::vec(any::<bool>(), 0..5)) {
        let script = verdicts.iter().map(|needs| ScriptEntry {
            task: Some(ChatTask::Review),
            text: if *needs { r#"{"status":"needs_rewrite","issues":[{"kind":"alignment","note":"x"}]}"# } else { r#"{"status":"ok"}"# }.into(),
            error: None,
        }).collect();
        let gw = MockGateway::new(MockMode::Scripted, 42, 64).with_script(script);
        let vault = Vault::new(64);
        let lex = SkillLexicon::default();
        let st = Pipeline::new(&vault, &gw, &lex)
            .run("p", &common::inputs("jd_demand_planner.txt"), &RunConfig::default())
            .unwrap();
        let rewrites = st.trace.iter().filter(|e| e.node_id == NodeId::Rewrite).count();
        let looped = verdicts.first() == Some(&true);
        prop_assert_eq!(rewrites, if looped { 2 } else { 1 });
        prop_assert_eq!(st.trace.len(), if looped { 18 } else { 12 });
        prop_assert!(st.pass_count <= 2);
    }
}
