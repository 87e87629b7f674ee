mod common;

use longmm_core::ads::{plan, plan_batch, plan_or_discard, AdsError, DiscardReason, ItemPlan, PlanRecord};
use longmm_core::manifest::{ImageDims, Sample, VisualItem};
use longmm_core::{AdsConfig, Exec, Verdict};
use proptest::prelude::*;

fn sample(items: Vec<VisualItem>, text: u64) -> Sample {
    Sample {
        id: "s".into(),
        items,
        text_tokens: text,
        tags: vec![],
    }
}

fn video(d: f64) -> VisualItem {
    VisualItem::Video {
        duration_s: d,
        uri: "v.mp4".into(),
    }
}

fn doc(p: u32) -> VisualItem {
    VisualItem::Document {
        pages: p,
        uri: "d.pdf".into(),
    }
}

fn image(w: u32, h: u32) -> VisualItem {
    VisualItem::Image {
        dims: ImageDims::new(w, h).unwrap(),
        uri: "i.png".into(),
    }
}

#[test]
fn worked_plans() {
    // long video under a 32k budget
    let p = plan(&sample(vec![video(100.0)], 768), &AdsConfig::new(32768)).unwrap();
    assert_eq!(p.temporal_units(), 125);
    assert_eq!(p.total_tokens, 32768);
    match &p.items[0] {
        ItemPlan::Video { frames, timestamps } => {
            assert_eq!(*frames, 125);
            assert_eq!(timestamps[0], 0.4);
            assert!((timestamps[124] - 99.6).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }

    // every page of a short document fits
    let p = plan(&sample(vec![doc(10)], 1000), &AdsConfig::new(8192)).unwrap();
    assert_eq!(p.temporal_units(), 10);
    assert_eq!(p.total_tokens, 3560);

    // three images at full resolution
    let s = sample(vec![image(896, 448), image(896, 448), image(896, 448)], 1000);
    let p = plan(&s, &AdsConfig::new(4096)).unwrap();
    assert_eq!(p.tile_cap, 12);
    assert_eq!(p.total_tokens, 3304);

    // visual floor does not fit
    let p = plan(&sample(vec![video(60.0)], 1500), &AdsConfig::new(2048)).unwrap();
    assert_eq!(p.verdict, Verdict::Discarded(DiscardReason::InsufficientBudget));
    let rec = PlanRecord::from(&p);
    assert_eq!(rec.verdict, "discarded");
    assert_eq!(rec.reason.as_deref(), Some("insufficient_budget"));
}

#[test]
fn text_overflow() {
    let s = sample(vec![doc(1)], 4096);
    assert!(matches!(plan(&s, &AdsConfig::new(4096)), Err(AdsError::TextOverflow { .. })));
    assert_eq!(
        plan_or_discard(&s, &AdsConfig::new(4096)).verdict,
        Verdict::Discarded(DiscardReason::TextOverflow)
    );
}

fn arb_item() -> impl Strategy<Value = VisualItem> {
    prop_oneof![
        (1u32..=8192, 1u32..=8192).prop_map(|(w, h)| image(w, h)),
        (0.5f64..7200.0).prop_map(video),
        (1u32..=400).prop_map(doc),
    ]
}

pub fn arb_sample() -> impl Strategy<Value = Sample> {
    (prop::collection::vec(arb_item(), 0..6), 0u64..40_000).prop_map(|(items, text)| sample(items, text))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn plans_match_oracle(s in arb_sample(), l_max in prop::sample::select(vec![4096u64, 8192, 32768, 65536, 131072])) {
        common::check_plan(&s, l_max).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn larger_budget_never_hurts(s in arb_sample(), l in 1024u64..65536, extra in 0u64..65536) {
        let a = plan_or_discard(&s, &AdsConfig::new(l));
        let b = plan_or_discard(&s, &AdsConfig::new(l + extra));
        if a.is_planned() {
            prop_assert!(b.is_planned());
            prop_assert!(b.temporal_units() >= a.temporal_units());
            prop_assert!(b.tile_cap >= a.tile_cap);
            prop_assert!(b.total_tokens >= a.total_tokens);
        }
    }

    #[test]
    fn batch_is_deterministic(v in prop::collection::vec(arb_sample(), 0..20)) {
        let cfg = AdsConfig::new(32768);
        let seq = plan_batch(&v, &cfg, Exec::Sequential);
        prop_assert_eq!(&seq, &plan_batch(&v, &cfg, Exec::Parallel));
        prop_assert_eq!(&seq, &plan_batch(&v, &cfg, Exec::Sequential));
    }
}
