use proptest::prelude::*;
use template_router::domain::{Query, TemplateId};
use template_router::templates::{token_cap, TemplateRegistry, DEFAULT_TOKEN_CAP, NEUTRAL_SYSTEM_PROMPT};

fn any_template() -> impl Strategy<Value = TemplateId> {
    prop_oneof![
        (0usize..5).prop_map(|i| TemplateId::CANONICAL[i].clone()),
        "[a-z]{3,12}"
            .prop_filter("not a known name", |s| TemplateId::parse_known(s).is_none())
            .prop_map(TemplateId::Unknown),
    ]
}

#[test]
fn caps_increase_in_canonical_order() {
    let caps: Vec<u32> = TemplateId::CANONICAL.iter().map(token_cap).collect();
    assert_eq!(caps, [50, 150, 200, 400, 500]);
}

proptest! {
    #[test]
    fn rendering_preserves_text_and_applies_cap(text in "\\PC*[^\\s]\\PC*", t in any_template()) {
        let reg = TemplateRegistry::default();
        let q = Query::new("q", text.clone()).unwrap();
        let b = reg.render_prompt(&q, &t);
        prop_assert_eq!(b.user_prompt.as_bytes(), text.as_bytes());
        prop_assert_eq!(b.max_tokens, token_cap(&t));
        prop_assert_eq!(&b.template, &t);
        if !t.is_known() {
            prop_assert_eq!(b.max_tokens, DEFAULT_TOKEN_CAP);
            prop_assert_eq!(b.system_prompt.as_str(), NEUTRAL_SYSTEM_PROMPT);
        }
    }
}
