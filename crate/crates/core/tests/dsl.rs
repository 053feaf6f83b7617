mod common;

use proptest::prelude::*;
use tpc_core::dsl::{execute, parse, unparse, ErrorKind, Limits};

pub fn corpus() -> Vec<String> {
    let text = std::fs::read_to_string(common::fixture("dsl_corpus.txt")).unwrap();
    text.split("#---\n").map(str::to_string).collect()
}

#[test]
fn corpus_reaches_fixpoint_and_runs() {
    let ctx = common::living_room("situation_a.json");
    let programs = corpus();
    assert_eq!(programs.len(), 20);
    for src in programs {
        let ast = parse(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
        let printed = unparse(&ast);
        let again = parse(&printed).unwrap();
        assert_eq!(again, ast, "{printed}");
        assert_eq!(unparse(&again), printed);
        let a = execute(&ast, &ctx, &Limits::default());
        assert!(a.ok(), "{:?}\n{src}", a.error);
        assert_eq!(execute(&again, &ctx, &Limits::default()), a);
    }
}

#[test]
fn listing_program_output() {
    let ctx = common::living_room("situation_a.json");
    let out = execute(&parse(&corpus()[1]).unwrap(), &ctx, &Limits::default());
    assert_eq!(out.stdout, "Objects directly behind me: ['coffee table', 'couch', 'pillow']\n");
    assert_eq!(out.api_calls, 2);
}

#[test]
fn unbounded_loops_stop() {
    let ctx = common::living_room("situation_a.json");
    let limits = Limits { max_steps: 5000, ..Limits::default() };
    for src in [
        "for i in range(10 ** 12):\n    x = i\n",
        "xs = [1]\nfor i in range(40):\n    xs = xs + xs\n",
        "for a in range(100000):\n    for b in range(100000):\n        pass_ = b\n",
    ] {
        let out = execute(&parse(src).unwrap(), &ctx, &limits);
        let err = out.error.expect("must stop");
        assert_eq!(err.kind, ErrorKind::StepLimitExceeded, "{src}");
        assert_eq!(out.steps, limits.max_steps);
    }
}

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..1000).prop_map(|n| n.to_string()),
        (0u32..100, 1u32..100).prop_map(|(a, b)| format!("{a}.{b}")),
        "[a-z]{1,3}".prop_map(|s| format!("\"{s}\"")),
        prop::sample::select(vec!["x", "y", "True", "False", "None"]).prop_map(str::to_string),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    atom().prop_recursive(4, 32, 3, |inner| {
        let ops = prop::sample::select(vec!["+", "-", "*", "/", "%", "//", "**", "<", "==", "and", "or", "|", "&"]);
        prop_oneof![
            (inner.clone(), ops, inner.clone()).prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|a| format!("({a})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("not {a}")),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| format!("[{}]", v.join(", "))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}[{b}]")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("max({a}, {b})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn generated_expressions_roundtrip(e in expr(), f in expr()) {
        let src = format!("x = {e}\nif {f}:\n    y = [{e}, {f}]\nprint(x)\n");
        if let Ok(ast) = parse(&src) {
            let printed = unparse(&ast);
            let again = parse(&printed).unwrap_or_else(|err| panic!("{err}\n{printed}"));
            prop_assert_eq!(&again, &ast);
            prop_assert_eq!(unparse(&again), printed);
        }
    }
}
