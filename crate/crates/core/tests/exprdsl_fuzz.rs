use gcalc_core::exprdsl::{eval, parse, BinOp, Expr, Func, Node, ParseErrorKind};
use proptest::prelude::*;

fn node(expr: Expr) -> Node {
    Node::new(expr, 0)
}

fn arb_tree() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, e)| node(Expr::Const(m as f64 / 10f64.powi(e as i32)))),
        Just(node(Expr::T)),
        Just(node(Expr::X)),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        prop_oneof![
            inner.clone().prop_map(|a| node(Expr::Neg(Box::new(a)))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| node(Expr::Binary(o, Box::new(l), Box::new(r)))),
            (0..Func::ALL.len(), inner).prop_map(|(f, a)| node(Expr::Call(Func::ALL[f], Box::new(a)))),
        ]
    })
}

/// Sprinkles spaces and swaps ASCII minus for U+2212 without changing meaning.
fn restyle(src: &str, spaces: &[bool], unicode_minus: bool) -> String {
    let mut out = String::new();
    for (i, c) in src.chars().enumerate() {
        if c == '-' && unicode_minus {
            out.push('−');
        } else {
            out.push(c);
        }
        if spaces.get(i % spaces.len().max(1)).copied().unwrap_or(false) && c != '.' && !c.is_ascii_alphanumeric() {
            out.push(' ');
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn rendered_trees_round_trip(tree in arb_tree(), spaces in prop::collection::vec(any::<bool>(), 1..8), uni in any::<bool>()) {
        let src = restyle(&tree.to_string(), &spaces, uni);
        let parsed = parse(&src).map_err(|e| TestCaseError::fail(format!("{src}: {e}")))?;
        prop_assert_eq!(&parsed, &tree);
        let again = parse(&parsed.to_string()).unwrap();
        prop_assert_eq!(&again, &parsed);
        // Deterministic evaluation (errors included).
        let a = eval(&parsed, 0.3, -1.7).map(f64::to_bits);
        let b = eval(&parsed, 0.3, -1.7).map(f64::to_bits);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn arbitrary_text_never_panics(src in "\\PC{0,40}") {
        if let Err(e) = parse(&src) {
            prop_assert!(e.offset <= src.len());
        }
    }

    #[test]
    fn grammar_alphabet_never_panics(src in "[0-9tx+*/^()., a-z−-]{0,40}") {
        match parse(&src) {
            Ok(ast) => prop_assert_eq!(parse(&ast.to_string()).unwrap(), ast),
            Err(e) => prop_assert!(e.offset <= src.len()),
        }
    }

    #[test]
    fn mutations_are_reported_with_offsets(tree in arb_tree(), cut in any::<prop::sample::Index>(), which in 0usize..3) {
        let src = tree.to_string();
        let bad = match which {
            // An unmatched opening parenthesis can never be balanced.
            0 => format!("({src}"),
            // Neither can a stray closing one.
            1 => format!("{src})"),
            // `q` is never an identifier.
            _ => {
                let at = cut.index(src.len() + 1);
                let at = (0..=at).rev().find(|i| src.is_char_boundary(*i)).unwrap();
                format!("{}q{}", &src[..at], &src[at..])
            }
        };
        let err = parse(&bad).expect_err(&bad);
        prop_assert!(err.offset <= bad.len(), "{bad}: {err}");
        if which == 0 {
            prop_assert_eq!(err.kind, ParseErrorKind::UnbalancedParenthesis);
        }
    }
}

#[test]
fn precedence_goldens() {
    let cases = [
        ("2+3*4", 14.0),
        ("2*3^2", 18.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("2^-1", 0.5),
        ("8/4/2", 1.0),
        ("1-2-3", -4.0),
        ("−x^2 + 2*x", 0.0),
        ("exp(0) + sqrt(4) * abs(-3)", 7.0),
    ];
    for (src, want) in cases {
        assert_eq!(eval(&parse(src).unwrap(), 0.0, 2.0).unwrap(), want, "{src}");
    }
}

#[test]
fn error_offset_goldens() {
    let cases = [
        ("x*(1−x", ParseErrorKind::UnbalancedParenthesis, 8),
        ("x*(1-x", ParseErrorKind::UnbalancedParenthesis, 6),
        ("foo(x)", ParseErrorKind::UnknownIdentifier("foo".into()), 0),
        ("x + y", ParseErrorKind::UnknownIdentifier("y".into()), 4),
        ("x x", ParseErrorKind::TrailingTokens, 2),
        ("(x))", ParseErrorKind::UnbalancedParenthesis, 3),
    ];
    for (src, kind, offset) in cases {
        let err = parse(src).unwrap_err();
        assert_eq!((err.kind, err.offset), (kind, offset), "{src}");
    }
}
