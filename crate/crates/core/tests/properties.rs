use num_rational::Ratio;
use proptest::prelude::*;

use tracecorpus::codec::{decode_trace, encode_trace};
use tracecorpus::downstream::{edit_similarity, mean_average_precision, pass_at_k, Candidate, SearchInstance};
use tracecorpus::metrics::{identifier_scores, line_scores};
use tracecorpus::trace::{StateMap, Trace, TraceLine};

type Q = Ratio<i64>;

fn text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[ab\n]{0,8}").unwrap()
}

fn trace() -> impl Strategy<Value = Trace> {
    let line = (1u32..4, proptest::collection::btree_map("[a-c]", "[0-2]", 0..3))
        .prop_map(|(n, m)| TraceLine { line_no: n, state: m.into_iter().collect::<StateMap>() });
    proptest::collection::vec(line, 0..6).prop_map(Trace::new)
}

fn instance(id: usize) -> impl Strategy<Value = SearchInstance> {
    (text(), proptest::collection::vec((text(), 0..3u8), 1..5)).prop_map(move |(q, cands)| SearchInstance {
        query_id: format!("q{id}"),
        query_output: q,
        query_problem_id: "p0".into(),
        candidates: cands
            .into_iter()
            .enumerate()
            .map(|(i, (o, p))| Candidate { id: format!("c{i}"), output: o, problem_id: format!("p{p}") })
            .collect(),
    })
}

proptest! {
    #[test]
    fn similarity_is_symmetric_and_bounded(a in text(), b in text()) {
        let ab = edit_similarity::<Q>(&a, &b);
        prop_assert_eq!(ab, edit_similarity::<Q>(&b, &a));
        prop_assert!(ab >= Q::from_integer(0) && ab <= Q::from_integer(1));
        let same = a.strip_suffix('\n').unwrap_or(&a) == b.strip_suffix('\n').unwrap_or(&b);
        prop_assert_eq!(ab == Q::from_integer(1), same);
    }

    #[test]
    fn map_ignores_query_order(a in instance(0), b in instance(1), c in instance(2)) {
        let fwd = mean_average_precision::<Q>(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = mean_average_precision::<Q>(&[c, a, b]).unwrap();
        prop_assert_eq!(fwd, rev);
    }

    #[test]
    fn pass_at_k_is_monotone(n in 1u64..30, c in 0u64..30, k in 1u64..30) {
        prop_assume!(c <= n && k <= n);
        let v = pass_at_k::<Q>(n, c, k).unwrap();
        prop_assert!(v >= Q::from_integer(0) && v <= Q::from_integer(1));
        if k < n {
            prop_assert!(pass_at_k::<Q>(n, c, k + 1).unwrap() >= v);
        }
        if c < n {
            prop_assert!(pass_at_k::<Q>(n, c + 1, k).unwrap() >= v);
        }
    }

    #[test]
    fn precision_and_recall_are_dual(p in trace(), g in trace()) {
        let pg = line_scores::<Q>(&p, &g);
        let gp = line_scores::<Q>(&g, &p);
        prop_assert_eq!(pg.precision, gp.recall);
        prop_assert_eq!(pg.f1, gp.f1);
        let ipg = identifier_scores::<Q>(&p, &g);
        let igp = identifier_scores::<Q>(&g, &p);
        prop_assert_eq!(ipg.precision, igp.recall);
    }

    #[test]
    fn self_scores_are_perfect(t in trace()) {
        let s = line_scores::<Q>(&t, &t);
        prop_assert_eq!(s.f1, Q::from_integer(1));
    }

    #[test]
    fn codec_round_trips(t in trace()) {
        prop_assume!(!t.is_empty());
        let d = decode_trace(&encode_trace(&t).unwrap());
        prop_assert!(!d.malformed);
        prop_assert_eq!(d.trace, t);
    }

    #[test]
    fn decoding_never_panics(s in "(\\[LINE\\]|\\[STATE\\]|\\[STATEEND\\]|\\[DICTSEP\\]|\\[1\\]|x|:|'| ){0,30}") {
        let _ = decode_trace(&s);
    }
}
