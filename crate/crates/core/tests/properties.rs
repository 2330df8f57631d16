use chrono::NaiveDate;
use epinet::community::{brute_force_best, louvain, modularity_of};
use epinet::ingest::{parse_cases_csv, write_cases_csv, CaseSeries, RegionKey};
use epinet::netbuild::{BuildSettings, CorrelationNetwork};
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

fn arb_table() -> impl Strategy<Value = Vec<CaseSeries>> {
    (2usize..30, 1usize..6).prop_flat_map(|(days, regions)| {
        prop::collection::vec(prop::collection::vec(0i64..1_000_000, days), regions).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, values)| {
                    let province = if i % 2 == 0 { None } else { Some(format!("Province, \"{i}\"")) };
                    let key = RegionKey::new(format!("Country {i}"), province.as_deref());
                    CaseSeries::from_start(key, start(), values).unwrap()
                })
                .collect()
        })
    })
}

fn arb_graph() -> impl Strategy<Value = CorrelationNetwork> {
    (3usize..=7)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            let m = pairs.len();
            (Just(n), Just(pairs), prop::collection::vec(prop::option::weighted(0.6, 0.05f64..=1.0), m))
        })
        .prop_filter_map("isolated node", |(n, pairs, weights)| {
            let edges: Vec<(usize, usize, f64)> =
                pairs.iter().zip(&weights).filter_map(|(&(a, b), w)| w.map(|w| (a, b, w))).collect();
            let covered = (0..n).all(|v| edges.iter().any(|e| e.0 == v || e.1 == v));
            if !covered {
                return None;
            }
            let nodes = (0..n).map(|i| RegionKey::new(format!("r{i}"), None)).collect();
            CorrelationNetwork::from_edges(nodes, edges, BuildSettings::default()).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn case_table_round_trips(table in arb_table()) {
        let mut buf = Vec::new();
        write_cases_csv(&table, &mut buf).unwrap();
        let parsed = parse_cases_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed, table);
    }

    #[test]
    fn louvain_ignores_node_order(net in arb_graph(), rot in 0usize..7, seed in 0u64..4) {
        let n = net.node_count();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let shuffled = net.permuted(&order).unwrap();
        let a = louvain(&net, seed, 1.0).unwrap();
        let b = louvain(&shuffled, seed, 1.0).unwrap();
        // same partition; the sum over edges may round differently
        prop_assert!((a.modularity - b.modularity).abs() <= 1e-12);
        for key in net.nodes() {
            let same_a: Vec<bool> = net.nodes().iter().map(|k| a.label_of(k) == a.label_of(key)).collect();
            let same_b: Vec<bool> = net.nodes().iter().map(|k| b.label_of(k) == b.label_of(key)).collect();
            prop_assert_eq!(same_a, same_b);
        }
    }

    #[test]
    fn stored_modularity_is_recomputable(net in arb_graph(), seed in 0u64..4) {
        let p = louvain(&net, seed, 1.0).unwrap();
        prop_assert_eq!(modularity_of(&net, &p.labels).unwrap(), p.modularity);
        let best = brute_force_best(&net).unwrap();
        prop_assert!(p.modularity <= best.modularity + 1e-12);
        // labels are dense and ordered by descending size
        let sizes = p.sizes();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(sizes.iter().sum::<usize>(), net.node_count());
    }
}
