use std::collections::BTreeMap;
use std::io::Write;

use cathist::ingest::{
    read_histogram, read_histogram_file, read_noisy_histogram_file, write_histogram, write_noisy_histogram,
    ColumnRef, ColumnSelector, HistogramFormat, Source,
};
use cathist::{Category, Histogram, NoisyBin, NoisyHistogram, Origin, ReleaseMeta};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[a-zA-Z0-9 ,\"'\u{e9}\u{4e2d}\u{1f600}-]{1,12}",
        Just("?".to_string()),
        Just("a,b".to_string()),
        Just("quote\"inside".to_string()),
    ]
    .prop_filter("trimmed non-empty", |s| !s.trim().is_empty() && s.trim() == s)
}

fn histogram() -> impl Strategy<Value = Histogram> {
    prop::collection::btree_map(label(), prop_oneof![0.0f64..1e6, (0u32..1000).prop_map(f64::from)], 0..20)
        .prop_map(|m| Histogram::from_counts(m).unwrap())
}

fn noisy_histogram() -> impl Strategy<Value = NoisyHistogram> {
    (prop::collection::btree_map(label(), (1e-9f64..1e7, any::<bool>()), 0..20), any::<u64>()).prop_map(|(m, seed)| {
        let bins = m
            .into_iter()
            .map(|(l, (count, inj))| NoisyBin {
                category: Category::new(l).unwrap(),
                count,
                origin: if inj { Origin::Injected } else { Origin::Active },
            })
            .collect();
        NoisyHistogram::new(bins)
            .unwrap()
            .with_meta(ReleaseMeta { epsilon: 0.1, rho: 0.9, n: 171_000, tau: 1.0 / 3.0, seed, removed: 2 })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plain_round_trip(h in histogram()) {
        let dir = tempfile::tempdir().unwrap();
        for name in ["h.csv", "h.json"] {
            let path = dir.path().join(name);
            write_histogram(&h, &path, HistogramFormat::from_path(&path)).unwrap();
            prop_assert_eq!(&read_histogram_file(&path).unwrap(), &h);
        }
    }

    #[test]
    fn noisy_round_trip(nh in noisy_histogram()) {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("n.json");
        write_noisy_histogram(&nh, &json, HistogramFormat::Json).unwrap();
        prop_assert_eq!(&read_noisy_histogram_file(&json).unwrap(), &nh);

        // CSV carries bins and origins, not the release metadata
        let csv = dir.path().join("n.csv");
        write_noisy_histogram(&nh, &csv, HistogramFormat::Csv).unwrap();
        let back = read_noisy_histogram_file(&csv).unwrap();
        prop_assert_eq!(back.bins(), nh.bins());
        prop_assert!(back.meta().is_none());
    }
}

#[test]
fn writes_are_byte_reproducible() {
    let h = Histogram::from_counts([("x", 0.1 + 0.2), ("y", 1e-300), ("z", 12345.678)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    write_histogram(&h, &a, HistogramFormat::Json).unwrap();
    write_histogram(&h, &b, HistogramFormat::Json).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_histogram_file(&a).unwrap().count_of("x"), Some(0.1 + 0.2));
}

#[test]
fn column_counts_match_reference_counter() {
    let mut rng = cathist::numerics::seeded_rng(77);
    let pool = ["Male", "Female", "?", "Self-emp-not-inc", "a,b", "naïve", "中文", "x y"];
    for trial in 0..10 {
        let rows = rng.gen_range(0..500);
        let cells: Vec<String> = (0..rows)
            .map(|_| {
                let v = pool.choose(&mut rng).unwrap();
                let pad = if rng.gen_bool(0.3) { " " } else { "" };
                if rng.gen_bool(0.05) {
                    String::new()
                } else {
                    format!("{pad}{v}")
                }
            })
            .collect();

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "id,value,other").unwrap();
        for (i, c) in cells.iter().enumerate() {
            let quoted = if c.contains(',') { format!("\"{c}\"") } else { c.clone() };
            writeln!(file, "{i},{quoted},{}", trial).unwrap();
        }
        file.flush().unwrap();

        // first pass collects distinct values, second counts each
        let trimmed: Vec<&str> = cells.iter().map(|c| c.trim()).filter(|c| !c.is_empty()).collect();
        let distinct: Vec<&str> = trimmed.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let reference: BTreeMap<&str, f64> =
            distinct.iter().map(|d| (*d, trimmed.iter().filter(|t| *t == d).count() as f64)).collect();

        let sel = ColumnSelector::new(Source::Path(file.path().into()), ColumnRef::Name("value".into()));
        let got = read_histogram(&sel).unwrap();
        let got_map: BTreeMap<&str, f64> = got.histogram.bins().iter().map(|(c, n)| (c.as_str(), *n)).collect();
        assert_eq!(got_map, reference, "trial {trial}");
        assert_eq!(got.skipped_empty, cells.iter().filter(|c| c.trim().is_empty()).count());
    }
}

#[test]
fn adult_sex_column_has_two_categories() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/adult.csv");
    let sel = ColumnSelector::new(Source::Path(path), ColumnRef::Name("sex".into()));
    let got = read_histogram(&sel).unwrap();
    assert_eq!(got.histogram.len(), 2);
    assert_eq!(got.histogram.count_of("Male"), Some(21_790.0));
    assert_eq!(got.histogram.count_of("Female"), Some(10_771.0));
}
