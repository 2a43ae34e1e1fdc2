use peerfed::table::{round4, ParticipantRow};
use peerfed::{Format, ResultsTable};
use peerfed_core::StrategyId;
use proptest::prelude::*;

fn table() -> impl Strategy<Value = ResultsTable> {
    (1usize..=6, 2usize..=8).prop_flat_map(|(k, n)| {
        let row = (0.0..1.0f64, 0.0..1.0f64, 0.0..=1.0f64, prop::collection::vec(0.0..=1.0f64, k));
        (Just(k), prop::collection::vec(row, n)).prop_map(|(k, rows)| ResultsTable {
            strategies: StrategyId::ALL[..k].to_vec(),
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, (size, positive_rate, local, federated))| ParticipantRow {
                    part: i as u32 + 1,
                    size,
                    positive_rate,
                    local,
                    federated,
                })
                .collect(),
        })
    })
}

proptest! {
    #[test]
    fn emitted_tables_parse_back(t in table()) {
        for format in [Format::Plain, Format::Csv, Format::Markdown] {
            let text = t.emit(format);
            prop_assert_eq!(&t.emit(format), &text);
            let parsed = ResultsTable::parse(&text, format).unwrap();
            prop_assert_eq!(&parsed.table.strategies, &t.strategies);
            prop_assert_eq!(parsed.table.rows.len(), t.rows.len());
            for (a, b) in parsed.table.rows.iter().zip(&t.rows) {
                prop_assert_eq!(a.part, b.part);
                prop_assert_eq!(a.local, round4(b.local));
                let fed: Vec<f64> = b.federated.iter().map(|v| round4(*v)).collect();
                prop_assert_eq!(&a.federated, &fed);
            }
            let avg = t.avg();
            prop_assert_eq!(parsed.avg.local, round4(avg.local));
            let fed: Vec<f64> = avg.federated.iter().map(|v| round4(*v)).collect();
            prop_assert_eq!(&parsed.avg.federated, &fed);
        }
    }

    #[test]
    fn avg_row_is_the_column_mean(t in table()) {
        let avg = t.avg();
        let n = t.rows.len() as f64;
        prop_assert!((avg.local - t.rows.iter().map(|r| r.local).sum::<f64>() / n).abs() < 1e-12);
        for (j, v) in avg.federated.iter().enumerate() {
            let m = t.rows.iter().map(|r| r.federated[j]).sum::<f64>() / n;
            prop_assert!((v - m).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(v));
        }
    }
}
