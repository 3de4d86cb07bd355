use std::collections::HashSet;

use cloze::corpus::{
    augment_swap, read_cloze_csv, read_roc_csv, split_dev, write_cloze_csv, write_roc_csv, ClozeInstance, Label,
    RocStory,
};
use proptest::prelude::*;

/// Sentences with the characters that force CSV quoting.
fn sentence() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z ,\"'.\n]{0,24}"
}

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Ending1), Just(Label::Ending2)]
}

fn instances(labeled: bool) -> impl Strategy<Value = Vec<ClozeInstance>> {
    prop::collection::vec(
        (
            prop::array::uniform4(sentence()),
            sentence(),
            sentence(),
            label(),
        ),
        1..12,
    )
    .prop_map(move |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (context, ending1, ending2, gold))| ClozeInstance {
                id: format!("id{i}"),
                context,
                ending1,
                ending2,
                gold: labeled.then_some(gold),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn cloze_csv_round_trips(xs in instances(true), unlabeled in instances(false)) {
        for set in [&xs, &unlabeled] {
            let mut buf = Vec::new();
            write_cloze_csv(set, &mut buf).unwrap();
            prop_assert_eq!(&read_cloze_csv(buf.as_slice()).unwrap(), set);
        }
    }

    #[test]
    fn roc_csv_round_trips(rows in prop::collection::vec((sentence(), prop::array::uniform5(sentence())), 1..10)) {
        let stories: Vec<RocStory> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (title, sentences))| RocStory { id: format!("r{i}"), title, sentences })
            .collect();
        let mut buf = Vec::new();
        write_roc_csv(&stories, &mut buf).unwrap();
        prop_assert_eq!(read_roc_csv(buf.as_slice()).unwrap(), stories);
    }

    #[test]
    fn split_dev_is_a_partition(xs in instances(true), ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let split = split_dev(&xs, ratio, seed);
        prop_assert_eq!(split.dev_train.len(), (ratio * xs.len() as f64).round() as usize);
        let mut ids: Vec<&str> = split.dev_train.iter().chain(&split.dev_dev).map(|x| x.id.as_str()).collect();
        ids.sort_unstable();
        let mut want: Vec<&str> = xs.iter().map(|x| x.id.as_str()).collect();
        want.sort_unstable();
        prop_assert_eq!(ids, want);
        prop_assert_eq!(split_dev(&xs, ratio, seed), split);
    }

    #[test]
    fn augment_swap_keeps_one_copy_per_gold_ending(xs in instances(true)) {
        let out = augment_swap(&xs).unwrap();
        prop_assert_eq!(out.len(), 2 * xs.len());
        for (x, pair) in xs.iter().zip(out.chunks(2)) {
            let gold_text = x.ending(x.gold.unwrap());
            prop_assert_eq!(&pair[0], x);
            prop_assert_eq!(pair[1].ending(pair[1].gold.unwrap()), gold_text);
            prop_assert_eq!(pair[1].endings(), [x.ending2.as_str(), x.ending1.as_str()]);
            prop_assert!(pair[1].id.starts_with(&x.id));
        }
        let ids: HashSet<&str> = out.iter().map(|x| x.id.as_str()).collect();
        prop_assert_eq!(ids.len(), out.len());
    }
}

#[test]
fn augment_swap_rejects_unlabeled_input() {
    let x = ClozeInstance {
        id: "u".into(),
        context: ["a", "b", "c", "d"].map(String::from),
        ending1: "e".into(),
        ending2: "f".into(),
        gold: None,
    };
    assert!(augment_swap(&[x]).is_err());
}

#[test]
fn mixed_labels_are_not_written() {
    let mut xs = vec![
        ClozeInstance {
            id: "a".into(),
            context: ["a", "b", "c", "d"].map(String::from),
            ending1: "e".into(),
            ending2: "f".into(),
            gold: Some(Label::Ending1),
        };
        2
    ];
    xs[1].gold = None;
    assert!(write_cloze_csv(&xs, Vec::new()).is_err());
}
