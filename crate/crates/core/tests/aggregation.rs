use augdem_core::{
    rank, tally, win_rates, Choice, Demographics, PairwiseChoice, Participant, ParticipantId,
    PreferenceDataset, Proposal, ProposalId,
};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = PreferenceDataset> {
    (2u32..=10, 1usize..=20).prop_flat_map(|(n_props, n_people)| {
        let choice = (0..n_people, 1..=n_props, 1..n_props, any::<bool>());
        prop::collection::vec(choice, 0..60).prop_map(move |raw| {
            let choices = raw
                .into_iter()
                .map(|(who, a, off, pick)| {
                    // off in 1..n keeps b distinct from a
                    let b = (a - 1 + off) % n_props + 1;
                    PairwiseChoice::new(
                        ParticipantId::new(format!("u{who}")),
                        a,
                        b,
                        if pick { Choice::A } else { Choice::B },
                    )
                })
                .collect();
            PreferenceDataset::new(
                (1..=n_props)
                    .map(|i| Proposal::new(i, format!("proposal {i}"), None))
                    .collect(),
                (0..n_people)
                    .map(|i| Participant {
                        id: ParticipantId::new(format!("u{i}")),
                        demographics: Demographics::default(),
                    })
                    .collect(),
                choices,
            )
            .unwrap()
        })
    })
}

/// Direct recount over the raw choice list.
fn recount(d: &PreferenceDataset, p: ProposalId) -> (u64, u64) {
    let mut wins = 0;
    let mut seen = 0;
    for c in d.choices() {
        if c.first == p || c.second == p {
            seen += 1;
            let winner = match c.chosen {
                Choice::A => c.first,
                Choice::B => c.second,
            };
            if winner == p {
                wins += 1;
            }
        }
    }
    (wins, seen)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn win_rates_match_recount(d in dataset_strategy()) {
        let table = win_rates(&tally(&d));
        prop_assert_eq!(table.len(), d.proposals().len());
        for p in d.proposals() {
            let (wins, seen) = recount(&d, p.id);
            let e = table.get(p.id).unwrap();
            prop_assert_eq!((e.wins, e.appearances), (wins, seen));
            let expected = if seen == 0 { None } else { Some(wins as f64 / seen as f64) };
            prop_assert_eq!(table.win_rate(p.id), expected);
        }
    }

    #[test]
    fn tally_total_is_choice_count(d in dataset_strategy()) {
        prop_assert_eq!(tally(&d).total(), d.choices().len() as u64);
    }

    #[test]
    fn rank_orders_descending(d in dataset_strategy()) {
        let table = win_rates(&tally(&d));
        if let Ok(order) = rank(&table) {
            for w in order.windows(2) {
                let (a, b) = (table.win_rate(w[0]).unwrap(), table.win_rate(w[1]).unwrap());
                prop_assert!(a > b || (a == b && w[0] < w[1]));
            }
        } else {
            prop_assert!(table.undefined().next().is_some());
        }
    }
}
