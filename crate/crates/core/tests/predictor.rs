use std::collections::HashSet;

use augdem_core::data::{generate_synthetic, SyntheticPopulationSpec};
use augdem_core::predictor::{
    dual_order_predict, emit_finetune_job_spec, export_finetune_dataset, parse_finetune_export,
    predict_many, AlwaysFirst, InferenceMode, NearestNeighbor, Oracle, PredictionQuery,
    PromptLanguage, PromptTemplate, RecordOrder,
};
use augdem_core::{Demographics, PreferenceDataset, ProposalId};

fn population(n: usize, proposals: usize, pairs: usize, seed: u64) -> PreferenceDataset {
    generate_synthetic(&SyntheticPopulationSpec {
        participant_count: n,
        proposal_count: proposals,
        demographic_effect_strength: 1.0,
        noise_scale: 0.7,
        pairs_per_participant: pairs,
        seed,
    })
    .unwrap()
}

fn same_fields(x: &Demographics, y: &Demographics) -> usize {
    fn eq<T: PartialEq>(a: &Option<T>, b: &Option<T>) -> usize {
        usize::from(matches!((a, b), (Some(p), Some(q)) if p == q))
    }
    eq(&x.age_band, &y.age_band)
        + eq(&x.ideology, &y.ideology)
        + eq(&x.zone, &y.zone)
        + eq(&x.education, &y.education)
        + eq(&x.sex, &y.sex)
        + eq(&x.city, &y.city)
        + eq(&x.state, &y.state)
}

/// Exhaustive scan: every training participant who saw the pair, ranked by
/// shared fields then position, top five vote with all their choices.
fn scan(train: &PreferenceDataset, who: &Demographics, a: ProposalId, b: ProposalId) -> ProposalId {
    let on_pair = |c: &&augdem_core::PairwiseChoice| {
        (c.first == a && c.second == b) || (c.first == b && c.second == a)
    };
    let mut ranked: Vec<(usize, usize)> = train
        .participants()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            train
                .choices()
                .iter()
                .filter(on_pair)
                .any(|c| c.participant == p.id)
        })
        .map(|(i, p)| (same_fields(&p.demographics, who), i))
        .collect();
    ranked.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let chosen: HashSet<_> = ranked
        .iter()
        .take(5)
        .map(|&(_, i)| train.participants()[i].id.clone())
        .collect();
    let mut score = 0i64;
    for c in train
        .choices()
        .iter()
        .filter(on_pair)
        .filter(|c| chosen.contains(&c.participant))
    {
        score += if c.winner() == a { 1 } else { -1 };
    }
    if score != 0 {
        return if score > 0 { a } else { b };
    }
    let rate = |p: ProposalId| {
        let seen = train
            .choices()
            .iter()
            .filter(|c| c.first == p || c.second == p)
            .count();
        let won = train.choices().iter().filter(|c| c.winner() == p).count();
        if seen == 0 {
            0.5
        } else {
            won as f64 / seen as f64
        }
    };
    let (ra, rb) = (rate(a), rate(b));
    if ra > rb {
        a
    } else if rb > ra {
        b
    } else {
        a.min(b)
    }
}

#[test]
fn nearest_neighbor_matches_exhaustive_scan() {
    for seed in 0..4 {
        let train = population(25, 7, 6, seed);
        let probes = population(10, 7, 1, seed + 100);
        let nn = NearestNeighbor::fit(&train);
        for person in probes.participants() {
            for i in 1..=7 {
                for j in 1..=7 {
                    if i != j {
                        let (a, b) = (ProposalId(i), ProposalId(j));
                        assert_eq!(
                            nn.preferred(&person.demographics, a, b),
                            scan(&train, &person.demographics, a, b)
                        );
                    }
                }
            }
        }
    }
}

/// Smallest symmetric [lo, hi] with P(lo ≤ X ≤ hi) ≥ 0.99 for X ~ Bin(n, 1/2).
fn binomial_99(n: u64) -> (u64, u64) {
    let mut pmf = vec![0.5f64.powi(n as i32); n as usize + 1];
    for k in 1..=n as usize {
        pmf[k] = pmf[k - 1] * (n as usize - k + 1) as f64 / k as f64;
    }
    let mut tail = 0.0;
    let mut lo = 0;
    while tail + pmf[lo] <= 0.005 {
        tail += pmf[lo];
        lo += 1;
    }
    (lo as u64, n - lo as u64)
}

#[test]
fn always_first_is_coin_flip_under_dual_order() {
    let d = population(100, 12, 10, 5);
    let queries: Vec<PredictionQuery> = d
        .choices()
        .iter()
        .map(|c| {
            PredictionQuery::new(
                Some(c.participant.clone()),
                d.participant(&c.participant).unwrap().demographics.clone(),
                d.proposal(c.first).unwrap().clone(),
                d.proposal(c.second).unwrap().clone(),
            )
            .unwrap()
        })
        .collect();
    assert_eq!(queries.len(), 1_000);
    let results = predict_many(&AlwaysFirst, &queries, InferenceMode::DualOrder, 77);
    let mut correct = 0;
    for ((q, r), c) in queries.iter().zip(&results).zip(d.choices()) {
        let r = r.as_ref().unwrap();
        assert!(!r.consistent_across_orders && r.tie_broken);
        if r.proposal(q) == c.winner() {
            correct += 1;
        }
    }
    let (lo, hi) = binomial_99(1_000);
    assert_eq!((lo, hi), (459, 541));
    assert!((lo..=hi).contains(&correct), "{correct}");
}

#[test]
fn oracle_is_exact_on_its_dataset() {
    let d = population(40, 10, 8, 2);
    let oracle = Oracle::from_dataset(&d);
    for c in d.choices() {
        let q = PredictionQuery::new(
            Some(c.participant.clone()),
            Demographics::default(),
            d.proposal(c.first).unwrap().clone(),
            d.proposal(c.second).unwrap().clone(),
        )
        .unwrap();
        let r = dual_order_predict(&oracle, &q, 0).unwrap();
        assert!(r.consistent_across_orders);
        assert_eq!(r.chosen, c.chosen);
    }
}

#[test]
fn finetune_export_round_trip() {
    let d = population(15, 6, 4, 8);
    let template = PromptTemplate::default_for(PromptLanguage::BrazilianPortuguese);
    let records = export_finetune_dataset(&d, &template).unwrap();
    assert_eq!(records.len(), 2 * d.choices().len());
    for (pair, c) in records.chunks(2).zip(d.choices()) {
        assert_eq!(pair[0].order, RecordOrder::Original);
        assert_eq!(pair[1].order, RecordOrder::Reversed);
        assert_eq!(pair[1].label, pair[0].label.flipped());
        assert_eq!(pair[0].preferred(), c.winner());
        assert_eq!(pair[1].preferred(), c.winner());
    }
    let files = emit_finetune_job_spec("llama-2-7b", &records, None).unwrap();
    assert_eq!(files.training.lines().count(), records.len());
    let back = parse_finetune_export(&files.training, &files.index).unwrap();
    assert_eq!(back, records);
    let triples: HashSet<_> = back
        .iter()
        .filter(|r| r.order == RecordOrder::Original)
        .map(|r| (r.participant.clone(), r.first, r.second, r.label))
        .collect();
    let expected: HashSet<_> = d
        .choices()
        .iter()
        .map(|c| (c.participant.clone(), c.first, c.second, c.chosen))
        .collect();
    assert_eq!(triples, expected);
    for line in ["r = 64", "alpha = 16", "dropout = 0.1"] {
        assert!(
            files.hyperparameters.lines().any(|l| l == line),
            "{line} missing"
        );
    }
    let gpt = emit_finetune_job_spec("gpt-3.5-turbo", &records, None).unwrap();
    assert!(gpt.hyperparameters.lines().any(|l| l == "epochs = 3"));
}
