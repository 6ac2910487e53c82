use super::*;
use crate::model::Activity;
use crate::rng::seeded;
use crate::sim::{run_simulation, SimOptions};

fn fixed(id: usize, parents: &[usize], required: Vec<u32>, d: f64) -> Activity {
    Activity { id, parents: parents.to_vec(), required, t_min: d, t_exp: d, t_max: d }
}

fn labels(seq: &[ActivitySet]) -> Vec<Vec<usize>> {
    seq.iter().map(|l| l.as_slice().to_vec()).collect()
}

fn single(d: f64) -> ProcessModel {
    ProcessModel::new(vec![1], vec![fixed(0, &[], vec![1], d)]).unwrap()
}

#[test]
fn single_activity_sequence() {
    let model = single(3.0);
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let seq = extract_state_sequence(&trace, 1.0);
    assert_eq!(labels(&seq), vec![vec![0], vec![0], vec![0], vec![]]);
}

#[test]
fn chain_sequence() {
    let model = ProcessModel::new(
        vec![],
        vec![fixed(0, &[], vec![], 2.0), fixed(1, &[0], vec![], 1.0)],
    )
    .unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let seq = extract_state_sequence(&trace, 1.0);
    assert_eq!(labels(&seq), vec![vec![0], vec![0], vec![1], vec![]]);
}

#[test]
fn coarser_tick_resamples_the_trace() {
    let model = ProcessModel::new(
        vec![],
        vec![fixed(0, &[], vec![], 2.0), fixed(1, &[0], vec![], 3.0)],
    )
    .unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    // samples at t = 0, 2, 4
    let seq = extract_state_sequence(&trace, 2.0);
    assert_eq!(labels(&seq), vec![vec![0], vec![1], vec![1], vec![]]);
}

#[test]
fn one_trace_transition_frequencies() {
    let model = single(3.0);
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let hmm = build_hmm(&[trace], &model, &ObservationModel::Uniform(0.5), 1.0).unwrap();
    let a0 = hmm.state_of(&ActivitySet::from(vec![0])).unwrap();
    let end = hmm.terminal().unwrap();
    assert!((hmm.transition()[a0][a0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((hmm.transition()[a0][end] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(hmm.transition()[end][end], 1.0);
    assert_eq!(hmm.initial()[a0], 1.0);
    assert!(hmm.is_triangular());
}

#[test]
fn symmetric_two_resource_state() {
    let model = ProcessModel::new(vec![1, 1, 1], vec![fixed(0, &[], vec![0, 1, 1], 2.0)]).unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let hmm = build_hmm(&[trace], &model, &ObservationModel::Uniform(0.5), 1.0).unwrap();
    let s = hmm.state_of(&ActivitySet::from(vec![0])).unwrap();
    for ids in [&[][..], &[1], &[2], &[1, 2]] {
        let sym = ObservationSymbol::from_ids(ids, 3).unwrap();
        assert_eq!(hmm.emission_probability(s, &sym).unwrap(), 0.25);
    }
    let impossible = ObservationSymbol::from_ids(&[0], 3).unwrap();
    assert_eq!(hmm.emission_probability(s, &impossible).unwrap(), 0.0);
}

#[test]
fn meta_vectors_take_max_over_activities() {
    let model = ProcessModel::new(
        vec![5, 5, 5],
        vec![
            fixed(0, &[], vec![1, 0, 2], 1.0),
            fixed(1, &[], vec![3, 0, 0], 1.0),
            fixed(2, &[], vec![0, 0, 0], 1.0),
        ],
    )
    .unwrap();
    let label = ActivitySet::from(vec![0, 1, 2]);
    assert_eq!(required_indicator(&model, &label), vec![true, false, true]);
    let obs = ObservationModel::PerActivity(vec![0.3, 0.8, 0.9]);
    let probs = observation_probabilities(&model, &label, &obs);
    assert_eq!(probs, vec![0.8, 0.0, 0.3]);
    assert_eq!(nonzero_probabilities(&probs), vec![(0, 0.8), (2, 0.3)]);
}

#[test]
fn three_resource_product_form() {
    let e = [0.2, 0.5, 0.7];
    let all = ObservationSymbol::from_ids(&[0, 1, 2], 3).unwrap();
    assert!((all.probability(&e) - 0.2 * 0.5 * 0.7).abs() < 1e-15);
    let none = ObservationSymbol::none(3);
    assert!((none.probability(&e) - 0.8 * 0.5 * 0.3).abs() < 1e-15);
    let two = ObservationSymbol::from_ids(&[0, 1], 3).unwrap();
    assert!((two.probability(&e) - 0.2 * 0.5 * 0.3).abs() < 1e-15);
}

#[test]
fn sampling_extremes() {
    let model = ProcessModel::new(vec![1, 1], vec![fixed(0, &[], vec![1, 1], 2.0)]).unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let sure = build_hmm(&[trace], &model, &ObservationModel::Uniform(1.0), 1.0).unwrap();
    let s = sure.state_of(&ActivitySet::from(vec![0])).unwrap();
    let mut rng = seeded(3);
    for _ in 0..100 {
        assert_eq!(sure.sample_observation(s, &mut rng).ids(), vec![0, 1]);
        assert!(sure.sample_observation(sure.terminal().unwrap(), &mut rng).ids().is_empty());
    }
}

#[test]
fn sampled_frequencies_match_emission_probabilities() {
    let model = ProcessModel::new(vec![1, 1], vec![fixed(0, &[], vec![1, 1], 2.0)]).unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let hmm = build_hmm(&[trace], &model, &ObservationModel::Uniform(0.5), 1.0).unwrap();
    let s = hmm.state_of(&ActivitySet::from(vec![0])).unwrap();
    let draws = 100_000;
    let mut counts = [0usize; 4];
    let mut rng = seeded(17);
    for _ in 0..draws {
        let sym = hmm.sample_observation(s, &mut rng);
        counts[sym.present[0] as usize + 2 * sym.present[1] as usize] += 1;
    }
    for (code, &c) in counts.iter().enumerate() {
        let sym = ObservationSymbol { present: vec![code & 1 == 1, code & 2 == 2] };
        let p = hmm.emission_probability(s, &sym).unwrap();
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "symbol {code}: {c}");
    }
}

#[test]
fn single_state_certain_emission_has_log_prob_zero() {
    let hmm = Hmm::from_parts(
        vec![HiddenState { index: 0, label: ActivitySet::from(vec![0]) }],
        vec![1.0],
        vec![vec![1.0]],
        vec![vec![1.0]],
        1,
    )
    .unwrap();
    let sym = ObservationSymbol::from_ids(&[0], 1).unwrap();
    let obs = ObservationSequence::new(1, vec![sym.clone(), sym]).unwrap();
    assert_eq!(forward(&hmm, &obs).unwrap(), 0.0);
    let path = viterbi(&hmm, &obs).unwrap();
    assert_eq!(path.states, vec![0, 0]);
    assert_eq!(path.log_prob, 0.0);
}

#[test]
fn impossible_observation() {
    let model = ProcessModel::new(vec![1, 1], vec![fixed(0, &[], vec![1, 0], 3.0)]).unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let hmm = build_hmm(&[trace], &model, &ObservationModel::Uniform(0.5), 1.0).unwrap();
    // no state ever uses resource 1
    let obs = ObservationSequence::new(
        2,
        vec![
            ObservationSymbol::from_ids(&[0], 2).unwrap(),
            ObservationSymbol::from_ids(&[1], 2).unwrap(),
            ObservationSymbol::none(2),
        ],
    )
    .unwrap();
    assert_eq!(forward(&hmm, &obs).unwrap(), f64::NEG_INFINITY);
    match viterbi(&hmm, &obs) {
        Err(Error::NoViablePath { position }) => assert_eq!(position, 1),
        other => panic!("expected no viable path, got {other:?}"),
    }
}

#[test]
fn deterministic_chain_decodes_exactly() {
    let model = ProcessModel::new(
        vec![1, 1, 1],
        vec![
            fixed(0, &[], vec![1, 0, 0], 2.0),
            fixed(1, &[0], vec![0, 1, 0], 2.0),
            fixed(2, &[1], vec![0, 0, 1], 2.0),
        ],
    )
    .unwrap();
    let trace = run_simulation(&model, 0, &SimOptions::default()).unwrap();
    let hmm = build_hmm(&[trace], &model, &ObservationModel::Uniform(1.0), 1.0).unwrap();
    let ids: [&[usize]; 5] = [&[0], &[0], &[1], &[1], &[2]];
    let symbols = ids.iter().map(|i| ObservationSymbol::from_ids(i, 3).unwrap()).collect();
    let obs = ObservationSequence::new(3, symbols).unwrap();
    let path = viterbi(&hmm, &obs).unwrap();
    let decoded: Vec<_> = path.states.iter().map(|&s| hmm.label(s).as_slice().to_vec()).collect();
    assert_eq!(decoded, vec![vec![0], vec![0], vec![1], vec![1], vec![2]]);
    assert!(path.log_prob <= forward(&hmm, &obs).unwrap());
}

#[test]
fn counts_merge_like_a_single_pass() {
    let model = crate::model::generate_model(&Default::default()).unwrap();
    let opts = SimOptions::default();
    let traces: Vec<_> = (0..30).map(|s| run_simulation(&model, s, &opts).unwrap()).collect();
    let mut whole = TransitionCounts::default();
    traces.iter().for_each(|t| whole.ingest(t, 1.0));
    let mut left = TransitionCounts::default();
    let mut right = TransitionCounts::default();
    traces[..11].iter().for_each(|t| left.ingest(t, 1.0));
    traces[11..].iter().for_each(|t| right.ingest(t, 1.0));
    right.merge(left);
    assert_eq!(right, whole);
}

#[test]
fn hmm_json_round_trip() {
    let model = crate::model::generate_model(&Default::default()).unwrap();
    let opts = SimOptions::default();
    let traces: Vec<_> = (0..20).map(|s| run_simulation(&model, s, &opts).unwrap()).collect();
    let hmm = build_hmm(&traces, &model, &ObservationModel::default(), 1.0).unwrap();
    let json = serde_json::to_value(&hmm).unwrap();
    let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["emission", "initial", "states", "transition"]);
    assert!(json["states"][0].get("index").is_some() && json["states"][0].get("label").is_some());
    let back: Hmm = serde_json::from_value(json).unwrap();
    assert_eq!(back, hmm);
}

#[test]
fn from_parts_rejects_malformed_matrices() {
    let st = |k: usize| HiddenState { index: k, label: ActivitySet::from(vec![k]) };
    let bad_row = Hmm::from_parts(
        vec![st(0), st(1)],
        vec![1.0, 0.0],
        vec![vec![0.5, 0.4], vec![0.0, 1.0]],
        vec![vec![0.5], vec![0.5]],
        1,
    );
    assert!(bad_row.is_err());
    let terminal_emits = Hmm::from_parts(
        vec![HiddenState { index: 0, label: ActivitySet::empty() }],
        vec![1.0],
        vec![vec![1.0]],
        vec![vec![0.5]],
        1,
    );
    assert!(terminal_emits.is_err());
}
