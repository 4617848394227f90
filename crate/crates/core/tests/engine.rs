use popvote_core::protocol::assign_randomly;
use popvote_core::rng::rng_from_seed;
use popvote_core::{
    replicate_with, run, Choice, ChoiceSet, ExecMode, Protocol, RunConfig, Series, Simulation, TopologySpec,
};

fn within_sigma(count: u64, trials: u64, p: f64, k: f64) -> bool {
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - trials as f64 * p).abs() <= k * sigma
}

#[test]
fn initiators_are_uniform() {
    let cfg = RunConfig::binary(Protocol::Pairwise, TopologySpec::Grid { side: 5 }, 0.6, 11);
    let mut sim = Simulation::new(&cfg).unwrap();
    let steps = 100_000u64;
    let mut hits = [0u64; 25];
    for _ in 0..steps {
        hits[sim.step().initiator] += 1;
    }
    // 25 cells at 4σ: a false alarm is far below one in a thousand
    for (i, &h) in hits.iter().enumerate() {
        assert!(within_sigma(h, steps, 1.0 / 25.0, 4.0), "agent {i}: {h}");
    }
}

#[test]
fn two_way_assignment_is_fair() {
    let outputs = [ChoiceSet::singleton(Choice::from_index(0)), ChoiceSet::EMPTY];
    let mut rng = rng_from_seed(3);
    let trials = 20_000u64;
    let mut first = 0;
    for _ in 0..trials {
        let a = assign_randomly(&outputs, &[7, 9], &mut rng).unwrap();
        let got = a.iter().find(|(p, _)| *p == 7).unwrap().1;
        first += u64::from(got == outputs[0]);
    }
    assert!(within_sigma(first, trials, 0.5, 4.0), "{first}");
}

#[test]
fn pair_set_reaches_a_given_participant_two_fifths_of_the_time() {
    let both: ChoiceSet = [Choice::from_index(0), Choice::from_index(1)].into_iter().collect();
    let one = ChoiceSet::singleton(Choice::from_index(1));
    let outputs = [both, both, one, ChoiceSet::EMPTY, ChoiceSet::EMPTY];
    let mut rng = rng_from_seed(5);
    let trials = 20_000u64;
    let mut hits = 0;
    for _ in 0..trials {
        let a = assign_randomly(&outputs, &[0, 1, 2, 3, 4], &mut rng).unwrap();
        hits += u64::from(a.iter().any(|&(p, s)| p == 2 && s == both));
    }
    assert!(within_sigma(hits, trials, 0.4, 4.0), "{hits}");
}

#[test]
fn message_ledger_matches_degrees() {
    for protocol in Protocol::ALL {
        let cfg = RunConfig::binary(protocol, TopologySpec::Mesh { side: 5 }, 0.6, 21);
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut expected = 0u64;
        for _ in 0..2_000 {
            let it = sim.step();
            let d = sim.topology().degree(it.initiator) as u64;
            expected += if protocol.is_broadcast() { d + 2 } else { 2 };
            assert_eq!(it.messages, if protocol.is_broadcast() { d + 2 } else { 2 });
        }
        assert_eq!(sim.messages(), expected, "{protocol}");
    }
}

#[test]
fn acc1_and_acc2_share_value_trajectories() {
    let topo = TopologySpec::ErdosRenyi { n: 60, p: None };
    let a = RunConfig::binary(Protocol::Acc1, topo, 0.65, 99);
    let b = RunConfig::binary(Protocol::Acc2, topo, 0.65, 99);
    let (mut sa, mut sb) = (Simulation::new(&a).unwrap(), Simulation::new(&b).unwrap());
    for _ in 0..3_000 {
        let (ia, ib) = (sa.step(), sb.step());
        assert_eq!(ia.initiator, ib.initiator);
        assert!(sa.configuration().values().eq(sb.configuration().values()));
    }
}

#[test]
fn acc2_wrong_memories_drift_down_after_phase_one() {
    let cfg = RunConfig::binary(Protocol::Acc2, TopologySpec::Mesh { side: 10 }, 0.7, 4).with_trajectory();
    let summary = replicate_with(&cfg, 200, ExecMode::default()).unwrap();
    let s = summary.series(Series::Phase2WrongMemories);
    assert!(s.mean.len() >= 2);
    for w in s.mean.windows(2).zip(s.sem.windows(2)) {
        let ((prev, next), (sp, sn)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        assert!(next <= prev + 3.0 * (sp * sp + sn * sn).sqrt(), "{prev} -> {next}");
    }
    assert!(s.mean.last().unwrap() <= &s.mean[0]);
}

#[test]
fn runs_are_reproducible() {
    let cfg =
        RunConfig::binary(Protocol::Bdmv, TopologySpec::ErdosRenyi { n: 80, p: None }, 0.6, 1234).with_trajectory();
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.final_config, b.final_config);
    assert_ne!(run(&cfg.clone().with_seed(1235)).unwrap().metrics, a.metrics);
}

#[test]
fn execution_modes_agree() {
    let cfg = RunConfig::binary(Protocol::Acc1, TopologySpec::Grid { side: 8 }, 0.6, 77);
    let seq = replicate_with(&cfg, 24, ExecMode::Sequential).unwrap();
    let par = replicate_with(&cfg, 24, ExecMode::Parallel).unwrap();
    assert_eq!(seq.runs, par.runs);
    assert_eq!(seq.runtime, par.runtime);
}
