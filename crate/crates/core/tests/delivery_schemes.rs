use mlsort::delivery::{deliver, deliver_simple, deliver_simple_permuted, DeliveryConfig, PieceMatrix};
use mlsort::element::tag_input;
use mlsort::{CostParams, DeliveryScheme, Network, PeGroup, SeedSpec};

/// p = 16, r = 4: twelve PEs send one element to group 0 and four send
/// eight; every other piece has two elements.
fn adversarial() -> PieceMatrix {
    let sizes: Vec<Vec<usize>> = (0..16)
        .map(|i| {
            let first = if i < 12 { 1 } else { 8 };
            vec![first, 2, 2, 2]
        })
        .collect();
    let keys: Vec<Vec<u64>> = sizes
        .iter()
        .map(|row| (0..row.iter().sum::<usize>() as u64).collect())
        .collect();
    tag_input(&keys)
        .into_iter()
        .zip(&sizes)
        .map(|(elems, row)| {
            let mut it = elems.into_iter();
            row.iter().map(|&len| it.by_ref().take(len).collect()).collect()
        })
        .collect()
}

fn max_recv(net: &Network) -> u64 {
    net.ledger().level(net.level()).unwrap().data.max_recv_msgs()
}

#[test]
fn simple_delivery_can_flood_a_receiver() {
    let mut net = Network::new(16, CostParams::default());
    deliver_simple(&mut net, &PeGroup::all(16), adversarial()).unwrap();
    let recv = max_recv(&net);
    assert!(recv > 2 * 4, "{recv}");
    // PEs 0..=10 fill the first receiver, its own piece is not a message
    assert_eq!(recv, 10);
}

#[test]
fn permuted_numbering_beats_simple_on_the_adversarial_case() {
    let mut simple = Network::new(16, CostParams::default());
    deliver_simple(&mut simple, &PeGroup::all(16), adversarial()).unwrap();
    let baseline = max_recv(&simple);
    let better = (0..100u64)
        .filter(|&seed| {
            let mut net = Network::new(16, CostParams::default());
            deliver_simple_permuted(&mut net, &PeGroup::all(16), adversarial(), &SeedSpec::new(seed, "adv")).unwrap();
            max_recv(&net) < baseline
        })
        .count();
    assert!(better >= 95, "{better}");
}

#[test]
fn permuted_plan_is_reproducible() {
    let run = || {
        let mut net = Network::new(16, CostParams::default());
        deliver_simple_permuted(&mut net, &PeGroup::all(16), adversarial(), &SeedSpec::new(5, "adv"))
            .unwrap()
            .plan
    };
    assert_eq!(run(), run());
}

#[test]
fn equal_sizes_balance_identically() {
    let keys: Vec<Vec<u64>> = (0..8).map(|i| vec![i; 5]).collect();
    let pieces: PieceMatrix = tag_input(&keys).into_iter().map(|v| vec![v]).collect();
    let g = PeGroup::all(8);
    let mut net = Network::new(8, CostParams::default());
    let a = deliver_simple(&mut net, &g, pieces.clone()).unwrap();
    let b = deliver_simple_permuted(&mut net, &g, pieces, &SeedSpec::new(1, "eq")).unwrap();
    assert_eq!(a.plan.received_counts(&g), b.plan.received_counts(&g));
}

#[test]
fn every_scheme_handles_empty_groups() {
    let keys: Vec<Vec<u64>> = (0..4).map(|i| vec![i, i + 10]).collect();
    // everything goes to group 1, group 0 is empty
    let pieces: PieceMatrix = tag_input(&keys).into_iter().map(|v| vec![Vec::new(), v]).collect();
    for scheme in DeliveryScheme::ALL {
        let mut net = Network::new(4, CostParams::default());
        let mut config = DeliveryConfig::new(scheme, SeedSpec::new(2, "empty"));
        config.strict_piece_bound = false;
        let d = deliver(&mut net, &PeGroup::all(4), pieces.clone(), &config).unwrap();
        assert_eq!(d.plan.received_counts(&PeGroup::all(4)), vec![0, 0, 4, 4], "{scheme}");
    }
}
