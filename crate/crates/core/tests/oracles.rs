mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zdtoric::bp::{initial_messages, message_update, BpStats, MessageSet};
use zdtoric::cell::{CellBasis, DefectTriple, BOUNDARY_QUDITS};
use zdtoric::exact::{exact_class_probabilities_bounded, EnumerationBound};
use zdtoric::marginal::{cell_marginal, CellNoise};
use zdtoric::{DecoderConfig, NoiseModel, RgDecoder, Syndrome, TorusLattice, XOperator, Zd};

fn random_cell(rng: &mut ChaCha8Rng, m: Zd) -> (CellNoise, DefectTriple) {
    let d = m.as_usize();
    let dists: Vec<_> = (0..10).map(|_| random_dist(rng, d)).collect();
    let a = DefectTriple::new(
        rng.random_range(0..d as u8),
        rng.random_range(0..d as u8),
        rng.random_range(0..d as u8),
    );
    (CellNoise::new(m, &dists).unwrap(), a)
}

fn random_messages(rng: &mut ChaCha8Rng, d: usize) -> MessageSet {
    MessageSet::new(std::array::from_fn(|_| random_dist(rng, d)))
}

#[test]
fn cell_marginal_with_messages_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [2u32, 3] {
        let m = Zd::new(d).unwrap();
        let du = d as usize;
        let basis = CellBasis::new(m).unwrap();
        let all: Vec<_> = all_cell_vectors(du).collect();
        for _ in 0..5 {
            let (noise, a) = random_cell(&mut rng, m);
            let msgs = random_messages(&mut rng, du);
            let mut acc = vec![0.0; du * du];
            for x in all.iter().filter(|x| cell_defect(du, x) == a.a) {
                let mut w = noise.probability(x);
                for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
                    w *= msgs.slot(slot).probs()[x[q] as usize];
                }
                let l = basis.coordinates(x).l;
                acc[l[0] as usize * du + l[1] as usize] += w;
            }
            let total: f64 = acc.iter().sum();
            acc.iter_mut().for_each(|v| *v /= total);
            let fast = cell_marginal(&basis, a, &noise, Some(&msgs)).unwrap();
            assert!(max_abs_diff(fast.joint(), &acc) < 1e-12, "d = {d}");
        }
    }
}

#[test]
fn uniform_messages_change_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in 2..=6 {
        let m = Zd::new(d).unwrap();
        let basis = CellBasis::new(m).unwrap();
        let (noise, a) = random_cell(&mut rng, m);
        let plain = cell_marginal(&basis, a, &noise, None).unwrap();
        let uniform = cell_marginal(&basis, a, &noise, Some(&MessageSet::uniform(m))).unwrap();
        assert!(max_abs_diff(plain.joint(), uniform.joint()) < 1e-14);
    }
}

#[test]
fn bp_messages_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in [2u32, 3] {
        let m = Zd::new(d).unwrap();
        let du = d as usize;
        let basis = CellBasis::new(m).unwrap();
        let all: Vec<_> = all_cell_vectors(du).collect();
        for _ in 0..3 {
            let (noise, a) = random_cell(&mut rng, m);
            let incoming = random_messages(&mut rng, du);
            let coset: Vec<_> = all.iter().filter(|x| cell_defect(du, x) == a.a).collect();

            let init = initial_messages(&basis, a, &noise).unwrap();
            let mut stats = BpStats::default();
            let updated = message_update(&basis, a, &noise, &incoming, &mut stats).unwrap();
            for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
                let mut first = vec![0.0; du];
                let mut next = vec![0.0; du];
                for x in &coset {
                    let p = noise.probability(x);
                    first[x[q] as usize] += p;
                    let mut w = p / noise.qudit(q)[x[q] as usize];
                    for (s2, &q2) in BOUNDARY_QUDITS.iter().enumerate() {
                        if q2 != q {
                            w *= incoming.slot(s2).probs()[x[q2] as usize];
                        }
                    }
                    next[x[q] as usize] += w;
                }
                for v in [&mut first, &mut next] {
                    let t: f64 = v.iter().sum();
                    v.iter_mut().for_each(|p| *p /= t);
                }
                assert!(max_abs_diff(init.slot(slot).probs(), &first) < 1e-12);
                assert!(max_abs_diff(updated.slot(slot).probs(), &next) < 1e-12);
            }
        }
    }
}

#[test]
fn base_case_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for d in [2u32, 3] {
        let m = Zd::new(d).unwrap();
        let du = d as usize;
        let lattice = TorusLattice::with_modulus(2, m).unwrap();
        let decoder = RgDecoder::new(m, DecoderConfig::default()).unwrap();
        for _ in 0..20 {
            let (noise, probs) = random_noise(&mut rng, m, 8);
            let err = noise.sample_with(&mut rng);
            let s = syndrome(2, du, err.exponents());
            let out = decoder
                .decode(&lattice, &Syndrome::new(m, s.clone()), &noise)
                .unwrap();
            let want = brute_force_classes(2, du, &probs, &s);
            assert!(max_abs_diff(out.class_probs.probs(), &want) < 1e-12);
        }
    }
}

#[test]
fn rg_decoder_tracks_maximum_likelihood_on_small_lattices() {
    let m = Zd::new(2).unwrap();
    let lattice = TorusLattice::with_modulus(4, m).unwrap();
    let noise = NoiseModel::bitflip(m, 0.08, lattice.num_edges()).unwrap();
    let decoder = RgDecoder::new(m, DecoderConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mut rg_fail, mut ml_fail, mut disagree, mut nontrivial) = (0, 0, 0, 0);
    let trials = 500;
    for _ in 0..trials {
        let err = noise.sample_with(&mut rng);
        let s = lattice.syndrome(&err).unwrap();
        if !s.is_trivial() {
            nontrivial += 1;
        }
        let rg = decoder.decode(&lattice, &s, &noise).unwrap().argmax;
        let relative =
            exact_class_probabilities_bounded(&lattice, &s, &noise, EnumerationBound::unlimited())
                .unwrap();
        let offset = lattice
            .winding(&lattice.canonical_representative(&s).unwrap())
            .unwrap();
        let ml = relative.shifted(offset).argmax();
        let actual = lattice.winding(&err).unwrap();
        rg_fail += (rg != actual) as usize;
        ml_fail += (ml != actual) as usize;
        disagree += (rg != ml) as usize;
    }
    assert!(nontrivial > 100);
    // ML is optimal on average; allow three standard deviations of the
    // difference over the disagreeing trials.
    let slack = 3.0 * (disagree as f64).sqrt();
    assert!(
        (ml_fail as f64) <= rg_fail as f64 + slack,
        "ML {ml_fail} vs RG {rg_fail}"
    );
    assert!(
        (rg_fail as f64) <= 1.25 * ml_fail as f64 + slack,
        "ML {ml_fail} vs RG {rg_fail}"
    );
    assert!(disagree * 5 <= trials, "{disagree} disagreements");
}

#[test]
fn library_conventions_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for d in 2..=6u32 {
        let m = Zd::new(d).unwrap();
        for l in [2usize, 4, 8] {
            let lattice = TorusLattice::with_modulus(l, m).unwrap();
            let ex: Vec<u8> = (0..2 * l * l)
                .map(|_| rng.random_range(0..d as u8))
                .collect();
            let op = XOperator::from_exponents(m, ex.clone());
            let s = lattice.syndrome(&op).unwrap();
            assert_eq!(s.charges(), syndrome(l, d as usize, &ex).as_slice());
            let w = lattice.winding(&op).unwrap();
            assert_eq!((w.w1 as usize, w.w2 as usize), winding(l, d as usize, &ex));
        }
    }
}
