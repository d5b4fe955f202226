//! Invariants checked over generated inputs against test-side oracles.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use shieldpool_core::bloom::{encode_single, exclusion_check, union, BloomFilter, BloomParams, Exclusion, Membership};
use shieldpool_core::crypto::{decrypt, encrypt, hash_n, EncKeypair, SpendKeypair};
use shieldpool_core::merkle::{verify_path, AppendTree};
use shieldpool_core::smt::{smt_verify, SmtKey, SparseTree};
use shieldpool_core::statements::{JoinSplitPublic, Proof, ProofBackend, Statement, TransparentBackend, Witness};
use shieldpool_core::utxo::{build_joinsplit, commit, pad_inputs, validate_joinsplit, SpendInput, Utxo};
use shieldpool_core::FieldElement;

fn fe(v: u64) -> FieldElement {
    FieldElement::from_u64(v)
}

fn params() -> BloomParams {
    BloomParams::new(256, 2).unwrap()
}

/// Dense recomputation: pad the level with zero subtrees and hash pairs.
fn naive_root(height: usize, leaves: &[FieldElement]) -> FieldElement {
    let mut level: Vec<FieldElement> = leaves.to_vec();
    let mut zero = FieldElement::ZERO;
    for _ in 0..height {
        if level.len() % 2 == 1 {
            level.push(zero);
        }
        level = level.chunks(2).map(|p| hash_n([p[0], p[1]])).collect();
        if level.is_empty() {
            level.push(hash_n([zero, zero]));
        }
        zero = hash_n([zero, zero]);
    }
    level[0]
}

fn bit(key: &SmtKey, i: usize) -> bool {
    key[i / 8] & (0x80 >> (i % 8)) != 0
}

/// Compressed tree semantics written out independently: empty subtrees are
/// zero, singleton subtrees are their leaf hash.
fn naive_smt_root(entries: &BTreeMap<SmtKey, FieldElement>) -> FieldElement {
    fn leaf(k: &SmtKey, v: &FieldElement) -> FieldElement {
        let hi = FieldElement::from_be_bytes_reduced(&k[..16]);
        let lo = FieldElement::from_be_bytes_reduced(&k[16..]);
        hash_n([hi, lo, *v])
    }
    fn rec(items: Vec<(SmtKey, FieldElement)>, depth: usize) -> FieldElement {
        match items.len() {
            0 => FieldElement::ZERO,
            1 => leaf(&items[0].0, &items[0].1),
            _ => {
                let (r, l): (Vec<_>, Vec<_>) = items.into_iter().partition(|(k, _)| bit(k, depth));
                hash_n([rec(l, depth + 1), rec(r, depth + 1)])
            }
        }
    }
    rec(entries.iter().map(|(k, v)| (*k, *v)).collect(), 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn field_bytes_round_trip(v in any::<[u8; 31]>()) {
        let mut b = [0u8; 32];
        b[1..].copy_from_slice(&v);
        let x = FieldElement::from_be_bytes(&b).unwrap();
        prop_assert_eq!(x.to_be_bytes(), b);
        prop_assert_eq!(x + fe(7) - fe(7), x);
    }

    #[test]
    fn append_tree_matches_dense_oracle(values in prop::collection::vec(1u64..u64::MAX, 0..20)) {
        let leaves: Vec<_> = values.iter().map(|&v| fe(v)).collect();
        let mut tree = AppendTree::new(5).unwrap();
        for l in &leaves {
            tree.append(*l).unwrap();
        }
        prop_assert_eq!(tree.root(), naive_root(5, &leaves));
        for (i, l) in leaves.iter().enumerate() {
            let path = tree.prove(i as u64).unwrap();
            prop_assert!(verify_path(&tree.root(), l, &path));
            prop_assert!(!verify_path(&tree.root(), &(*l + fe(1)), &path));
        }
    }

    #[test]
    fn smt_matches_oracle_and_proves(
        keys in prop::collection::btree_set(any::<[u8; 32]>(), 0..12),
        probe in any::<[u8; 32]>(),
        order_seed in any::<u64>(),
    ) {
        let entries: BTreeMap<SmtKey, FieldElement> =
            keys.iter().enumerate().map(|(i, k)| (*k, fe(i as u64 + 1))).collect();
        let mut shuffled: Vec<_> = entries.iter().collect();
        let mut rng = ChaCha20Rng::seed_from_u64(order_seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let mut t = SparseTree::new();
        for (k, v) in shuffled {
            t.insert(*k, *v).unwrap();
        }
        prop_assert_eq!(t.root(), naive_smt_root(&entries));
        for (k, v) in &entries {
            let p = t.prove(k);
            prop_assert!(p.membership && p.value == *v && smt_verify(&t.root(), &p));
        }
        let p = t.prove(&probe);
        prop_assert_eq!(p.membership, entries.contains_key(&probe));
        prop_assert!(smt_verify(&t.root(), &p));
        let mut forged = p.clone();
        forged.membership = !forged.membership;
        forged.value = if forged.membership { fe(1) } else { FieldElement::ZERO };
        forged.other_leaf = None;
        prop_assert!(!smt_verify(&t.root(), &forged));
    }

    #[test]
    fn bloom_has_no_false_negatives(xs in prop::collection::vec(any::<u64>(), 1..30)) {
        let p = params();
        let mut f = BloomFilter::new(p);
        for x in &xs {
            f.insert(&fe(*x));
        }
        for x in &xs {
            prop_assert_eq!(f.contains(&fe(*x)), Membership::ProbablyPresent);
        }
        prop_assert_eq!(BloomFilter::from_bytes(&f.to_bytes()).unwrap(), f);
    }

    #[test]
    fn union_is_bitwise_or_and_never_excludes_a_member(
        a in prop::collection::vec(any::<u64>(), 0..10),
        b in prop::collection::vec(any::<u64>(), 0..10),
        probe in any::<u64>(),
    ) {
        let p = params();
        let build = |xs: &[u64]| {
            let mut f = BloomFilter::new(p);
            xs.iter().for_each(|x| f.insert(&fe(*x)));
            f
        };
        let (fa, fb) = (build(&a), build(&b));
        let u = union(&[&fa, &fb]).unwrap();
        for i in 0..p.m() {
            prop_assert_eq!(u.bit(i), fa.bit(i) || fb.bit(i));
        }
        for x in a.iter().chain(&b) {
            let verdict = exclusion_check(&u, &encode_single(&fe(*x), &p)).unwrap();
            prop_assert_eq!(verdict, Exclusion::PossiblyIncluded);
        }
        let target = encode_single(&fe(probe), &p);
        let overlap = (0..p.m()).filter(|&i| u.bit(i) && target.bit(i)).count() as u32;
        let expected = if overlap == target.popcount() {
            Exclusion::PossiblyIncluded
        } else {
            Exclusion::CertainlyExcluded
        };
        prop_assert_eq!(exclusion_check(&u, &target).unwrap(), expected);
    }

    #[test]
    fn encryption_round_trips_only_for_recipient(msg in prop::collection::vec(any::<u8>(), 0..200), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let to = EncKeypair::generate(&mut rng);
        let other = EncKeypair::generate(&mut rng);
        let ct = encrypt(&to.public, &msg, &mut rng);
        prop_assert_eq!(decrypt(&to, &ct).unwrap(), msg);
        prop_assert!(decrypt(&other, &ct).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn joinsplit_conserves_value_and_merges_lineage(
        amounts in prop::collection::vec(0u64..1_000_000, 1..5),
        public in -500_000i64..=0,
        split in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let total_in: u64 = amounts.iter().sum();
        prop_assume!(total_in as i64 + public >= 0);
        let total_out = (total_in as i64 + public) as u64;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = params();
        let owner = SpendKeypair::generate(&mut rng);
        let enc = EncKeypair::generate(&mut rng);
        let mut tree = AppendTree::new(4).unwrap();
        let mut notes = Vec::new();
        for &a in &amounts {
            let mut u = Utxo::fresh(a, owner.pk, encode_single(&FieldElement::random(&mut rng), &p), &mut rng);
            u.leaf_index = Some(tree.append(commit(&u).0).unwrap().0);
            notes.push(u);
        }
        let real: Vec<SpendInput> = notes
            .into_iter()
            .map(|u| SpendInput { path: Some(tree.prove(u.leaf_index.unwrap()).unwrap()), utxo: u, sk: owner.sk })
            .collect();
        let inputs = pad_inputs(real.clone(), owner.sk, p, &mut rng).unwrap();
        let first = (total_out as f64 * split) as u64;
        let outputs = [
            Utxo::fresh(first, owner.pk, BloomFilter::new(p), &mut rng),
            Utxo::fresh(total_out - first, owner.pk, BloomFilter::new(p), &mut rng),
        ];
        let (tx, witness, outs) =
            build_joinsplit(&inputs, outputs, public, [&enc.public, &enc.public], tree.root(), &mut rng).unwrap();

        prop_assert!(validate_joinsplit(&tx, |r| tree.is_known_root(r), &BTreeSet::new()).is_ok());
        let distinct: BTreeSet<_> = tx.input_nullifiers.iter().collect();
        prop_assert_eq!(distinct.len(), tx.input_nullifiers.len());

        for o in &outs {
            for i in 0..p.m() {
                let expected = real.iter().any(|r| r.utxo.chain_state.bit(i));
                prop_assert_eq!(o.chain_state.bit(i), expected);
            }
        }
        for (ct, c) in tx.encrypted_outputs.iter().zip(&tx.output_commitments) {
            let plain = decrypt(&enc, ct).unwrap();
            prop_assert_eq!(commit(&Utxo::from_plaintext(&plain, owner.pk).unwrap()), *c);
        }

        let statement = Statement::JoinSplit(JoinSplitPublic {
            merkle_root: tx.merkle_root,
            nullifiers: tx.input_nullifiers.clone(),
            output_commitments: tx.output_commitments.clone(),
            public_amount: tx.public_amount,
            tx_context: tx.tx_context,
            output_lock: None,
        });
        let backend = TransparentBackend;
        let proof = backend.prove(&statement, &Witness::JoinSplit(witness.clone())).unwrap();
        prop_assert!(backend.verify(&Proof::from_bytes(&proof.to_bytes()).unwrap()));

        let mut skewed = witness;
        skewed.outputs[0].amount += 1;
        prop_assert!(backend.prove(&statement, &Witness::JoinSplit(skewed)).is_err());
    }
}
