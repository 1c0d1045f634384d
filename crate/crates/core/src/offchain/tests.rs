use super::*;
use crate::merkle::merkle_root;

fn key(n: u8) -> Keypair {
    Keypair::from_secret([n; 32])
}

fn anchor_for(store: &OffchainStore, owner: &PublicKeyId, len: u64) -> TocAnchor {
    let toc = store.toc(owner).unwrap();
    TocAnchor {
        stakeholder: *owner,
        toc_length: len,
        toc_root: toc.prefix_root(len as usize),
        anchored_at: 1,
    }
}

#[test]
fn put_get_roundtrip_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let a = store.put_record(b"wipe report").unwrap();
    assert_eq!(a, Hash256::digest(b"wipe report"));
    assert_eq!(store.put_record(b"wipe report").unwrap(), a);
    assert_eq!(store.get_record(&a).unwrap(), b"wipe report");
    let hex = a.to_hex();
    assert!(store
        .cas()
        .path_for(&a)
        .ends_with(format!("{}/{}/{hex}.rec", &hex[..2], &hex[2..4])));
}

#[test]
fn size_limit_and_missing_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let big = vec![0u8; MAX_RECORD_BYTES + 1];
    assert_eq!(store.put_record(&big).unwrap_err().code(), Some(ErrorCode::TooLarge));
    assert!(store.put_record(&big[..MAX_RECORD_BYTES]).is_ok());

    let missing = Hash256::digest(b"nope");
    assert_eq!(store.get_record(&missing).unwrap_err().code(), Some(ErrorCode::NotFound));

    let a = store.put_record(b"original").unwrap();
    std::fs::write(store.cas().path_for(&a), b"tampered").unwrap();
    assert_eq!(store.get_record(&a).unwrap_err().code(), Some(ErrorCode::IntegrityFailure));
    // Re-putting the genuine bytes repairs the copy.
    store.put_record(b"original").unwrap();
    assert_eq!(store.get_record(&a).unwrap(), b"original");
}

#[test]
fn toc_append_rules() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    let bob = key(2);
    let h = store.put_record(b"r1").unwrap();

    let err = store.toc_append(&bob, &alice.public(), "k", h).unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::PermissionDenied));

    let err = store
        .toc_append(&alice, &alice.public(), "k", Hash256::digest(b"absent"))
        .unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::NotFound));

    let long = "x".repeat(MAX_KEY_CHARS + 1);
    assert_eq!(
        store.toc_append(&alice, &alice.public(), &long, h).unwrap_err().code(),
        Some(ErrorCode::InvalidPayload)
    );

    let e0 = store.toc_append(&alice, &alice.public(), "dev/0", h).unwrap();
    let e1 = store.put_and_list(&alice, "dev/1", b"r2").unwrap();
    assert_eq!((e0.index, e1.index), (0, 1));
    assert_eq!(e0.entry_hash, entry_hash("dev/0", &h));

    let toc = store.toc(&alice.public()).unwrap();
    assert_eq!(toc.entries(), &[e0.clone(), e1.clone()]);
    assert_eq!(toc.root(), merkle_root(&[e0.entry_hash, e1.entry_hash]));
    assert!(store.toc(&bob.public()).unwrap().is_empty());
}

#[test]
fn entry_preimage_layout() {
    let h = Hash256([7; 32]);
    let p = entry_preimage("ab", &h);
    assert_eq!(p[0], 0x00);
    assert_eq!(&p[1..5], &[0, 0, 0, 2]);
    assert_eq!(&p[5..7], b"ab");
    assert_eq!(&p[7..], &[7; 32]);
}

#[test]
fn torn_toc_tail_is_ignored_then_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    store.put_and_list(&alice, "a", b"1").unwrap();
    store.put_and_list(&alice, "b", b"2").unwrap();
    let path = store.toc_path(&alice.public());
    let len = std::fs::metadata(&path).unwrap().len();
    let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
    f.set_len(len - 5).unwrap();
    assert_eq!(store.toc(&alice.public()).unwrap().len(), 1);
    let e = store.put_and_list(&alice, "c", b"3").unwrap();
    assert_eq!(e.index, 1);
    let toc = store.toc(&alice.public()).unwrap();
    assert_eq!(toc.entries().iter().map(|e| e.key.as_str()).collect::<Vec<_>>(), ["a", "c"]);
}

#[test]
fn corrupt_toc_is_an_integrity_failure() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    store.put_and_list(&alice, "a", b"1").unwrap();
    let path = store.toc_path(&alice.public());
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4] = 0x01;
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(
        store.toc(&alice.public()).unwrap_err().code(),
        Some(ErrorCode::IntegrityFailure)
    );
}

#[test]
fn anchoring_needs_progress() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    let err = store.anchor_toc(&alice, 0, 1, 9).unwrap_err();
    assert_eq!(err.code(), Some(ErrorCode::NoProgress));
    store.put_and_list(&alice, "a", b"1").unwrap();
    store.put_and_list(&alice, "b", b"2").unwrap();
    let (draft, tx) = store.anchor_toc(&alice, 0, 1, 9).unwrap();
    assert_eq!(draft.toc_length, 2);
    assert!(tx.verify_signature(9));
    match tx.payload {
        Payload::AnchorToc { toc_length, toc_root } => {
            assert_eq!(toc_length, 2);
            assert_eq!(toc_root, store.toc(&alice.public()).unwrap().root());
        }
        ref other => panic!("unexpected payload {other:?}"),
    }
    assert!(store.anchor_toc(&alice, 2, 2, 9).is_err());
}

#[test]
fn membership_proofs_for_every_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    for i in 0..7u8 {
        store.put_and_list(&alice, &format!("k{i}"), &[i]).unwrap();
    }
    let owner = alice.public();
    let toc = store.toc(&owner).unwrap();
    for len in 1..=7u64 {
        let anchor = anchor_for(&store, &owner, len);
        for idx in 0..len {
            let proof = store.prove_membership(&owner, idx, &anchor).unwrap();
            let entry = &toc.entries()[idx as usize];
            assert!(verify_membership(entry, &proof, &anchor), "len {len} idx {idx}");
            // Wrong entry fails.
            let other = &toc.entries()[((idx + 1) % 7) as usize];
            assert!(!verify_membership(other, &proof, &anchor));
        }
        let err = store.prove_membership(&owner, len, &anchor).unwrap_err();
        assert_eq!(err.code(), Some(ErrorCode::OutOfRange));
    }
}

#[test]
fn membership_rejects_altered_entry_or_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let store = OffchainStore::open(dir.path()).unwrap();
    let alice = key(1);
    for i in 0..3u8 {
        store.put_and_list(&alice, &format!("k{i}"), &[i]).unwrap();
    }
    let owner = alice.public();
    let anchor = anchor_for(&store, &owner, 3);
    let proof = store.prove_membership(&owner, 1, &anchor).unwrap();
    let mut entry = store.toc(&owner).unwrap().entries()[1].clone();
    assert!(verify_membership(&entry, &proof, &anchor));

    let mut other_anchor = anchor.clone();
    other_anchor.toc_root = Hash256([9; 32]);
    assert!(!verify_membership(&entry, &proof, &other_anchor));

    entry.content_hash = Hash256([1; 32]);
    assert!(!verify_membership(&entry, &proof, &anchor));
}
