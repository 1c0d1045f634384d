//! Reference Merkle construction written directly on `sha2`.
//!
//! Builds the whole tree level by level, padding every odd level by
//! repeating its last node, and reads proofs straight off the levels.

#![allow(dead_code)]

use sha2::{Digest, Sha256};

pub fn sha(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// All levels, leaves first, root last. Empty input has no levels.
pub fn levels(leaves: &[[u8; 32]]) -> Vec<Vec<[u8; 32]>> {
    if leaves.is_empty() {
        return Vec::new();
    }
    let mut out = vec![leaves.to_vec()];
    while out.last().unwrap().len() > 1 {
        let mut level = out.last().unwrap().clone();
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        let next = level.chunks(2).map(|p| sha(&[&[0x01], &p[0], &p[1]])).collect();
        out.push(next);
    }
    out
}

pub fn root(leaves: &[[u8; 32]]) -> [u8; 32] {
    match levels(leaves).last() {
        None => sha(&[]),
        Some(top) => top[0],
    }
}

/// Sibling hashes bottom-up, with `true` when the sibling is on the left.
pub fn proof(leaves: &[[u8; 32]], mut index: usize) -> Vec<([u8; 32], bool)> {
    let lv = levels(leaves);
    let mut out = Vec::new();
    for level in &lv[..lv.len().saturating_sub(1)] {
        let sib = index ^ 1;
        let node = if sib < level.len() { level[sib] } else { level[index] };
        out.push((node, sib < index));
        index /= 2;
    }
    out
}

/// TOC entry hash from its documented preimage.
pub fn toc_entry(key: &str, content: &[u8; 32]) -> [u8; 32] {
    sha(&[&[0x00], &(key.len() as u32).to_be_bytes(), key.as_bytes(), content])
}
