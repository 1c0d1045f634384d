//! Binary Merkle tree over 32-byte leaves.
//!
//! Leaves are expected to be hashes already (transaction hashes, or TOC entry
//! hashes which carry a `0x00` domain byte). Interior nodes are
//! `SHA-256(0x01 || left || right)`. A level with an odd number of nodes
//! pairs its last node with itself. The root of an empty list is the
//! SHA-256 of empty input; the root of one leaf is that leaf.

use serde::{Deserialize, Serialize};

use crate::hash::Hash256;

pub const LEAF_PREFIX: u8 = 0x00;
pub const NODE_PREFIX: u8 = 0x01;

pub fn node_hash(left: &Hash256, right: &Hash256) -> Hash256 {
    Hash256::digest_parts(&[&[NODE_PREFIX], &left.0, &right.0])
}

pub fn merkle_root(leaves: &[Hash256]) -> Hash256 {
    if leaves.is_empty() {
        return Hash256::digest(&[]);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    level[0]
}

fn next_level(level: &[Hash256]) -> Vec<Hash256> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => node_hash(l, r),
            [l] => node_hash(l, l),
            _ => unreachable!(),
        })
        .collect()
}

/// Number of levels above the leaves, i.e. `ceil(log2(len))`.
pub fn depth(len: u64) -> usize {
    if len <= 1 {
        0
    } else {
        (64 - (len - 1).leading_zeros()) as usize
    }
}

/// Which side of the running hash the sibling sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub sibling: Hash256,
    pub side: Side,
}

/// Authentication path from leaf `index` to the root, or `None` if out of range.
pub fn merkle_path(leaves: &[Hash256], index: usize) -> Option<Vec<PathStep>> {
    if index >= leaves.len() {
        return None;
    }
    let mut path = Vec::with_capacity(depth(leaves.len() as u64));
    let mut level = leaves.to_vec();
    let mut idx = index;
    while level.len() > 1 {
        let step = if idx % 2 == 0 {
            // duplicate-last: the odd tail node is its own sibling
            let sibling = level.get(idx + 1).copied().unwrap_or(level[idx]);
            PathStep { sibling, side: Side::Right }
        } else {
            PathStep {
                sibling: level[idx - 1],
                side: Side::Left,
            }
        };
        path.push(step);
        level = next_level(&level);
        idx /= 2;
    }
    Some(path)
}

/// Recomputes the root for `leaf` at `index` in a tree of `len` leaves.
///
/// Returns `None` when the path shape disagrees with `index`/`len`: wrong
/// length, a side flag that does not match the index bit, or a tail node
/// whose sibling is not itself.
pub fn root_from_path(leaf: &Hash256, index: u64, len: u64, path: &[PathStep]) -> Option<Hash256> {
    if index >= len || path.len() != depth(len) {
        return None;
    }
    let mut acc = *leaf;
    let mut idx = index;
    let mut width = len;
    for step in path {
        let expected = if idx % 2 == 0 { Side::Right } else { Side::Left };
        if step.side != expected {
            return None;
        }
        let is_tail = idx % 2 == 0 && idx + 1 == width;
        if is_tail && step.sibling != acc {
            return None;
        }
        acc = match step.side {
            Side::Right => node_hash(&acc, &step.sibling),
            Side::Left => node_hash(&step.sibling, &acc),
        };
        idx /= 2;
        width = width.div_ceil(2);
    }
    Some(acc)
}
