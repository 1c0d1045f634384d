//! Append-only block log.
//!
//! `blocks.log` holds one record per block: a `u32` big-endian length
//! followed by the encoded block. `blocks.idx` holds the `u64` big-endian
//! byte offset of every record. The log is authoritative: on open, a
//! partially written tail record is truncated away and the index is rebuilt
//! whenever it disagrees with the log.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::block::Block;
use crate::codec::CodecError;

pub const LOG_FILE: &str = "blocks.log";
pub const INDEX_FILE: &str = "blocks.idx";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("block store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("block {index} is not decodable: {source}")]
    Decode { index: u64, source: CodecError },
    #[error("no block at index {0}")]
    Missing(u64),
}

/// What recovery had to do when the store was opened.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Recovery {
    pub blocks: u64,
    pub truncated_bytes: u64,
    pub index_rebuilt: bool,
}

#[derive(Debug)]
pub struct BlockStore {
    dir: PathBuf,
    log: File,
    index: File,
    offsets: Vec<u64>,
    end: u64,
}

impl BlockStore {
    pub fn open(dir: &Path) -> Result<(BlockStore, Recovery), StoreError> {
        std::fs::create_dir_all(dir)?;
        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(dir.join(LOG_FILE))?;
        let mut index = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(dir.join(INDEX_FILE))?;

        let mut bytes = Vec::new();
        log.seek(SeekFrom::Start(0))?;
        log.read_to_end(&mut bytes)?;
        let mut offsets = Vec::new();
        let mut pos = 0usize;
        while bytes.len() - pos >= 4 {
            let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            if bytes.len() - pos - 4 < len {
                break;
            }
            offsets.push(pos as u64);
            pos += 4 + len;
        }
        let mut recovery = Recovery {
            blocks: offsets.len() as u64,
            ..Default::default()
        };
        if pos < bytes.len() {
            recovery.truncated_bytes = (bytes.len() - pos) as u64;
            log.set_len(pos as u64)?;
            log.sync_all()?;
        }

        let mut idx_bytes = Vec::new();
        index.read_to_end(&mut idx_bytes)?;
        let expected: Vec<u8> = offsets.iter().flat_map(|o| o.to_be_bytes()).collect();
        if idx_bytes != expected {
            index.set_len(0)?;
            index.seek(SeekFrom::Start(0))?;
            index.write_all(&expected)?;
            index.sync_all()?;
            recovery.index_rebuilt = true;
        }
        index.seek(SeekFrom::End(0))?;

        Ok((
            BlockStore {
                dir: dir.to_path_buf(),
                log,
                index,
                offsets,
                end: pos as u64,
            },
            recovery,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> u64 {
        self.offsets.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn append(&mut self, block: &Block) -> Result<u64, StoreError> {
        let bytes = block.encode().map_err(|source| StoreError::Decode {
            index: self.len(),
            source,
        })?;
        self.append_raw(&bytes)
    }

    /// Appends an already-encoded block and syncs both files.
    pub fn append_raw(&mut self, bytes: &[u8]) -> Result<u64, StoreError> {
        let mut record = Vec::with_capacity(bytes.len() + 4);
        record.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        record.extend_from_slice(bytes);
        self.log.write_all(&record)?;
        self.log.sync_data()?;
        let offset = self.end;
        self.index.write_all(&offset.to_be_bytes())?;
        self.index.sync_data()?;
        self.offsets.push(offset);
        self.end += record.len() as u64;
        Ok(self.len() - 1)
    }

    pub fn read_raw(&self, index: u64) -> Result<Vec<u8>, StoreError> {
        let offset = *self.offsets.get(index as usize).ok_or(StoreError::Missing(index))?;
        let mut f = File::open(self.dir.join(LOG_FILE))?;
        f.seek(SeekFrom::Start(offset))?;
        let mut len = [0u8; 4];
        f.read_exact(&mut len)?;
        let mut buf = vec![0u8; u32::from_be_bytes(len) as usize];
        f.read_exact(&mut buf)?;
        Ok(buf)
    }

    pub fn read(&self, index: u64) -> Result<Block, StoreError> {
        let raw = self.read_raw(index)?;
        Block::decode(&raw).map_err(|source| StoreError::Decode { index, source })
    }

    pub fn read_all_raw(&self) -> Result<Vec<Vec<u8>>, StoreError> {
        let mut bytes = Vec::new();
        File::open(self.dir.join(LOG_FILE))?.read_to_end(&mut bytes)?;
        Ok(self
            .offsets
            .iter()
            .map(|&o| {
                let o = o as usize;
                let len = u32::from_be_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
                bytes[o + 4..o + 4 + len].to_vec()
            })
            .collect())
    }
}
