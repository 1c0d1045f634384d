#![allow(dead_code)]

pub mod lifecycle_oracle;
pub mod matrix_grid;
pub mod merkle_oracle;
