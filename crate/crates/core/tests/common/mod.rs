#![allow(dead_code)]

pub mod docgen;
pub mod oracle;
