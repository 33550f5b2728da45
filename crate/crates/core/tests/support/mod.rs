#![allow(dead_code)]

pub mod alignment;
pub mod gradcheck;
pub mod stats;
