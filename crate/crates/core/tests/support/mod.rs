#![allow(dead_code)]

pub mod fd;
pub mod grad_cases;
pub mod grammar;
pub mod oracle;
pub mod programs;
pub mod suite;
