#![allow(dead_code)]

pub mod naive_gibbs;
pub mod planted;
