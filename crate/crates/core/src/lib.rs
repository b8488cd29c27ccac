//! Exact evaluation of the naive Shintani function, the Shintani cocycle and
//! the Milnor-K-valued Stevens cocycle on explicit inputs, together with
//! verification suites that compare them as truncated Laurent series.

pub mod cyclotomic;
pub mod epscone;
pub mod harness;
pub mod milnor;
pub mod modular;
pub mod qlinalg;
pub mod schwartz;
pub mod series;
pub mod solomon_hu;
