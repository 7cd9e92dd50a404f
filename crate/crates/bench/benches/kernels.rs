use criterion::{black_box, criterion_group, criterion_main, Criterion};
