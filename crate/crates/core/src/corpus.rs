//! The fixed regression corpus of example domains.

use crate::domain::{DomainSpec, RawSpec};

#[derive(Debug, Clone)]
pub struct NamedSpec {
    pub name: &'static str,
    pub spec: DomainSpec,
}

fn named(name: &'static str, blocks: &[&[u32]], ms: &[u32]) -> NamedSpec {
    let spec = DomainSpec::from_raw(&RawSpec::new(blocks, ms)).expect("corpus specs are valid");
    NamedSpec { name, spec }
}

/// `x_1^{mk} + (x_2^k + x_3^k)^m ≤ 1`.
pub fn split_block(m: u32, k: u32) -> DomainSpec {
    DomainSpec::from_raw(&RawSpec::new(&[&[k], &[k, k]], &[m, m])).expect("valid split-block spec")
}

/// Ball, superspheres with ω ∈ {4, 6, 8} in d = 3 and 4, the split-block
/// form with m = 2, k = 4, and a three-block spec in d = 5.
pub fn corpus() -> Vec<NamedSpec> {
    vec![
        named("ball3", &[&[2, 2, 2]], &[1]),
        named("ss4_d3", &[&[4, 4, 4]], &[1]),
        named("ss6_d3", &[&[6, 6, 6]], &[1]),
        named("ss8_d3", &[&[8, 8, 8]], &[1]),
        named("ss4_d4", &[&[4, 4, 4, 4]], &[1]),
        named("ss6_d4", &[&[6, 6, 6, 6]], &[1]),
        named("ss8_d4", &[&[8, 8, 8, 8]], &[1]),
        named("kn", &[&[4], &[4, 4]], &[2, 2]),
        named("blocks3_d5", &[&[4], &[2, 4], &[2, 2]], &[1, 2, 3]),
    ]
}

pub fn by_name(name: &str) -> Option<NamedSpec> {
    corpus().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_valid_and_named_uniquely() {
        let c = corpus();
        let mut names: Vec<_> = c.iter().map(|s| s.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
        assert_eq!(c.iter().filter(|s| s.spec.d() <= 4).count(), 8);
        assert_eq!(by_name("kn").unwrap().spec.d(), 3);
    }
}
