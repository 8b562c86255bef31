//! Cross-module checks on moderately sized instances.

use hyperphase::exploration::{replay, run_exploration, Algorithm, Backend, ExplorationConfig, Source};
use hyperphase::hypergraph::{components_oracle, sample, HypergraphSample, SampleMethod};
use hyperphase::model::threshold_p;

#[test]
fn coupled_run_matches_oracle_at_threshold() {
    for (k, j) in [(3u32, 1u32), (3, 2), (4, 2), (4, 3)] {
        let n = 16;
        let p = threshold_p(u64::from(n), k, j).unwrap().value;
        for seed in 0..5 {
            let cfg = ExplorationConfig::new(Algorithm::Bfs1, Backend::Exact, n, k, j, Source::Bernoulli { p }, seed);
            let res = run_exploration(cfg).unwrap();
            let h = res.hypergraph(seed);
            assert_eq!(res.partition().unwrap(), components_oracle(&h, j).unwrap());
        }
    }
}

#[test]
fn trace_bits_determine_the_hypergraph() {
    let cfg = ExplorationConfig::new(Algorithm::Dfs1, Backend::Exact, 12, 3, 2, Source::Bernoulli { p: 0.05 }, 8);
    let a = run_exploration(cfg.clone()).unwrap();
    let b = replay(a.trace.bits(), cfg).unwrap();
    let ha = a.hypergraph(8);
    assert_eq!(ha, b.hypergraph(8));
    let text = ha.to_text().unwrap();
    assert_eq!(HypergraphSample::from_text(&text).unwrap(), ha);
}

#[test]
fn sampler_methods_agree_on_component_sizes() {
    let (n, k, j) = (40u32, 3u32, 2u32);
    let p = 1.5 * threshold_p(u64::from(n), k, j).unwrap().value;
    let mean = |m: SampleMethod| {
        (0..200)
            .map(|s| components_oracle(&sample(n, k, p, s, m).unwrap(), j).unwrap().largest() as f64)
            .sum::<f64>()
            / 200.0
    };
    let (d, s) = (mean(SampleMethod::Dense), mean(SampleMethod::Sparse));
    assert!((d - s).abs() / d < 0.15, "dense {d} sparse {s}");
}
