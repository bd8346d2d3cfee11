//! Detection rates of both detectors on phantom voxels.
//!
//! `cargo run --release -p boldcause-core --features parallel --example monte_carlo -- [voxels] [cnr] [seed]`
//!
//! With `cnr = 0` every voxel is inactive and the rates are false-positive
//! rates; otherwise every voxel is active and the rates are sensitivities.

use boldcause_core::{glm_map, granger_map, phantom, GlmConfig, GrangerConfig, PhantomSpec};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .map(|s| s.parse().unwrap_or_else(|_| panic!("bad argument {i}: {s}")))
        .unwrap_or(default)
}

fn main() {
    let voxels: usize = arg(1, 2000);
    let cnr: f64 = arg(2, 0.0);
    let seed: u64 = arg(3, 1);

    let mut spec = PhantomSpec::new((voxels, 1, 1), seed);
    if cnr > 0.0 {
        spec.active_mask = vec![true; voxels];
        spec = spec.with_cnr(cnr).expect("valid CNR");
    }
    let ph = phantom::generate(&spec).expect("valid phantom");
    let glm = glm_map(&ph.grid, &ph.stim, &GlmConfig::new(spec.hrf().unwrap())).unwrap();
    let cfg = GrangerConfig {
        rng_seed: seed,
        ..GrangerConfig::for_tr(spec.tr_seconds)
    };
    let gc = granger_map(&ph.grid, &ph.stim, &cfg).unwrap();

    let rate = |n: usize| n as f64 / voxels as f64;
    println!(
        "voxels={voxels} cnr={cnr} seed={seed} glm_rate={:.4} gc_rate={:.4}",
        rate(glm.iter().filter(|r| r.active).count()),
        rate(gc.iter().filter(|d| d.result.active).count())
    );
}
