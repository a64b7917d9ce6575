//! Golden-file regression for the basin renderer: the byte stream of the
//! reference fractal image is pinned by an FNV-1a hash, frozen from the
//! first validated run of this implementation.

use nonlin_cli::basin::basin_map_with_parallelism;
use nonlin_cli::config::{BasinConfig, RootMethod};
use nonlin_cli::ppm::encode_ppm;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[test]
fn reference_fractal_image_is_stable() {
    let system = nonlin::problems::system_rf5();
    let cfg = BasinConfig {
        problem: "rf5".into(),
        method: RootMethod::Nr,
        policy: None,
        range: [[-50.0, 50.0], [-50.0, 50.0]],
        resolution: [128, 128],
        tolerances: None,
        seed: None,
    };
    let (grid, report) = basin_map_with_parallelism(&system, &cfg, 0, 1);
    assert!((report.coverage_percent - 100.0).abs() < 0.5);
    let bytes = encode_ppm(&grid, 100);
    assert_eq!(bytes.len(), 15 + 3 * 128 * 128);
    let hash = fnv1a(&bytes);
    assert_eq!(
        hash, GOLDEN_HASH,
        "rendered image drifted from the frozen reference (hash {hash:#018x})"
    );
}

const GOLDEN_HASH: u64 = 0x1ed8_b9be_3d09_c0d8;
