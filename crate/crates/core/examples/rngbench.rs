// micro-benchmark: raw stream words vs thinning loop
use rand::RngCore;
use rand::SeedableRng;
use std::time::Instant;
use suppcount::numeric::rat_frac;
use suppcount::pvalue::{Expo, Kappa, KeepSampler};

fn main() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
    let mut acc = 0u64;
    let t0 = Instant::now();
    for _ in 0..50_000_000u64 {
        acc = acc.wrapping_add(rng.next_u64());
    }
    let dt = t0.elapsed();
    println!("raw next_u64: 50M in {:.2?} ({:.2}ns each) acc={acc}", dt, dt.as_nanos() as f64 / 50e6);

    let kappa = Kappa::derive(&rat_frac(1, 2), 20);
    let t = Expo::from_rat(rat_frac(5, 16));
    let sampler = KeepSampler::new(&t, &kappa);
    let ids: Vec<u32> = (0..1024).collect();
    let mut out = Vec::new();
    let mut kept = 0usize;
    let t0 = Instant::now();
    for _ in 0..30_000u64 {
        out.clear();
        sampler.thin_ids(&ids, &mut rng, u64::MAX, &mut out);
        kept += out.len();
    }
    let dt = t0.elapsed();
    let draws = 30_000u64 * 1024;
    println!(
        "thin_ids: {}M draws in {:.2?} ({:.2}ns each) kept={kept}",
        draws / 1_000_000,
        dt,
        dt.as_nanos() as f64 / draws as f64
    );
}
