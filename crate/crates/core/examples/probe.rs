use heatgeo::datasets;
use heatgeo::embedding::*;
use heatgeo::metrics::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    for step in [4.0, 5.0, 6.0] {
        for t in [2.0, 5.0, 10.0, 50.0] {
            let mut ratios = Vec::new();
            for seed in 0..5u64 {
                let pc = datasets::timepoint_drift(200, 3, 5, step, seed).unwrap();
                let cfg = HeatGeoConfig { time: TimeSpec::Fixed(t), seed, ..Default::default() };
                let out = heatgeo_embed(&pc, &cfg).unwrap();
                let times = pc.timepoints().unwrap();
                let emd = interpolation_emd(&out.embedding.coords, times, 1, seed).unwrap();
                let n = pc.n_points();
                let mut perm: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
                perm.shuffle(&mut rng);
                let shuffled = ndarray::Array2::from_shape_fn((n, 2), |(i, j)| out.embedding.coords[[perm[i], j]]);
                let control = interpolation_emd(&shuffled, times, 1, seed).unwrap();
                ratios.push(emd / control);
            }
            println!("step={step} t={t}: mean ratio={:.3} {:?}", ratios.iter().sum::<f64>() / 5.0,
                ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>());
        }
    }
}
