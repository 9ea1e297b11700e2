use sghp_core::hawkes::appendix_a_spec;

fn main() {
    let spec = appendix_a_spec();
    println!("spectral radius: {}", spec.spectral_radius().unwrap());
    println!("branching: {:?}", spec.branching_matrix().unwrap());
    for horizon in [55.0, 65.0, 70.0] {
        let n = 400;
        let mut lens: Vec<usize> = Vec::new();
        let mut type1 = 0usize;
        let mut total = 0usize;
        for seed in 0..n {
            let seq = spec.simulate_sequence(horizon, 1_000_000 + seed).unwrap();
            for e in &seq.events { if e.type_index == 0 { type1 += 1; } total += 1; }
            lens.push(seq.len());
        }
        lens.sort_unstable();
        let mean: f64 = lens.iter().sum::<usize>() as f64 / n as f64;
        println!(
            "horizon {horizon:5}: mean {mean:7.1}  p50 {}  p90 {}  p99 {}  max {}  share_type0 {:.3}",
            lens[n as usize /2], lens[(n as usize *9)/10], lens[(n as usize *99)/100], lens[n as usize -1],
            type1 as f64 / total as f64
        );
    }
}
