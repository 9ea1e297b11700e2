use sghp_core::adam::{adam_step, AdamState};
use sghp_core::data::Dataset;
use sghp_core::eval;
use sghp_core::hawkes::appendix_a_spec;
use sghp_core::model::{ModelConfig, SghpModel};
use sghp_core::rng::{self, Stream};
use sghp_core::tape::Gradients;
use sghp_core::train::TrainConfig;

const HEAD_NAMES: [&str; 10] = [
    "head_sigma_weight", "head_sigma_bias",
    "head_alpha_weight", "head_alpha_bias",
    "head_ell_weight", "head_ell_bias",
    "head_p_weight", "head_p_bias",
    "head_s_weight", "head_s_bias",
];

/// softplus^{-1}
fn splus_inv(y: f64) -> f64 {
    if y > 30.0 { y } else { (y.exp() - 1.0).ln() }
}

/// Least-norm solution of X w = y for X (4 x n) via w = X^T (X X^T)^{-1} y.
fn least_norm_solve(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let n = x[0].len();
    // Gram matrix G = X X^T (m x m)
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            g[i][j] = (0..n).map(|k| x[i][k] * x[j][k]).sum();
        }
    }
    // Solve G z = y by Gaussian elimination with partial pivoting.
    let mut a = g.clone();
    let mut z = y.to_vec();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        z.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            z[row] -= f * z[col];
        }
    }
    for col in (0..m).rev() {
        for row in 0..col {
            let f = a[row][col] / a[col][col];
            z[row] -= f * z[col];
        }
        z[col] /= a[col][col];
    }
    // w = X^T z
    (0..n).map(|k| (0..m).map(|i| x[i][k] * z[i]).sum()).collect()
}

fn set_heads_to_targets(model: &mut SghpModel, targets: &[[f64; 5]; 4]) {
    // Design rows for pairs in order (u, v) = (0,0), (0,1), (1,0), (1,1):
    // [e_v | e_u].
    let d = model.config().embedding_dim;
    let emb = model.params().get("type_embeddings").unwrap().data().to_vec();
    let row = |k: usize| emb[k * d..(k + 1) * d].to_vec();
    let pairs = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    let design: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(u, v)| {
            let mut r = row(v);
            r.extend(row(u));
            r
        })
        .collect();
    for (slot, name) in ["sigma", "alpha", "ell", "p", "s"].iter().enumerate() {
        let y: Vec<f64> = (0..4).map(|i| splus_inv(targets[i][slot])).collect();
        let w = least_norm_solve(&design, &y);
        let wname = format!("head_{name}_weight");
        let bname = format!("head_{name}_bias");
        model.params_mut().get_mut(&wname).unwrap().data_mut().copy_from_slice(&w);
        model.params_mut().get_mut(&bname).unwrap().data_mut()[0] = 0.0;
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("truth"); // truth | init | free
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60);
    let freeze = args.get(3).map(|s| s == "freeze").unwrap_or(false);

    let spec = appendix_a_spec();
    let seqs = spec.simulate_dataset(1000, 70.0, 3, 2).unwrap();
    let ds = Dataset::new(seqs, 2, 0, "t".into()).unwrap();
    let (tr, va, _) = ds.split((0.8, 0.1, 0.1), 7).unwrap();

    let model_cfg = ModelConfig::new(2, 16, 0);
    let mut cfg = TrainConfig::new(model_cfg);
    cfg.seed = 11;

    let mut model = SghpModel::init(cfg.model, cfg.seed).unwrap();
    if mode == "truth" {
        // Oracle-fitted shapes (sigma^2 matched to truth peak amplitude).
        let targets = [
            [0.70, 0.3069, 0.1263, 1.4386, 0.0222],   // (0,0)
            [0.173, 0.467, 1.019, 0.078, 0.086],      // (0,1)
            [0.458, 0.390, 0.478, 0.016, 0.041],      // (1,0)
            [0.354, 27.78, 1.115, 0.060, 5.834],      // (1,1)
        ];
        set_heads_to_targets(&mut model, &targets);
    }
    let grid = eval::default_recovery_grid();
    let rows = eval::kernel_recovery(&model, &spec, &grid).unwrap();
    let linfs: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.linf)).collect();
    println!("mode {mode} freeze {freeze}: initial linf [{}]", linfs.join(","));

    let head_snapshot: Vec<(String, Vec<f64>)> = HEAD_NAMES
        .iter()
        .map(|n| (n.to_string(), model.params().get(n).unwrap().data().to_vec()))
        .collect();

    let mut state = AdamState::new(cfg.adam, model.params());
    let eval_seed = rng::derive(cfg.seed, &[2]);
    let usable: Vec<usize> = (0..tr.len()).filter(|&i| tr.sequences()[i].len() >= 2).collect();
    for epoch in 1..=epochs {
        let mut order = usable.clone();
        Stream::derived(cfg.seed, &[1, epoch as u64]).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_like(model.params());
            for &idx in batch {
                let mut noise = Stream::derived(cfg.seed, &[3, epoch as u64, idx as u64]);
                let (_, grads) = model.loss_and_grads(&tr.sequences()[idx], &mut noise).unwrap();
                acc.accumulate(&grads);
            }
            let norm = acc.global_norm();
            if norm > cfg.clip_norm {
                acc.scale(cfg.clip_norm / norm);
            }
            adam_step(model.params_mut(), &acc, &mut state).unwrap();
            if freeze {
                for (name, values) in &head_snapshot {
                    model.params_mut().get_mut(name).unwrap().data_mut().copy_from_slice(values);
                }
            }
        }
        if epoch % 10 == 0 || epoch == 1 || epoch == epochs {
            let val = sghp_core::train::evaluate_loss(&va, &model, eval_seed).unwrap();
            let rows = eval::kernel_recovery(&model, &spec, &grid).unwrap();
            let linfs: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.linf)).collect();
            let peaks: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.learned_peak_time)).collect();
            println!("epoch {epoch:3}: val {val:.3} linf [{}] peaks [{}]", linfs.join(","), peaks.join(","));
        }
    }
}
