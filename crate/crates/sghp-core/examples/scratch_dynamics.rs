use sghp_core::adam::{adam_step, AdamState};
use sghp_core::data::Dataset;
use sghp_core::eval;
use sghp_core::hawkes::appendix_a_spec;
use sghp_core::model::{ModelConfig, SghpModel};
use sghp_core::rng::{self, Stream};
use sghp_core::tape::Gradients;
use sghp_core::train::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let every: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(10);

    let spec = appendix_a_spec();
    let seqs = spec.simulate_dataset(n, 70.0, 3, 2).unwrap();
    let ds = Dataset::new(seqs, 2, 0, "t".into()).unwrap();
    let (tr, va, _te) = ds.split((0.8, 0.1, 0.1), 7).unwrap();

    let mut model_cfg = ModelConfig::new(2, 16, 0);
    if args.get(5).map(|s| s == "noself").unwrap_or(false) {
        model_cfg.include_self_term = false;
        println!("self-term disabled");
    }
    let mut cfg = TrainConfig::new(model_cfg);
    cfg.seed = 11;
    cfg.adam.learning_rate = lr;

    let mut model = SghpModel::init(cfg.model, cfg.seed).unwrap();
    let mut state = AdamState::new(cfg.adam, model.params());
    let eval_seed = rng::derive(cfg.seed, &[2]);
    let grid = eval::default_recovery_grid();

    let usable: Vec<usize> = (0..tr.len()).filter(|&i| tr.sequences()[i].len() >= 2).collect();
    for epoch in 1..=epochs {
        let mut order = usable.clone();
        Stream::derived(cfg.seed, &[1, epoch as u64]).shuffle(&mut order);
        let mut grad_norm_heads = 0.0f64;
        let mut grad_norm_all = 0.0f64;
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
            for (name, g) in acc.iter() {
                let ss: f64 = g.data().iter().map(|v| v * v).sum();
                if name.starts_with("head_") { grad_norm_heads += ss; }
                grad_norm_all += ss;
            }
            adam_step(model.params_mut(), &acc, &mut state).unwrap();
        }
        if epoch % every == 0 || epoch == 1 {
            let val = sghp_core::train::evaluate_loss(&va, &model, eval_seed).unwrap();
            let rows = eval::kernel_recovery(&model, &spec, &grid).unwrap();
            let linfs: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.linf)).collect();
            let peaks: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.learned_peak_time)).collect();
            println!(
                "epoch {epoch:3}: val {val:.3} linf [{}] peaks [{}] g_heads {:.3} g_all {:.3}",
                linfs.join(","), peaks.join(","), grad_norm_heads.sqrt(), grad_norm_all.sqrt()
            );
        }
    }
    for u in 0..2 { for v in 0..2 {
        let t = model.kernel_params(u, v).unwrap();
        println!("theta({u},{v}): sigma {:.3} alpha {:.3} ell {:.3} p {:.3} s {:.3}", t.sigma, t.alpha, t.ell, t.p, t.s);
    }}
}
