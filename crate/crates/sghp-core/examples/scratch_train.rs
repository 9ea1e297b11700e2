use std::time::Instant;
use sghp_core::data::Dataset;
use sghp_core::eval;
use sghp_core::hawkes::appendix_a_spec;
use sghp_core::model::ModelConfig;
use sghp_core::train::{train, Clock, TrainConfig};

struct SysClock(Instant);
impl Clock for SysClock {
    fn now(&mut self) -> f64 { self.0.elapsed().as_secs_f64() }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);

    let spec = appendix_a_spec();
    let t0 = Instant::now();
    let seqs = spec.simulate_dataset(n, 70.0, 3, 2).unwrap();
    let mean_len: f64 = seqs.iter().map(|s| s.len()).sum::<usize>() as f64 / n as f64;
    println!("simulated {n} sequences, mean len {mean_len:.1} in {:.1}s", t0.elapsed().as_secs_f64());
    let ds = Dataset::new(seqs, 2, 0, "t".into()).unwrap();
    let (tr, va, te) = ds.split((0.8, 0.1, 0.1), 7).unwrap();

    let model_cfg = ModelConfig::new(2, 16, 0);
    let mut cfg = TrainConfig::new(model_cfg);
    cfg.max_epochs = epochs;
    cfg.patience = 10;
    cfg.seed = 11;
    cfg.adam.learning_rate = lr;

    let t0 = Instant::now();
    let (model, report) = train(&tr, &va, &cfg, &mut SysClock(Instant::now())).unwrap();
    println!("trained {} epochs (best {}) in {:.1}s", report.epochs_run(), report.best_epoch, t0.elapsed().as_secs_f64());
    for (i, (a, b)) in report.train_loss.iter().zip(report.val_loss.iter()).enumerate() {
        if i < 5 || i % 10 == 0 || i + 1 == report.epochs_run() {
            println!("  epoch {:3}: train {a:.4}  val {b:.4}  ({:.1}s)", i + 1, report.epoch_seconds[i]);
        }
    }

    let grid = eval::default_recovery_grid();
    let rows = eval::kernel_recovery(&model, &spec, &grid).unwrap();
    for r in &rows {
        println!(
            "pair ({},{}): linf {:.3}  learned_peak {:.2}  truth_peak {:.2}",
            r.source, r.target, r.linf, r.learned_peak_time, r.truth_peak_time
        );
        let th = model.kernel_params(r.source, r.target).unwrap();
        println!("   theta: sigma {:.3} alpha {:.3} ell {:.3} p {:.3} s {:.3}", th.sigma, th.alpha, th.ell, th.p, th.s);
    }

    let rmse = eval::rmse_last_event(&te, &model, 99).unwrap();
    let f1 = eval::f1_micro_last_event(&te, &model, 99).unwrap();
    let means = eval::per_type_mean_gap(&tr);
    let base = eval::rmse_constant_baseline(&te, &means).unwrap();
    println!("test rmse {rmse:.4}  baseline {base:.4}  ratio {:.3}  f1 {f1:.3}", rmse / base);
}
