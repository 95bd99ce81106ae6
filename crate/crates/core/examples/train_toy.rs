//! Trains the toy encoder on the synthetic CQR set and prints the
//! held-out retrieval accuracy curve.
//!
//! cargo run --release --example train_toy -- [steps] [learning_rate]

use cpc::trainer::{synthetic_cqr, train, TrainConfig};

fn main() -> cpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let learning_rate = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let cfg = TrainConfig {
        batch_size: 16,
        steps,
        learning_rate,
        eval_every: 25,
        ..TrainConfig::default()
    };
    let data = synthetic_cqr(64, 0);
    let out = train(&data, &cfg)?;
    println!(
        "{} train / {} held out, initial accuracy {:.3}",
        out.train_size,
        out.holdout_size,
        out.initial_accuracy.unwrap_or(f64::NAN)
    );
    for row in out.log.iter().filter(|r| r.retrieval_acc.is_some()) {
        println!(
            "step {:>4}  L_SC {:.4}  L_MNTP {:.4}  acc {:.3}",
            row.step,
            row.l_sc,
            row.l_mntp,
            row.retrieval_acc.unwrap()
        );
    }
    Ok(())
}
