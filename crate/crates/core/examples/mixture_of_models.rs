//! Randomly mixing two classifiers moves along the straight segment between
//! their (majority, minority) points; the sampled version scatters around it.

use moonshape::datagen::{generate, ShiftSpec, Split};
use moonshape::evaluator::{model_mixture, MixtureMode};
use moonshape::trainer::{train, BatchSize, HyperParams};

fn main() -> moonshape::Result<()> {
    let spec = ShiftSpec::default();
    let train_set = generate(&spec, Split::Train)?;
    let test = generate(&spec, Split::OodTest)?;
    let hp = |lr: f64, epochs: usize| HyperParams {
        learning_rate: lr,
        l2: 0.0,
        batch_size: BatchSize::Rows(32),
        max_epochs: epochs,
        snapshot_epochs: vec![epochs],
        seed: 0,
    };
    let early = train(&train_set, &hp(3e-5, 1))?.remove(0);
    let late = train(&train_set, &hp(3e-3, 25))?.remove(0);

    println!("{:>5} {:>17} {:>17}", "p", "exact (maj, min)", "sampled (maj, min)");
    for i in 0..=4 {
        let p = i as f64 / 4.0;
        let run = |mode| model_mixture(&late, &early, p, &test, &spec.r_tr, &spec.r_ts, mode);
        let (e, s) = (run(MixtureMode::Exact)?, run(MixtureMode::Sampled(3))?);
        println!(
            "{p:>5.2} ({:.4}, {:.4}) ({:.4}, {:.4})",
            e.group_acc[1], e.group_acc[0], s.group_acc[1], s.group_acc[0]
        );
    }
    Ok(())
}
