//! Trains a small hyperparameter grid and prints the per-group accuracies of
//! every snapshot on the OOD pool.

use moonshape::datagen::{generate, ShiftSpec, Split};
use moonshape::evaluator::evaluate_all;
use moonshape::trainer::{build_grid, sweep, BatchSize};

fn main() -> moonshape::Result<()> {
    let spec = ShiftSpec::default();
    let train = generate(&spec, Split::Train)?;
    let test = generate(&spec, Split::OodTest)?;

    let grid = build_grid(&[1e-4, 1e-3], &[0.0], &[BatchSize::Rows(32), BatchSize::Full], &[1, 5, 20], &[0]);
    let out = sweep(&train, &grid, 2)?;
    let (records, _) = evaluate_all(&out.models, &test, &spec.r_tr, &spec.r_ts)?;

    println!("{:<28} {:>8} {:>8} {:>8} {:>8}", "model", "maj", "min", "id", "ood");
    for r in &records {
        let (maj, min) = r.maj_min();
        println!("{:<28} {maj:>8.4} {min:>8.4} {:>8.4} {:>8.4}", r.model_id, r.id_acc, r.ood_acc);
    }
    Ok(())
}
