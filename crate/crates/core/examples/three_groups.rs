//! Three subpopulations with alignments −1, 0 and +1. Trains a grid and
//! prints each group's accuracy range across the sweep.

use moonshape::datagen::{generate, ShiftSpec, Split};
use moonshape::evaluator::evaluate_all;
use moonshape::trainer::{build_grid, sweep, BatchSize};

fn main() -> moonshape::Result<()> {
    let spec = ShiftSpec::default().with_mixture(vec![0.05, 0.15, 0.8], None);
    spec.validate()?;
    let train = generate(&spec, Split::Train)?;
    let test = generate(&spec, Split::OodTest)?;
    for s in spec.subpopulations() {
        println!("alignment {:+.1}, positive fraction {:.2}", s.alignment, s.pos_frac);
    }

    let grid = build_grid(&[1e-4, 1e-3, 3e-3], &[0.0], &[BatchSize::Rows(32)], &[1, 5, 20], &[0, 1]);
    let models = sweep(&train, &grid, 2)?.models;
    let (records, _) = evaluate_all(&models, &test, &spec.r_tr, &spec.r_ts)?;
    for g in 0..spec.k_groups {
        let acc = records.iter().map(|r| r.group_acc[g]);
        let (lo, hi) = acc.fold((1.0f64, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
        println!("group {g}: accuracy {lo:.4} .. {hi:.4}");
    }
    Ok(())
}
