//! Closed-form accuracy gap against a Monte Carlo estimate, and the
//! (majority, minority) curve traced by sweeping a threshold.

use moonshape::theory::{accuracy_gap, monte_carlo_gap, roc_traverse, subpop_accuracy, PopulationSpec, ScoreModel};

fn main() -> moonshape::Result<()> {
    let pop = PopulationSpec::new(0.5, 0.9, 0.3)?;
    let (tpr, tnr) = (0.9, 0.7);
    let gap = accuracy_gap(&pop, tpr, tnr)?;
    println!(
        "acc(Z=1) = {:.4}, acc(Z=0) = {:.4}, gap = {gap:.4}",
        subpop_accuracy(&pop, tpr, tnr, 1)?,
        subpop_accuracy(&pop, tpr, tnr, 0)?
    );

    let (score, t) = ScoreModel::realizing(tpr, tnr)?;
    let mc = monte_carlo_gap(&pop, &score, t, 1_000_000, 42)?;
    println!("Monte Carlo gap = {:.4} ± {:.4} ({:+.2} SE)", mc.gap, mc.se, (mc.gap - gap) / mc.se);

    let score = ScoreModel { mu0: -1.0, mu1: 1.0, s0: 1.0, s1: 1.0 };
    println!("\n{:>9} {:>7} {:>7} {:>7} {:>7}", "threshold", "tpr", "tnr", "maj", "min");
    for p in roc_traverse(&pop, &score, 11)? {
        println!("{:>9.3} {:>7.4} {:>7.4} {:>7.4} {:>7.4}", p.threshold, p.tpr, p.tnr, p.maj_acc, p.min_acc);
    }
    Ok(())
}
