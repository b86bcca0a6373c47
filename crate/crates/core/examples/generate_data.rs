//! Builds the default majority/minority training set and a correlated 2×2
//! table, and prints their cell counts.

use moonshape::datagen::{generate, mixture_table, ShiftSpec, Split};

fn main() -> moonshape::Result<()> {
    let spec = ShiftSpec::default();
    for split in Split::ALL {
        let ds = generate(&spec, split)?;
        println!("{split:>9}: {} rows, group sizes {:?}", ds.n_rows(), ds.group_sizes());
    }

    let corr = ShiftSpec::default().with_correlation(0.5, 0.9, 0.3);
    println!("\ncorrelated training table:");
    println!("{}", corr.train_table().expect("correlation design has a table"));
    println!("r_tr = {:?}", corr.r_tr);

    // The same family, positioned between independence (0) and the Fréchet
    // bound (1).
    for level in [0.0, 0.5, 1.0] {
        let t = mixture_table(3000, 0.5, 0.6, level)?;
        println!("level {level}: pi1 = {:.3}, pi0 = {:.3}", t.pi1(), t.pi0());
    }
    Ok(())
}
