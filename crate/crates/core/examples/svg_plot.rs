//! Renders a scatter with an overlay line to an SVG file.

use moonshape::harness::{emit_plot, Overlay, PlotStyle, Scatter};

fn main() -> moonshape::Result<()> {
    let points: Vec<(f64, f64)> = (0..40).map(|i| i as f64 / 39.0).map(|x| (x, x * (1.5 - x))).collect();
    let scatter = Scatter { label: "samples".into(), color: "steelblue".into(), points };
    let line = Overlay {
        label: "y = x".into(),
        color: "crimson".into(),
        points: vec![(0.0, 0.0), (1.0, 1.0)],
    };
    let style = PlotStyle { title: "demo".into(), ..PlotStyle::default() };
    let path = std::env::temp_dir().join("moonshape-demo.svg");
    emit_plot(&[scatter], &[line], &style, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
