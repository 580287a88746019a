//! Synthetic resolution degradation: every chip goes to 50x50, down to a
//! 10x10 bottleneck, then back up to the requested size.
//!
//! cargo run --example degrade_chips

use xferbench::harness::synth::synth_chips;
use xferbench::imageprep::{degrade_stages, flatten, resize_bilinear, ImageChip};

fn main() -> xferbench::Result<()> {
    let (chips, labels) = synth_chips(2, 2, 3)?;
    for (chip, label) in chips.iter().zip(&labels) {
        let [start, bottleneck, out] = degrade_stages(chip, chip.width(), chip.height())?;
        let lost: f64 = flatten(chip)
            .iter()
            .zip(flatten(&out))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / (chip.width() * chip.height()) as f64;
        println!(
            "class {label}: {}x{} -> {}x{} -> {}x{} -> {}x{}, mean abs change {lost:.3}",
            chip.width(),
            chip.height(),
            start.width(),
            start.height(),
            bottleneck.width(),
            bottleneck.height(),
            out.width(),
            out.height()
        );
    }

    // half-pixel centers: two pixels stretched to four
    let pair = ImageChip::new(2, 1, 1, vec![0.0, 1.0])?;
    println!("2x1 -> 4x1: {:?}", resize_bilinear(&pair, 4, 1)?.pixels());
    Ok(())
}
