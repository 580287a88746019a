//! Load a labeled CSV, balance the classes and make a seeded
//! train/validation/test split.
//!
//! cargo run --example load_and_split

use xferbench::dataset::{balance_classes, load_tabular, split, Domain, SplitSpec};

fn main() -> xferbench::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| xferbench::Error::io("tempdir", e))?;
    let path = dir.path().join("vehicles.csv");
    let mut csv = String::from("length,width,class\n");
    for i in 0..130 {
        let class = ["car", "truck", "bus"][i % 3];
        let base = [4.5, 7.0, 12.0][i % 3];
        csv.push_str(&format!("{},{},{class}\n", base + (i as f64 * 0.7).sin(), 1.8 + 0.1 * (i % 5) as f64));
    }
    std::fs::write(&path, csv).map_err(|e| xferbench::Error::io(&path, e))?;

    let data = load_tabular(&path, "class", Domain::Source)?;
    println!("loaded {} rows, classes {:?}, counts {:?}", data.len(), data.class_names(), data.class_counts());

    let balanced = balance_classes(&data, 40, 7)?;
    println!("balanced counts {:?}", balanced.class_counts());

    let spec = SplitSpec::new(0.3, 0.3, 11)?;
    let (train, val, test) = split(&balanced, &spec)?;
    println!("train {} / val {} / test {}", train.len(), val.len(), test.len());
    println!("first test ids: {:?}", test.ids().take(5).collect::<Vec<_>>());
    Ok(())
}
