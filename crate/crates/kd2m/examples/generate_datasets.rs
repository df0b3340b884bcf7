//! Generate the three synthetic datasets, write them as CSV, and read one
//! back to show the round trip is value-exact.
//!
//! ```bash
//! cargo run --example generate_datasets
//! ```

use kd2m::data::{gen_blobs, gen_moons, gen_spirals, load_csv, save_csv};
use std::path::PathBuf;

fn main() -> kd2m::Result<()> {
    let out_dir = PathBuf::from("target/example-output");
    std::fs::create_dir_all(&out_dir).expect("create output dir");

    let blobs = gen_blobs(300, 3, 2, 0.15, 7)?;
    let moons = gen_moons(300, 0.05, 7)?;
    let spirals = gen_spirals(300, 1.5, 0.03, 7)?;

    for dataset in [&blobs, &moons, &spirals] {
        let path = out_dir.join(format!("{}.csv", dataset.name));
        save_csv(dataset, &path)?;
        println!(
            "{:<8} n = {}, dim = {}, classes = {} -> {}",
            dataset.name,
            dataset.len(),
            dataset.dim(),
            dataset.n_classes,
            path.display()
        );
    }

    let reloaded = load_csv(&out_dir.join("moons.csv"))?;
    assert_eq!(reloaded.x, moons.x);
    assert_eq!(reloaded.y, moons.y);
    println!("round trip check: moons.csv reloads value-exact");
    Ok(())
}
