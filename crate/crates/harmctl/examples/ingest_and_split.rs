//! CSV ingestion and reproducible instance-level splitting.
//!
//! Writes the two schemas to a temporary directory, loads them back, joins
//! them into a dataset, and splits it deterministically.
//!
//! ```bash
//! cargo run --example ingest_and_split
//! ```

use std::fs;

use harmctl::data::{
    join_dataset, load_human_predictions, load_scores, read_label_space, split_dataset,
    write_humans_csv, write_scores_csv,
};

fn main() {
    let dir = std::env::temp_dir().join("harmctl_ingest_example");
    fs::create_dir_all(&dir).unwrap();
    let scores_path = dir.join("scores.csv");
    let humans_path = dir.join("humans.csv");

    fs::write(
        &scores_path,
        "instance_id,noise,cat,dog,truck\n\
         img_1,110,0.70,0.20,0.10\n\
         img_2,110,0.30,0.55,0.15\n\
         img_3,95,0.45,0.40,0.15\n\
         img_4,110,0.25,0.35,0.40\n",
    )
    .unwrap();
    fs::write(
        &humans_path,
        "instance_id,participant_id,true_label,prediction\n\
         img_1,p1,cat,cat\n\
         img_1,p2,cat,dog\n\
         img_1,p3,cat,cat\n\
         img_2,p1,dog,dog\n\
         img_2,p2,dog,dog\n\
         img_3,p1,cat,truck\n\
         img_4,p2,truck,truck\n",
    )
    .unwrap();

    let label_space = read_label_space(&scores_path).unwrap();
    println!("label space from the header: {:?}", label_space.names());

    let scores = load_scores(&scores_path, &label_space, false).unwrap();
    let (predictions, truths) = load_human_predictions(&humans_path, &label_space).unwrap();

    // Keep only the noise-110 stratum.
    let dataset = join_dataset(&label_space, &scores, &predictions, &truths, Some(110)).unwrap();
    println!("\njoined dataset: {} predictions on {} instances", dataset.len(),
        dataset.per_instance_accuracy.len());
    for (id, acc) in &dataset.per_instance_accuracy {
        println!("  {id}: per-instance accuracy {acc:.3}");
    }

    let (calib, test) = split_dataset(&dataset, 0.5, 7).unwrap();
    let (calib2, _) = split_dataset(&dataset, 0.5, 7).unwrap();
    println!("\nsplit at 50% with seed 7:");
    println!("  calibration instances: {:?}", calib.instance_ids());
    println!("  test instances:        {:?}", test.instance_ids());
    println!("  same seed, same split: {}", calib == calib2);

    // Round trip: writing the dataset back and reloading reproduces it.
    let mut scores_buf = Vec::new();
    let mut humans_buf = Vec::new();
    write_scores_csv(&mut scores_buf, &dataset).unwrap();
    write_humans_csv(&mut humans_buf, &dataset).unwrap();
    fs::write(dir.join("roundtrip_scores.csv"), &scores_buf).unwrap();
    fs::write(dir.join("roundtrip_humans.csv"), &humans_buf).unwrap();
    let table = load_scores(dir.join("roundtrip_scores.csv"), &label_space, false).unwrap();
    let (p2, t2) = load_human_predictions(dir.join("roundtrip_humans.csv"), &label_space).unwrap();
    let reloaded = join_dataset(&label_space, &table, &p2, &t2, None).unwrap();
    println!("  round trip reproduces the dataset: {}", reloaded == dataset);
}
