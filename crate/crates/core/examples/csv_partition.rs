//! Loads a CSV, derives the protected attribute by median threshold and
//! splits rows into clients by a column.
//!
//! cargo run --example csv_partition -- path/to/file.csv features label protected group
//!
//! `features` is a comma-separated list of column names. Without arguments a
//! small generated table is used.

use fairfl::data::{load_csv, partition_by_column, CsvColumns, ProtectedThreshold};

fn demo_table() -> std::io::Result<std::path::PathBuf> {
    let path = std::env::temp_dir().join("fairfl_csv_partition_demo.csv");
    let mut text = String::from("region,x1,x2,share,y\n");
    for i in 0..40 {
        let region = ["north", "south", "east", "west"][i % 4];
        let x1 = (i as f64 * 0.37).sin();
        let x2 = (i as f64 * 0.11).cos();
        let share = (i * 7 % 10) as f64 / 10.0;
        text.push_str(&format!("{region},{x1},{x2},{share},{}\n", u8::from(x1 + x2 > 0.5)));
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

fn main() -> fairfl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (path, columns) = if args.len() == 5 {
        let columns = CsvColumns {
            features: args[1].split(',').map(str::to_string).collect(),
            label: args[2].clone(),
            protected: args[3].clone(),
            protected_threshold: Some(ProtectedThreshold::Median),
            group: Some(args[4].clone()),
        };
        (args[0].clone().into(), columns)
    } else {
        let columns = CsvColumns {
            features: vec!["x1".into(), "x2".into()],
            label: "y".into(),
            protected: "share".into(),
            protected_threshold: Some(ProtectedThreshold::Median),
            group: Some("region".into()),
        };
        (demo_table().expect("write demo table"), columns)
    };
    let loaded = load_csv(&path, &columns)?;
    println!("{} rows kept, {} dropped", loaded.dataset.len(), loaded.dropped_rows);
    let groups = loaded.groups.expect("group column requested");
    for shard in partition_by_column(&loaded.dataset, &groups, 4)? {
        println!(
            "client {}: {} rows, weight {:.4}, group sizes {} / {}",
            shard.client_id,
            shard.dataset.len(),
            shard.weight,
            shard.dataset.group_count(0),
            shard.dataset.group_count(1)
        );
    }
    Ok(())
}
