//! Parses a small explicit-feedback CSV, binarizes it at a rating
//! threshold, and applies fixed-point degree filtering. The filter loops
//! until every remaining user and item keeps the minimum degree, so
//! dropping one side can re-expose the other.

use temporec::corpus::{
    build_catalog_and_matrix, parse_interactions, preprocess, ColumnSpec, ParseMode,
    PreprocessOpts, RatingScale,
};

const RAW: &str = "\
user_id,item_id,rating,timestamp
alice,matrix,5.0,100
alice,blade,4.0,120
alice,heat,2.0,130
alice,alien,4.5,140
bob,matrix,4.0,110
bob,blade,3.0,150
bob,alien,5.0,160
cara,matrix,4.5,105
cara,heat,1.0,115
cara,alien,4.0,125
dan,solo,5.0,200
dan,matrix,1.5,210
";

fn main() -> temporec::Result<()> {
    let path = std::env::temp_dir().join("temporec_example_ratings.csv");
    std::fs::write(&path, RAW).expect("temp file writes");

    let schema = ColumnSpec::default();
    let scale = Some(RatingScale { min: 0.5, max: 5.0 });
    let (log, stats) = parse_interactions(&path, &schema, ParseMode::Strict, scale)?;
    println!(
        "parsed {} rows: {} loaded, {} skipped",
        stats.rows_read, stats.loaded, stats.skipped
    );

    let opts = PreprocessOpts {
        binarize_threshold: Some(3.5),
        min_user_deg: 2,
        min_item_deg: 2,
        window: None,
    };
    let clean = preprocess(&log, &opts)?;
    println!(
        "after binarize >= 3.5 and 2-core: {} of {} interactions",
        clean.len(),
        log.len()
    );
    for r in clean.records() {
        println!("  {} -> {} at t={}", r.user, r.item, r.timestamp);
    }

    let (catalog, matrix, users) = build_catalog_and_matrix(&clean)?;
    println!(
        "\nmatrix: {} users x {} items, {} nonzeros",
        matrix.rows(),
        matrix.cols(),
        matrix.nnz()
    );
    for u in 0..users.len() {
        let items: Vec<&str> = matrix.row(u).iter().map(|&i| catalog.id(i)).collect();
        println!("  {}: {}", users.id(u), items.join(", "));
    }
    println!(
        "item arrival span: [{}, {}]",
        catalog.t_min(),
        catalog.t_max()
    );

    std::fs::remove_file(&path).ok();
    Ok(())
}
