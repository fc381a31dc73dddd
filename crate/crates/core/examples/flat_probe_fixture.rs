//! Writes tests/fixtures/flat_probes.json from the contour-integral reference.

use edgewave::flatlab::{probe_table, FLAT_PROBES};

fn main() -> edgewave::Result<()> {
    let table = probe_table(2.0, 1.0, [0.0, 2.5], &FLAT_PROBES)?;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/flat_probes.json");
    std::fs::write(path, serde_json::to_string_pretty(&table)? + "\n")?;
    println!("wrote {path}");
    Ok(())
}
