//! Run the whole PE pipeline from the bundled configuration.
//!
//! Usage: cargo run --release --example full_pipeline [output-dir]

use vte_pipeline::metrics::render_table;
use vte_pipeline::pipeline::RunConfig;

fn main() -> vte_pipeline::Result<()> {
    let mut config = RunConfig::from_toml(include_str!("../data/pe_run.toml"))?;
    config.output_dir = Some(
        std::env::args()
            .nth(1)
            .map(Into::into)
            .unwrap_or_else(|| std::env::temp_dir().join("vte-pe-demo")),
    );
    for stage in vte_pipeline::pipeline::dry_run(&config)? {
        println!("stage {stage}");
    }
    let out = vte_pipeline::pipeline::run_pipeline(&config)?;
    let mut rows = vec![("DL".to_string(), out.dl_test)];
    rows.extend(out.rules_test.map(|r| ("Rules".to_string(), r)));
    rows.extend(out.hybrid_test.map(|h| ("DL + Rules".to_string(), h)));
    print!("{}", render_table(&rows));
    println!("manifest: {}", out.output_dir.join("manifest.json").display());
    Ok(())
}
