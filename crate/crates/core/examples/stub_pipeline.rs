//! Run the full offline pipeline into a directory and print stage summaries.
//!
//!     cargo run --release --example stub_pipeline -- [out_dir] [num_prompts]

use std::path::PathBuf;

use mathcurate::cli::{pipeline, Context, PipelineOptions};
use mathcurate::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "pipeline_out".into()));
    let num_prompts = args.next().map(|n| n.parse()).transpose()?.unwrap_or(1000);
    let ctx = Context::new(PipelineConfig::default());
    let summaries = pipeline(&ctx, &dir, &PipelineOptions { num_prompts, ..PipelineOptions::default() })?;
    for s in &summaries {
        println!("{s}");
    }
    println!("\n{}", std::fs::read_to_string(dir.join("16_report.txt"))?);
    Ok(())
}
