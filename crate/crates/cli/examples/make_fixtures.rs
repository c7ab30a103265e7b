//! Regenerates the synthetic fixtures under `data/`:
//! `cargo run -p forestmfg-cli --example make_fixtures`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use forestmfg_core::plot::fmt_g12;
use forestmfg_core::synthetic::{beta_sample, model_panel, SyntheticDesign};
use forestmfg_core::{BeliefPrior, ModelParams};

const SEED: u64 = 42;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let params = ModelParams::table5();
    let prior = BeliefPrior::table5();

    std::fs::write(dir.join("table5.json"), serde_json::to_string_pretty(&params)? + "\n")?;
    std::fs::write(dir.join("beta_table5.json"), serde_json::to_string_pretty(&prior)? + "\n")?;

    let mut w = BufWriter::new(File::create(dir.join("synthetic_beta.csv"))?);
    writeln!(w, "unit_id,atr_share")?;
    for (i, a) in beta_sample(&prior, 546, SEED)?.iter().enumerate() {
        writeln!(w, "U{i:04},{}", fmt_g12(*a))?;
    }
    w.flush()?;

    let panel = model_panel(&params, &prior, &SyntheticDesign::default(), SEED)?;
    panel.write_csv(BufWriter::new(File::create(dir.join("synthetic_panel.csv"))?))?;
    Ok(())
}
