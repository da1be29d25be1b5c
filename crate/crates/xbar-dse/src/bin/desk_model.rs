//! Regenerates the bundled desk dataset and trains the desk MLP.
//!
//! `xbar-desk-model [OUT_DIR] [--force]` (default: the crate's `assets/`).

use std::path::PathBuf;
use xbar_dse::desk::{self, DeskSpec, FitConfig};
use xbar_dse::formats::{assets_dir, save_dataset, save_model};

fn main() {
    let mut dir = assets_dir();
    let mut force = false;
    for a in std::env::args().skip(1) {
        match a.as_str() {
            "--force" => force = true,
            "-h" | "--help" => {
                println!("usage: xbar-desk-model [OUT_DIR] [--force]");
                return;
            }
            _ => dir = PathBuf::from(a),
        }
    }
    let bundle = desk::bundle(&DeskSpec::default(), &FitConfig::default());
    let run = || -> xbar_dse::Result<()> {
        save_dataset(&dir.join("desk_train.json"), &bundle.train, bundle.classes, force)?;
        save_dataset(&dir.join("desk_test.json"), &bundle.test, bundle.classes, force)?;
        save_model(&dir.join("desk_mlp.json"), &bundle.model, force)?;
        Ok(())
    };
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    println!(
        "train accuracy {:.4}, test accuracy {:.4}, written to {}",
        desk::accuracy(&bundle.model, &bundle.train),
        desk::accuracy(&bundle.model, &bundle.test),
        dir.display()
    );
}
