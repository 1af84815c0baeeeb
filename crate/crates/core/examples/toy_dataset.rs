//! Writes a small procedural dataset for trying the command-line tool.
//!
//! cargo run --example toy_dataset -- /tmp/toy 8 64

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "toy".into()));
    let count: usize = args.next().map_or(Ok(8), |s| s.parse())?;
    let size: usize = args.next().map_or(Ok(64), |s| s.parse())?;
    mccsod::synthetic::write_dataset(&root, "train", count, size, 1)?;
    mccsod::synthetic::write_dataset(&root, "test", count, size, 2)?;
    println!(
        "wrote {count} train and {count} test pairs under {}",
        root.display()
    );
    Ok(())
}
