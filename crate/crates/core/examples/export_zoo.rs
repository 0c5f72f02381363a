//! Writes every shipped graph, plus the toy net, as JSON.
//!
//! cargo run --example export_zoo -- crates/core/graphs

use std::path::PathBuf;

use shadownet::netgraph::zoo;

fn main() -> shadownet::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "graphs".into()));
    std::fs::create_dir_all(&dir)?;
    let mut graphs = zoo::shipped()?;
    graphs.push(("toy".into(), zoo::toy()));
    for (stem, g) in graphs {
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, g.to_json())?;
        println!("{}", path.display());
    }
    Ok(())
}
