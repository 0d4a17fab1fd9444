//! Drives the command-line runner in-process: writes a small run
//! configuration, then generates data, trains, evaluates and checks the
//! oracle, printing the resulting metrics file.

use serde_json::json;
use spatial_refer::cli;

fn main() -> std::io::Result<()> {
    let root = std::env::temp_dir().join("spatial-refer-cli-demo");
    std::fs::create_dir_all(&root)?;
    let config = json!({
        "paths": {
            "data_dir": root.join("data"),
            "checkpoint": root.join("model.ckpt"),
            "output_dir": root.join("out"),
        },
        "seeds": {"data": 1, "perception": 2, "init": 3, "order": 4, "eval": 5},
        "corpus": {"scenes": 10, "utterances_per_scene": 10},
        "model": {"d_model": 24, "n_layers": 1, "n_heads": 2, "ff_dim": 48},
        "train": {"total_steps": 40, "batch_size": 8},
    });
    let path = root.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config)?)?;
    for command in ["gen-data", "train", "eval", "oracle-check"] {
        let code = cli::run(["spatial-refer", command, "--config", path.to_str().expect("utf-8 path")]);
        println!("{command}: exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("{}", std::fs::read_to_string(root.join("out/metrics.json"))?);
    Ok(())
}
