//! Declarative experiments: parse a JSON spec, run it and write the data
//! table, summary and manifest that the `replay` subcommand re-checks.
//!
//! cargo run --release --example experiment_spec [-- out_dir]

use zeno_ksat::cli::{write_experiment, ExperimentSpec};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/examples".into());
    std::fs::create_dir_all(&dir).unwrap();
    let spec: ExperimentSpec = serde_json::from_str(
        r#"{"kind":"tts-vs-Tf","name":"tts_vs_tf_demo","seed":11,"ns":[3,4,5],"t_fs":[0.5,2,8],
            "alpha":4.26,"instances":8,"modes":["average"],"dt":0.1}"#,
    )
    .unwrap();
    let manifest = write_experiment(&spec, std::path::Path::new(&dir)).unwrap();
    println!("{}", serde_json::to_string_pretty(&manifest).unwrap());
}
