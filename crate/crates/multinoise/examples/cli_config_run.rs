//! Driving a full experiment through the config harness, as the CLI does.
//!
//! Writes a TOML config, runs the MAP experiment with the library-level
//! entry point that backs `multinoise map --config …`, and reads back the
//! manifest and result. Identical (config, seed) pairs reproduce outputs
//! byte for byte.
//!
//! Run with: cargo run --example cli_config_run

use multinoise::harness::{run, RunRequest};

const CONFIG: &str = r#"
seed = 7

[prior]
n = 3
tau = 1.0
s = 1.5

[forward]
kind = "exp-affine"
j = 4
matrix_seed = 2
matrix_scale = 0.4
eps = 0.1

[noise]
kind = "mixed-gaussian"
gamma_a = { scalar = 0.05 }
gamma_m = { scalar = 0.1 }

[data]
source = "synthesize"
truth = [0.6, -0.3, 0.2]

[experiment]
kind = "map"
n_starts = 6
"#;

fn main() -> multinoise::Result<()> {
    let dir = std::env::temp_dir().join("multinoise-example");
    std::fs::create_dir_all(&dir)?;
    let config_path = dir.join("map.toml");
    std::fs::write(&config_path, CONFIG)?;

    let outcome = run(&RunRequest {
        config_path: config_path.clone(),
        seed_override: None,
        out_override: Some(dir.join("out")),
        expected_kind: Some("map".into()),
    })?;

    println!("status      : {}", outcome.manifest.status);
    println!("seed        : {}", outcome.manifest.seed);
    println!("config hash : {}…", &outcome.manifest.config_hash[..16]);
    println!("outputs     : {:?}", outcome.manifest.outputs);

    let result = std::fs::read_to_string(outcome.output_dir.join("map_result.json"))?;
    println!("\nmap_result.json:\n{result}");
    Ok(())
}
