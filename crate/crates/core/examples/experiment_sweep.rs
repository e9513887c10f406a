// Configuration-driven experiment: a classical sweep over grid sizes.

use qrls::experiment::{parse_config_with, run_experiment};

fn main() -> qrls::Result<()> {
    let out = std::env::temp_dir().join(format!("qrls-example-{}", std::process::id()));
    let text = "\
# convergence versus l/κ for three grids
mode = sweep
sweep = classical
dim = 1
case = a
n = 16, 32, 64
eps = 1e-8
";
    let cfg = parse_config_with(text, &[("out".into(), out.display().to_string())])?;
    println!("config hash {}", cfg.hash());
    for file in run_experiment(&cfg)? {
        let text = std::fs::read_to_string(&file)?;
        println!("{} ({} lines)", file.display(), text.lines().count());
    }
    std::fs::remove_dir_all(&out)?;
    Ok(())
}
