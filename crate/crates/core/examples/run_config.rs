//! Runs the JSON configurations shipped in `data/` through the harness and
//! summarises each report. Pass a config path to run just that one.

use std::path::{Path, PathBuf};

use stratsmooth::harness::{self, RunConfig};

fn main() -> stratsmooth::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let configs: Vec<PathBuf> = match std::env::args().nth(1) {
        Some(p) => vec![PathBuf::from(p)],
        None => ["xaxis_coordinate", "aplus2_frobsq", "aplus2_flat", "simplex2d_smooth", "counterexample_flatness"]
            .iter()
            .map(|n| data.join(format!("{n}.json")))
            .collect(),
    };
    let out_root = std::env::temp_dir().join("stratsmooth-runs");
    for path in configs {
        let cfg = RunConfig::load(&path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let out = harness::run(&cfg, Some(&out_root.join(name)))?;
        let r = &out.report;
        println!("{name}: {} (exit {})", r.status, r.exit_code());
        if let Some(m) = &r.metrics {
            println!("  max |f − g|/ε {:.4}, sampled lip {:.3} (bound {:.3e})", m.closeness.max_ratio, m.lipschitz.sampled, m.lipschitz.theorem_bound);
            if let Some(o) = &m.observable {
                println!("  observable oscillation {:e}, probe growth {:.3}", o.oscillation, o.growth_ratio);
            }
        }
        if let Some(s) = &r.smoothing {
            println!("  pre-smoothing {}", s.pre_smoothing);
        }
        for f in &r.failures {
            println!("  {f}");
        }
        println!("  report {}", out.report_path.display());
    }
    Ok(())
}
