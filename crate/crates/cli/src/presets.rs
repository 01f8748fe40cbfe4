use anyhow::bail;

use crate::config::{DistillArg, ProtocolArg, SweepConfig};
use crate::sweep::{run_sweep, ResultRecord};

pub const PRESET_NAMES: [&str; 6] = ["fig2", "fig2a", "fig2b", "fig4", "fig5", "fig6"];

fn range(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + step * i as f64).collect()
}

/// Sweeps making up a named figure preset; their tables are concatenated.
pub fn preset(name: &str) -> anyhow::Result<Vec<SweepConfig>> {
    use DistillArg::*;
    use ProtocolArg::*;
    let r_fine = range(1.0, 15.0, 1.0);
    let r_coarse = range(1.0, 15.0, 2.0);
    let sweeps = match name {
        // fidelity surfaces, H-BSM against CV-BSM with optimized gain
        "fig2" | "fig2a" => vec![
            SweepConfig::new(HbsmTwoState, None, r_fine.clone(), range(0.0, 10.0, 0.5)),
            SweepConfig::new(CvBsm, None, r_fine, range(0.0, 10.0, 0.5)),
        ],
        // success probability against loss, one curve per squeezing
        "fig2b" => vec![SweepConfig::new(
            HbsmTwoState,
            None,
            r_coarse,
            range(0.0, 20.0, 1.0),
        )],
        "fig4" => [None, Qs, Pc]
            .into_iter()
            .map(|d| SweepConfig::new(HbsmFourState, d, r_fine.clone(), range(0.0, 20.0, 1.0)))
            .collect(),
        "fig5" => [None, Qs]
            .into_iter()
            .map(|d| {
                SweepConfig::new(HbsmTwoState, d, r_coarse.clone(), range(0.0, 20.0, 2.0))
                    .with_eta(vec![0.2, 0.4, 0.6, 0.8, 1.0])
            })
            .collect(),
        "fig6" => [None, Qs, Pc]
            .into_iter()
            .map(|d| SweepConfig::new(CvBsm, d, r_coarse.clone(), range(0.0, 20.0, 2.0)))
            .collect(),
        _ => bail!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")),
    };
    Ok(sweeps)
}

/// Runs every sweep of a preset after validating all of them.
pub fn run_preset(sweeps: &[SweepConfig]) -> anyhow::Result<Vec<ResultRecord>> {
    for s in sweeps {
        s.validate()?;
    }
    let mut rows = Vec::new();
    for s in sweeps {
        rows.extend(run_sweep(s)?);
    }
    Ok(rows)
}
