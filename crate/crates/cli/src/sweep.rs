use hybrid_teleport::protocols::{
    average_fidelity, classical_limit, optimize_config, Distillation, NormConvention, ProtocolConfig,
};
use hybrid_teleport::resource::TmsvParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;

/// One grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub r_db: f64,
    pub loss_db: f64,
    pub loss2_db: Option<f64>,
    pub eta: f64,
}

/// One output row. Columns that do not apply are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub protocol: String,
    pub distill: String,
    pub r_db: f64,
    pub loss_db: f64,
    pub loss2_db: Option<f64>,
    pub eta: f64,
    pub norm_convention: String,
    pub optimized: bool,
    pub g: Option<f64>,
    pub ts: Option<f64>,
    pub tc: Option<f64>,
    pub f_bar: Option<f64>,
    pub f_bar_ratio: Option<f64>,
    pub f_bar_per_point: Option<f64>,
    pub p_total_avg: Option<f64>,
    pub p_bsm_avg: Option<f64>,
    pub p_operation: Option<f64>,
    pub classical_limit: f64,
    pub beats_classical: Option<bool>,
    pub resource_dim: Option<usize>,
    pub truncation_mass: Option<f64>,
    pub quadrature_error: Option<f64>,
    pub error: Option<String>,
}

/// Grid points in lexicographic order (r, loss, loss2, η).
pub fn grid_points(cfg: &SweepConfig) -> Vec<GridPoint> {
    let loss2: Vec<Option<f64>> = match &cfg.loss2_db {
        Some(g) => g.0.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut out = Vec::with_capacity(cfg.num_points());
    for &r_db in &cfg.r_db.0 {
        for &loss_db in &cfg.loss_db.0 {
            for &loss2_db in &loss2 {
                for &eta in &cfg.eta.0 {
                    out.push(GridPoint {
                        r_db,
                        loss_db,
                        loss2_db,
                        eta,
                    });
                }
            }
        }
    }
    out
}

fn build_config(cfg: &SweepConfig, pt: &GridPoint) -> hybrid_teleport::Result<ProtocolConfig> {
    let tmsv = TmsvParams::from_db_asymmetric(pt.r_db, pt.loss_db, pt.loss2_db.unwrap_or(pt.loss_db))?
        .with_mass(cfg.truncation_mass)?;
    Ok(ProtocolConfig::new(cfg.protocol.into(), tmsv)
        .with_distillation(cfg.distillation())
        .with_gain(cfg.g)
        .with_eta(pt.eta))
}

/// Evaluates one grid point; failures are reported in the `error` column.
pub fn run_point(cfg: &SweepConfig, pt: &GridPoint) -> ResultRecord {
    let conv: NormConvention = cfg.norm_convention.into();
    let mut rec = ResultRecord {
        protocol: hybrid_teleport::protocols::Protocol::from(cfg.protocol)
            .name()
            .to_string(),
        distill: cfg.distillation().name().to_string(),
        r_db: pt.r_db,
        loss_db: pt.loss_db,
        loss2_db: pt.loss2_db,
        eta: pt.eta,
        norm_convention: cfg.norm_convention.name().to_string(),
        optimized: cfg.optimize,
        g: None,
        ts: None,
        tc: None,
        f_bar: None,
        f_bar_ratio: None,
        f_bar_per_point: None,
        p_total_avg: None,
        p_bsm_avg: None,
        p_operation: None,
        classical_limit: classical_limit(pt.eta),
        beats_classical: None,
        resource_dim: None,
        truncation_mass: None,
        quadrature_error: None,
        error: None,
    };
    let outcome = build_config(cfg, pt).and_then(|pc| {
        if cfg.optimize {
            optimize_config(&pc, conv).map(|o| (o.config, o.result))
        } else {
            average_fidelity(&pc).map(|r| (pc, r))
        }
    });
    match outcome {
        Ok((pc, res)) => {
            if pc.protocol == hybrid_teleport::protocols::Protocol::CvBsm {
                rec.g = Some(pc.g);
            }
            match pc.distillation {
                Distillation::None => {}
                Distillation::Qs { ts } => rec.ts = Some(ts),
                Distillation::Pc { tc } => rec.tc = Some(tc),
            }
            let f = res.f_bar_with(conv);
            rec.f_bar = Some(f);
            rec.f_bar_ratio = Some(res.f_bar_ratio);
            rec.f_bar_per_point = Some(res.f_bar_per_point);
            rec.p_total_avg = Some(res.p_total_avg);
            rec.p_bsm_avg = Some(res.p_bsm_avg);
            rec.p_operation = Some(res.p_operation);
            rec.beats_classical = Some(f > rec.classical_limit);
            if res.resource_dim > 0 {
                rec.resource_dim = Some(res.resource_dim);
            }
            rec.truncation_mass = Some(res.truncation_mass);
            rec.quadrature_error = Some(res.quadrature_error);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Validates `cfg`, then evaluates every grid point. Row order is the grid
/// order whatever the thread count.
pub fn run_sweep(cfg: &SweepConfig) -> anyhow::Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let points = grid_points(cfg);
    Ok(points.par_iter().map(|pt| run_point(cfg, pt)).collect())
}
