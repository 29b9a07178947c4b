//! Evaluation protocols with independent rounds spread over a rayon pool.
//!
//! Rounds derive everything from their own seed and results are reduced
//! in round order, so reports do not depend on the number of workers.

use mu2x_core::eval::robust::{self, RobustConfig, RobustReport};
use mu2x_core::eval::trust::{self, TrustConfig, TrustReport, TrustSubject};
use mu2x_core::{Experiment, GraphExplanation, TrainedExperiment};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::Error;

/// A pool of `jobs` workers; `None` or `0` means available parallelism.
pub fn pool(jobs: Option<usize>) -> Result<ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("--jobs: {e}")))
}

pub fn explain_rows(pool: &ThreadPool, t: &TrainedExperiment<'_, '_>, rows: &[usize]) -> Result<Vec<GraphExplanation>, Error> {
    let ctx = t.explain_context()?;
    let cfg = t.explain_config();
    pool.install(|| {
        rows.par_iter()
            .map(|&r| ctx.explain_row(r, cfg).map_err(|e| Error::Core(e.into())))
            .collect()
    })
}

pub fn trust<S: TrustSubject + Sync + ?Sized>(pool: &ThreadPool, subject: &S, cfg: &TrustConfig) -> Result<TrustReport, Error> {
    cfg.validate()?;
    pool.install(|| {
        let prepared = (0..subject.n_targets())
            .into_par_iter()
            .map(|t| trust::prepare_target(subject, t, cfg.lambda))
            .collect::<Result<Vec<_>, _>>()?;
        let rounds = (0..cfg.rounds)
            .into_par_iter()
            .map(|r| trust::run_round(subject, &prepared, cfg, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(trust::aggregate(cfg, prepared.len(), rounds))
    })
}

/// Every `(p, round)` pair retrains independently.
pub fn robust(pool: &ThreadPool, e: &Experiment<'_>, cfg: &RobustConfig) -> Result<RobustReport, Error> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg.p_list.iter().flat_map(|&p| (0..cfg.rounds).map(move |r| (p, r))).collect();
    let rounds = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, r)| e.robust_round(cfg, r, p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(robust::aggregate(cfg, rounds))
}
