//! Convergence rate and order reports for the fit methods.
//!
//! Both fits run on the same observations and starting guess; their error
//! sequences are measured against the model's generating parameters when
//! those are known (for noiseless data they are the least-squares optimum)
//! and against the final iterate otherwise. Errors within four orders of
//! magnitude of the step tolerance belong to the terminal snap onto the
//! optimum rather than the asymptotic regime and are excluded.

use crate::config::RateOrderConfig;
use nonlin::minimize::{corrected_gauss_newton, gauss_newton, generate_observations, FitTrace};
use nonlin::numkit::RngSeed;
use nonlin::problems::ModelEntry;
use nonlin::rootfind::{
    error_sequence, estimate_rate_order, SolveStatus, Tolerances,
};

#[derive(Debug, Clone)]
pub struct MethodRates {
    pub status: SolveStatus,
    pub iterations: usize,
    pub order_q: Vec<f64>,
    pub rate_mu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RateOrderReport {
    pub gn: MethodRates,
    pub cgn: MethodRates,
}

pub fn report_tolerances() -> Tolerances {
    Tolerances::new(1e-6, 1e-6, 100)
}

fn rates_from(trace: &FitTrace, reference: Option<&[f64]>, tol: &Tolerances) -> MethodRates {
    let reference: Vec<f64> = match reference {
        Some(r) => r.to_vec(),
        None => trace.final_params().to_vec(),
    };
    let mut errors = error_sequence(&trace.iterates, &reference);
    let floor = 1e4 * tol.rel_step;
    if let Some(cut) = errors.iter().position(|&e| e < floor) {
        errors.truncate(cut);
    }
    let (order_q, rate_mu) = match estimate_rate_order(&errors) {
        Ok(est) => (est.order_q, est.rate_mu),
        Err(_) => (Vec::new(), Vec::new()),
    };
    MethodRates {
        status: trace.status,
        iterations: trace.iterations(),
        order_q,
        rate_mu,
    }
}

pub fn rate_order_report(entry: &ModelEntry, cfg: &RateOrderConfig, seed: u64) -> RateOrderReport {
    let model = entry.model.as_ref();
    let obs = generate_observations(
        model,
        &entry.sampling_range,
        cfg.observations,
        cfg.snr_db,
        RngSeed(seed),
    );
    let tol = report_tolerances();
    let gn_trace = gauss_newton(model, &obs, &cfg.theta0, &tol);
    let cgn_trace = corrected_gauss_newton(model, &obs, &cfg.theta0, &tol);
    // With noise in the data the generating parameters are no longer the
    // least-squares optimum, so the sequence limit takes over as reference.
    let reference = if cfg.snr_db.is_none() {
        model.true_params()
    } else {
        None
    };
    RateOrderReport {
        gn: rates_from(&gn_trace, reference.as_deref(), &tol),
        cgn: rates_from(&cgn_trace, reference.as_deref(), &tol),
    }
}
