//! Finite-difference gradient verification.
//!
//! Compares analytic gradients against central differences of the loss,
//! perturbing every scalar parameter by `+/- h`. Meant for fragments small
//! enough to perturb exhaustively (a few thousand parameters).

use crate::error::Result;
use crate::layers::ParamStore;

/// Pass threshold on the relative error.
pub const GRADCHECK_TOL: f64 = 1e-5;
/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// `|a - n| / max(1, |a|, |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

#[derive(Debug, Clone)]
pub struct GradReportEntry {
    pub name: String,
    pub max_rel_err: f64,
}

/// Worst relative error per parameter tensor.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub entries: Vec<GradReportEntry>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max_rel_err() < GRADCHECK_TOL
    }
}

/// Run the check. `analytic` must populate the store's gradient
/// accumulators (zeroing first is handled here) and return the loss;
/// `loss` must evaluate the same scalar without touching gradients.
pub fn gradcheck(
    store: &mut ParamStore,
    mut analytic: impl FnMut(&mut ParamStore) -> Result<f64>,
    mut loss: impl FnMut(&ParamStore) -> Result<f64>,
    h: f64,
) -> Result<GradReport> {
    store.zero_grad();
    analytic(store)?;
    let grads: Vec<_> = store.ids().map(|id| store.grad(id).clone()).collect();

    let mut entries = Vec::with_capacity(store.len());
    for (idx, id) in store.ids().enumerate().collect::<Vec<_>>() {
        let mut worst = 0.0f64;
        for slot in 0..store.value(id).len() {
            let orig = store.value(id).data()[slot];
            store.value_mut(id).data_mut()[slot] = orig + h;
            let up = loss(store)?;
            store.value_mut(id).data_mut()[slot] = orig - h;
            let down = loss(store)?;
            store.value_mut(id).data_mut()[slot] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grads[idx].data()[slot], numeric));
        }
        entries.push(GradReportEntry {
            name: store.name(id).to_string(),
            max_rel_err: worst,
        });
    }
    Ok(GradReport { entries })
}
