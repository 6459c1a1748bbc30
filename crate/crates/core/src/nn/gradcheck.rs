//! Central finite-difference gradient checking.

use super::graph::{Graph, Var};
use super::tensor::{Gradients, ParamStore};
use crate::error::Result;

/// Outcome of a gradient check: the worst entry over all parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
}

/// Relative error with an absolute floor so entries that are zero on both
/// sides do not divide by zero.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compare backpropagated gradients of a scalar loss against central
/// differences with step `h` for every weight in `store`.
pub fn check_gradients<F>(store: &mut ParamStore, h: f64, floor: f64, loss: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut analytic = Gradients::zeros_like(store);
    {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l, &mut analytic);
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        Ok(g.scalar(l))
    };
    let mut report = GradCheck {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        entries: 0,
    };
    for id in store.ids().collect::<Vec<_>>() {
        if store.get(id).frozen {
            continue;
        }
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + h;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig - h;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.get(id)[i];
            let err = relative_error(a, numeric, floor);
            report.entries += 1;
            if err > report.max_rel_err || report.worst_param.is_empty() {
                report.max_rel_err = err.max(report.max_rel_err);
                report.worst_param = store.get(id).name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
