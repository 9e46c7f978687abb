//! Central finite differences, evaluated independently of the tape's
//! backward pass.

use coderl::diffkit::{ParamId, ParameterStore, Tape, Tensor, Var};
use coderl::models::Model;

pub const EPS: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Fourth-order central stencil.
fn central(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x - 2.0 * EPS) - 8.0 * f(x - EPS) + 8.0 * f(x + EPS) - f(x + 2.0 * EPS)) / (12.0 * EPS)
}

/// Max relative error of the gradient of `loss` with respect to every
/// element of every input tensor.
pub fn check_inputs(inputs: &[Tensor], loss: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let build = |inputs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .map(|t| tape.leaf(t.clone().with_grad()).unwrap())
            .collect();
        let out = loss(&mut tape, &vars);
        (tape, vars, out)
    };
    let (mut tape, vars, out) = build(inputs);
    let grads = tape.backward(out).unwrap();
    let mut worst = 0.0f64;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads
            .wrt(*var)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; inputs[k].values.len()]);
        for (i, &a) in analytic.iter().enumerate() {
            let numeric = central(
                |x| {
                    let mut perturbed = inputs.to_vec();
                    perturbed[k].values[i] = x;
                    let (tape, _, out) = build(&perturbed);
                    tape.scalar(out)
                },
                inputs[k].values[i],
            );
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Max relative error of the gradient of `loss(model)` with respect to
/// every parameter scalar of `model`.
pub fn check_model(model: &mut Model, loss: impl Fn(&Model, &mut Tape) -> Var) -> f64 {
    let mut tape = Tape::new();
    let out = loss(model, &mut tape);
    let grads = tape.backward(out).unwrap();
    let ids: Vec<ParamId> = model.store.ids().collect();
    let mut worst = 0.0f64;
    for id in ids {
        let n = model.store.values(id).len();
        let analytic = grads.param(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        for (i, &a) in analytic.iter().enumerate() {
            let x0 = model.store.values(id)[i];
            let mut eval = |x: f64| {
                set(&mut model.store, id, i, x);
                let mut tape = Tape::new();
                let out = loss(model, &mut tape);
                tape.scalar(out)
            };
            let numeric = central(&mut eval, x0);
            set(&mut model.store, id, i, x0);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

fn set(store: &mut ParameterStore, id: ParamId, i: usize, x: f64) {
    store.values_mut(id)[i] = x;
}
