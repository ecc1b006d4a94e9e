use super::ParamVec;
use crate::error::{Error, Result};

/// One SGD step. With `momentum > 0` this is the classical heavy-ball form
/// `v ← μv + g, x ← x − ηv`; the velocity starts at zero when `state` is
/// `None`.
pub fn sgd_step(
    params: &ParamVec,
    grad: &ParamVec,
    lr: f64,
    state: Option<&ParamVec>,
    momentum: f64,
) -> Result<(ParamVec, Option<ParamVec>)> {
    check_hyper(lr, momentum)?;
    grad.check_dim(params.dim())?;
    let mut x = params.clone();
    if momentum == 0.0 {
        x.axpy(-lr, grad);
        return Ok((x, None));
    }
    let mut v = match state {
        Some(s) => {
            s.check_dim(params.dim())?;
            s.clone()
        }
        None => ParamVec::zeros(params.dim()),
    };
    apply_momentum(&mut x, &mut v, grad, lr, momentum);
    Ok((x, Some(v)))
}

pub(crate) fn check_hyper(lr: f64, momentum: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::config(format!("momentum must lie in [0, 1), got {momentum}")));
    }
    Ok(())
}

/// In-place step used by the engine.
#[inline]
pub(crate) fn apply_momentum(x: &mut ParamVec, v: &mut ParamVec, grad: &ParamVec, lr: f64, momentum: f64) {
    if momentum == 0.0 {
        x.axpy(-lr, grad);
        return;
    }
    for ((xi, vi), gi) in x.iter_mut().zip(v.iter_mut()).zip(grad.iter()) {
        *vi = momentum * *vi + gi;
        *xi -= lr * *vi;
    }
}
