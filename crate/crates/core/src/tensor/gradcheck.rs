use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `|analytic − numeric| / max(1, |numeric|)`
pub fn relative_error<S: Scalar>(analytic: S, numeric: S) -> S {
    (analytic - numeric).abs() / numeric.abs().max(S::one())
}

/// Compares the taped gradient of scalar `f` at `x` with central differences.
///
/// Returns the maximum [`relative_error`] over all coordinates of `x`.
pub fn finite_difference_check<S, F>(f: F, x: &Tensor<S>, step: S) -> Result<S>
where
    S: Scalar,
    F: for<'t> Fn(&'t Tape<S>, Var<'t, S>) -> Result<Var<'t, S>>,
{
    let eval = |point: &Tensor<S>| -> Result<S> {
        let tape = Tape::new();
        let out = f(&tape, tape.constant(point.clone()))?;
        let v = out.value();
        if v.len() != 1 {
            return Err(Error::Contract(format!(
                "finite-difference target must be scalar, got {:?}",
                v.shape()
            )));
        }
        Ok(v.data()[0])
    };

    let tape = Tape::new();
    let leaf = tape.leaf(&x.clone().with_grad(true));
    let out = f(&tape, leaf)?;
    let grads = tape.backward(out)?;
    let analytic = grads.wrt(&leaf).expect("leaf requires grad").to_vec();

    let two = S::cast(2.0);
    let mut worst = S::zero();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - step;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (two * step);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}
