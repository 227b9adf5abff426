use super::{Model, NeuralError, OutputMatrix};

pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between the analytic parameter gradient of
/// `loss(forward(x))` and central finite differences.
///
/// `loss` returns the scalar loss and its gradient with respect to the output
/// matrix. The relative error of each parameter uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check(
    model: &Model,
    x: &[f64],
    loss: &dyn Fn(&OutputMatrix) -> (f64, OutputMatrix),
) -> Result<f64, NeuralError> {
    let (_, upstream) = loss(&model.forward(x)?);
    let mut analytic = vec![0.0; model.param_count()];
    model.backward_into(x, &upstream, &mut analytic)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + FD_STEP;
        let plus = loss(&probe.forward(x)?).0;
        probe.params[i] = orig - FD_STEP;
        let minus = loss(&probe.forward(x)?).0;
        probe.params[i] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
