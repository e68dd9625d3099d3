use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bound, ParamSet, Result, Tape, TensorError, Var};

/// Outcome of comparing backward gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `(parameter name, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Relative error with a small absolute floor so exact zeros compare cleanly.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Checks `samples` randomly chosen parameter coordinates of the scalar
/// `loss(params)` with central differences of step `h`.
pub fn check_params<F>(params: &ParamSet, samples: usize, h: f64, seed: u64, loss: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let total = params.numel();
    if total == 0 {
        return Err(TensorError::Contract("no parameters to check".into()));
    }
    let mut base = params.clone();
    base.zero_grad();
    let mut tape = Tape::new();
    let bound = base.bind(&mut tape, true);
    let out = loss(&mut tape, &bound)?;
    let grads = tape.backward(out)?;
    base.accumulate(&bound, &grads)?;

    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = ps.bind(&mut tape, false);
        let out = loss(&mut tape, &bound)?;
        Ok(tape.scalar(out))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let mut probe = base.clone();
    for _ in 0..samples {
        let mut flat = rng.random_range(0..total);
        let mut p = 0;
        while flat >= probe.tensors()[p].len() {
            flat -= probe.tensors()[p].len();
            p += 1;
        }
        let orig = probe.tensors()[p].values()[flat];
        probe.tensors_mut()[p].values_mut()[flat] = orig + h;
        let up = eval(&probe)?;
        probe.tensors_mut()[p].values_mut()[flat] = orig - h;
        let down = eval(&probe)?;
        probe.tensors_mut()[p].values_mut()[flat] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = base.tensors()[p].grad().map_or(0.0, |g| g[flat]);
        let err = rel_err(analytic, numeric);
        report.checked += 1;
        if err >= report.max_rel_err {
            report.max_rel_err = err;
            report.worst = Some((base.name(super::ParamId(p)).to_string(), flat, analytic, numeric));
        }
    }
    Ok(report)
}
