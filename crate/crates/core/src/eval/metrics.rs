use super::{EvalError, Result};

pub type Point = [f64; 2];

/// How per-trajectory final errors are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdeForm {
    /// Root of the mean squared final error.
    #[default]
    Rms,
    /// Mean of the absolute final error.
    MeanAbs,
}

fn sq_dist(a: Point, b: Point) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn check_pair(pred: &[Point], truth: &[Point]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(EvalError::Contract(format!(
            "prediction has {} points, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(EvalError::Contract("empty trajectory".into()));
    }
    Ok(())
}

/// Root mean squared point distance between two equal-length trajectories.
pub fn rmse_trajectory(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_pair(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(&p, &t)| sq_dist(p, t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// L2 norm of the flattened error, the min-of-k selection key.
pub fn l2_error(pred: &[Point], truth: &[Point]) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(&p, &t)| sq_dist(p, t)).sum::<f64>().sqrt())
}

/// Mean of per-trajectory RMSE.
pub fn ade(pairs: &[(&[Point], &[Point])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(EvalError::Contract("ADE of an empty dataset".into()));
    }
    let mut sum = 0.0;
    for (p, t) in pairs {
        sum += rmse_trajectory(p, t)?;
    }
    Ok(sum / pairs.len() as f64)
}

pub fn fde(pairs: &[(&[Point], &[Point])]) -> Result<f64> {
    fde_with(pairs, FdeForm::Rms)
}

pub fn fde_with(pairs: &[(&[Point], &[Point])], form: FdeForm) -> Result<f64> {
    if pairs.is_empty() {
        return Err(EvalError::Contract("FDE of an empty dataset".into()));
    }
    let mut sum = 0.0;
    for (p, t) in pairs {
        check_pair(p, t)?;
        let d = sq_dist(p[p.len() - 1], t[t.len() - 1]);
        sum += match form {
            FdeForm::Rms => d,
            FdeForm::MeanAbs => d.sqrt(),
        };
    }
    let mean = sum / pairs.len() as f64;
    Ok(match form {
        FdeForm::Rms => mean.sqrt(),
        FdeForm::MeanAbs => mean,
    })
}

/// Extrapolates the last observed velocity over `t_pred` steps.
pub fn constant_velocity(observed: &[Point], t_pred: usize) -> Result<Vec<Point>> {
    if observed.len() < 2 {
        return Err(EvalError::Contract(format!(
            "constant velocity needs two observed points, got {}",
            observed.len()
        )));
    }
    let last = observed[observed.len() - 1];
    let prev = observed[observed.len() - 2];
    let v = [last[0] - prev[0], last[1] - prev[1]];
    Ok((1..=t_pred)
        .map(|s| [last[0] + v[0] * s as f64, last[1] + v[1] * s as f64])
        .collect())
}
