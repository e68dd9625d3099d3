use std::io::Write;

use serde::{Deserialize, Serialize};

/// One optimizer iteration. Discriminator fields are empty in noGAN mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub d_loss: Option<f64>,
    pub g_adv: Option<f64>,
    pub variety: f64,
    pub grad_norm_g: f64,
    pub grad_norm_d: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub val_ade: Option<f64>,
    pub val_fde: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainLog {
    pub fn write_steps_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "step,epoch,d_loss,g_adv,variety,grad_norm_g,grad_norm_d,seconds")?;
        for r in &self.steps {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.epoch,
                opt(r.d_loss),
                opt(r.g_adv),
                r.variety,
                r.grad_norm_g,
                opt(r.grad_norm_d),
                r.seconds
            )?;
        }
        Ok(())
    }

    pub fn write_epochs_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "epoch,steps,val_ade,val_fde,seconds")?;
        for r in &self.epochs {
            writeln!(out, "{},{},{},{},{}", r.epoch, r.steps, opt(r.val_ade), opt(r.val_fde), r.seconds)?;
        }
        Ok(())
    }

    /// Equality of everything except wall-clock fields.
    pub fn same_losses(&self, other: &TrainLog) -> bool {
        let strip = |l: &TrainLog| {
            let mut l = l.clone();
            l.steps.iter_mut().for_each(|r| r.seconds = 0.0);
            l.epochs.iter_mut().for_each(|r| r.seconds = 0.0);
            l
        };
        strip(self) == strip(other)
    }

    pub fn mean_step_seconds(&self) -> Option<f64> {
        (!self.steps.is_empty()).then(|| self.steps.iter().map(|r| r.seconds).sum::<f64>() / self.steps.len() as f64)
    }
}
