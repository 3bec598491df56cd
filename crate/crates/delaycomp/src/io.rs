//! File formats: run-spec / controller / certificate JSON documents and
//! trajectory CSV export.
//!
//! Matrices travel as row-major nested arrays. Floats are rendered by
//! serde_json's shortest-round-trip encoding (at most 17 significant
//! digits, reloads bit-exact); CSV uses fixed 17-significant-digit
//! scientific notation.

use crate::controller::{synth_controller, synth_controller_unchecked, DynamicController, PlantModel};
use crate::densela::{pole_place_siso, solve_care};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sim::{History, SimConfig, Trajectory};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSpec {
    /// Row-major n x n.
    pub a: Vec<Vec<f64>>,
    /// Length n.
    pub b: Vec<f64>,
    /// Length n.
    pub c: Vec<f64>,
    pub delay: f64,
}

/// Exactly one gain-design mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GainSpec {
    Explicit { k: Vec<f64> },
    Poles { poles: Vec<(f64, f64)> },
    Lqr { q: Vec<Vec<f64>>, r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub dt: f64,
    pub t_end: f64,
    /// Piecewise-constant reference as (time, value) pairs.
    #[serde(default)]
    pub reference: Vec<(f64, f64)>,
    /// Length n; defaults to zero.
    #[serde(default)]
    pub x0: Vec<f64>,
    /// Constant initial input history; defaults to zero.
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub ud0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub plant: PlantSpec,
    pub gain: GainSpec,
    pub n_basis: usize,
    pub l_max: usize,
    pub sim: SimSpec,
    /// Permit gains that leave A + BK unstable (test fixtures).
    #[serde(default)]
    pub allow_unstable_gain: bool,
}

impl RunSpec {
    pub fn from_file(path: &Path) -> Result<RunSpec> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<RunSpec> {
        let spec: RunSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.plant.a.len();
        if n == 0 || self.plant.a.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("plant.a must be square and nonempty".into()));
        }
        if self.plant.b.len() != n || self.plant.c.len() != n {
            return Err(Error::Parse(format!(
                "plant.b and plant.c must have {n} entries"
            )));
        }
        match &self.gain {
            GainSpec::Explicit { k } if k.len() != n => {
                return Err(Error::Parse(format!("gain.k must have {n} entries")))
            }
            GainSpec::Poles { poles } if poles.len() != n => {
                return Err(Error::Parse(format!("gain.poles must have {n} entries")))
            }
            GainSpec::Lqr { q, .. } if q.len() != n || q.iter().any(|r| r.len() != n) => {
                return Err(Error::Parse(format!("gain.q must be {n}x{n}")))
            }
            _ => {}
        }
        if !self.sim.x0.is_empty() && self.sim.x0.len() != n {
            return Err(Error::Parse(format!("sim.x0 must have {n} entries")));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<PlantModel> {
        PlantModel::new(
            Matrix::from_rows(&self.plant.a),
            Matrix::column(&self.plant.b),
            Matrix::row(&self.plant.c),
            self.plant.delay,
        )
    }

    pub fn design_gain(&self, plant: &PlantModel) -> Result<Matrix> {
        match &self.gain {
            GainSpec::Explicit { k } => Ok(Matrix::row(k)),
            GainSpec::Poles { poles } => pole_place_siso(&plant.a, &plant.b, poles),
            GainSpec::Lqr { q, r } => {
                let (_, k) = solve_care(
                    &plant.a,
                    &plant.b,
                    &Matrix::from_rows(q),
                    &Matrix::scalar(*r),
                )?;
                Ok(k)
            }
        }
    }

    /// Plant, gain, and controller for the given order (default: spec order).
    pub fn synthesize(&self, n_override: Option<usize>) -> Result<(PlantModel, Matrix, DynamicController)> {
        let plant = self.plant()?;
        let k = self.design_gain(&plant)?;
        let n = n_override.unwrap_or(self.n_basis);
        let ctrl = if self.allow_unstable_gain {
            synth_controller_unchecked(&plant, &k, n)?
        } else {
            synth_controller(&plant, &k, n)?
        };
        Ok((plant, k, ctrl))
    }

    pub fn sim_config(&self, dt_override: Option<f64>) -> Result<SimConfig> {
        let n = self.plant.a.len();
        let x0 = if self.sim.x0.is_empty() {
            Matrix::zeros(n, 1)
        } else {
            Matrix::column(&self.sim.x0)
        };
        let mut cfg = SimConfig::new(dt_override.unwrap_or(self.sim.dt), self.sim.t_end, x0)?;
        cfg.reference = self.sim.reference.clone();
        cfg.u0 = if self.sim.u0 == 0.0 {
            History::Zero
        } else {
            History::Constant(self.sim.u0)
        };
        cfg.ud0 = self.sim.ud0.clone();
        Ok(cfg)
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// CSV export: `t,y,y_ideal,U,X_1..X_n,ud_1..ud_N,V`, one row per sample,
/// 17 significant digits. `y_ideal` and `V` are zero when not supplied.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    ideal: Option<&Trajectory>,
    v: Option<&[f64]>,
) -> Result<()> {
    if let Some(id) = ideal {
        if id.times.len() < traj.times.len() {
            return Err(Error::Comparison(
                "ideal trajectory is shorter than the simulated one".into(),
            ));
        }
    }
    if let Some(vs) = v {
        if vs.len() != traj.times.len() {
            return Err(Error::Comparison(
                "Lyapunov trace length differs from the trajectory".into(),
            ));
        }
    }
    let n = traj.x.first().map(|r| r.len()).unwrap_or(0);
    let nb = traj.ud.first().map(|r| r.len()).unwrap_or(0);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "t,y,y_ideal,U")?;
    for i in 1..=n {
        write!(out, ",X_{i}")?;
    }
    for i in 1..=nb {
        write!(out, ",ud_{i}")?;
    }
    writeln!(out, ",V")?;
    for k in 0..traj.times.len() {
        let y_ideal = ideal.map(|id| id.y[k]).unwrap_or(0.0);
        let vk = v.map(|vs| vs[k]).unwrap_or(0.0);
        write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            traj.times[k], traj.y[k], y_ideal, traj.u[k]
        )?;
        for x in &traj.x[k] {
            write!(out, ",{x:.16e}")?;
        }
        for u in &traj.ud[k] {
            write!(out, ",{u:.16e}")?;
        }
        writeln!(out, ",{vk:.16e}")?;
    }
    out.flush()?;
    Ok(())
}
