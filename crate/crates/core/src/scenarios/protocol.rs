use serde::{Deserialize, Serialize};

/// Time history of a load, prescribed velocity, or prescribed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadProtocol {
    /// `amplitude` for `t > 0`, zero at `t <= 0`.
    InstantaneousStep { amplitude: f64 },
    /// `amplitude (1 - cos(omega t))`.
    HarmonicRaisedCosine { amplitude: f64, angular_frequency: f64 },
    /// `amplitude sin(omega t)` for `t <= cutoff`, zero afterwards.
    SineSpike {
        amplitude: f64,
        angular_frequency: f64,
        cutoff: f64,
    },
    /// Rate rising linearly from zero to `rate` over `ramp_time`, then held.
    VelocityRamp { rate: f64, ramp_time: f64 },
    /// Piecewise-linear table, held constant outside its range.
    CustomTable { times: Vec<f64>, values: Vec<f64> },
}

impl LoadProtocol {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            LoadProtocol::InstantaneousStep { amplitude } => {
                if t > 0.0 {
                    *amplitude
                } else {
                    0.0
                }
            }
            LoadProtocol::HarmonicRaisedCosine {
                amplitude,
                angular_frequency,
            } => amplitude * (1.0 - (angular_frequency * t).cos()),
            LoadProtocol::SineSpike {
                amplitude,
                angular_frequency,
                cutoff,
            } => {
                if t <= *cutoff {
                    amplitude * (angular_frequency * t).sin()
                } else {
                    0.0
                }
            }
            LoadProtocol::VelocityRamp { rate, ramp_time } => {
                if *ramp_time <= 0.0 || t >= *ramp_time {
                    *rate
                } else {
                    rate * t.max(0.0) / ramp_time
                }
            }
            LoadProtocol::CustomTable { times, values } => table_value(times, values, t),
        }
    }

    /// `int_0^t value(s) ds` in closed form.
    pub fn integral(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            LoadProtocol::InstantaneousStep { amplitude } => amplitude * t,
            LoadProtocol::HarmonicRaisedCosine {
                amplitude,
                angular_frequency: w,
            } => amplitude * (t - (w * t).sin() / w),
            LoadProtocol::SineSpike {
                amplitude,
                angular_frequency: w,
                cutoff,
            } => amplitude * (1.0 - (w * t.min(*cutoff)).cos()) / w,
            LoadProtocol::VelocityRamp { rate, ramp_time } => {
                if *ramp_time <= 0.0 {
                    rate * t
                } else if t <= *ramp_time {
                    rate * t * t / (2.0 * ramp_time)
                } else {
                    rate * (t - 0.5 * ramp_time)
                }
            }
            LoadProtocol::CustomTable { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                let mut acc = 0.0;
                let mut prev_t = 0.0;
                let mut prev_v = table_value(times, values, 0.0);
                for &tk in times.iter().filter(|&&tk| tk > 0.0 && tk < t) {
                    let vk = table_value(times, values, tk);
                    acc += 0.5 * (prev_v + vk) * (tk - prev_t);
                    prev_t = tk;
                    prev_v = vk;
                }
                acc + 0.5 * (prev_v + table_value(times, values, t)) * (t - prev_t)
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            LoadProtocol::HarmonicRaisedCosine { angular_frequency, .. }
            | LoadProtocol::SineSpike { angular_frequency, .. }
                if !(*angular_frequency > 0.0) =>
            {
                Err("angular frequency must be positive".into())
            }
            LoadProtocol::VelocityRamp { ramp_time, .. } if *ramp_time < 0.0 => {
                Err("ramp time must be non-negative".into())
            }
            LoadProtocol::CustomTable { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    Err("custom table needs equally long, non-empty times and values".into())
                } else if times.windows(2).any(|w| !(w[1] > w[0])) {
                    Err("custom table times must increase strictly".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn table_value(times: &[f64], values: &[f64], t: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    if t <= times[0] {
        return values[0];
    }
    for k in 1..times.len() {
        if t <= times[k] {
            let s = (t - times[k - 1]) / (times[k] - times[k - 1]);
            return values[k - 1] + s * (values[k] - values[k - 1]);
        }
    }
    values[values.len() - 1]
}
