//! Post-processing of run outputs: spectral energy, time averages, and
//! shear-band detection on the equivalent shear strain field.

use nalgebra::{Matrix2, Vector2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Energy of `signal` (sampled at `dt`, mean removed) in frequencies above
/// `cutoff` [Hz], from the one-sided discrete Fourier spectrum.
pub fn high_frequency_energy(signal: &[f64], dt: f64, cutoff: f64) -> f64 {
    let n = signal.len();
    if n < 2 {
        return 0.0;
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    buf.iter()
        .take(n / 2 + 1)
        .enumerate()
        .filter(|(k, _)| *k as f64 * df > cutoff)
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        / n as f64
}

/// Trapezoidal time average of `values` over `[t0, t1]`.
pub fn time_average(times: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
    let mut area = 0.0;
    let mut span = 0.0;
    for k in 1..times.len() {
        let (a, b) = (times[k - 1].max(t0), times[k].min(t1));
        if b <= a {
            continue;
        }
        let lerp = |t: f64| {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            values[k - 1] + w * (values[k] - values[k - 1])
        };
        area += 0.5 * (lerp(a) + lerp(b)) * (b - a);
        span += b - a;
    }
    if span > 0.0 {
        area / span
    } else {
        f64::NAN
    }
}

/// `rms(a - b) / rms(a)` over the common length.
pub fn relative_rms_difference(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut d, mut s) = (0.0, 0.0);
    for k in 0..n {
        d += (a[k] - b[k]).powi(2);
        s += a[k] * a[k];
    }
    if s > 0.0 {
        (d / s).sqrt()
    } else {
        d.sqrt()
    }
}

/// Largest value among points within `half_width` of the horizontal line
/// `y = y0`.
pub fn cross_section_peak(points: &[[f64; 2]], values: &[f64], y0: f64, half_width: f64) -> f64 {
    points
        .iter()
        .zip(values)
        .filter(|(x, _)| (x[1] - y0).abs() <= half_width)
        .fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v))
}

/// A connected cluster of ridge points with a common orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub points: Vec<usize>,
    /// Inclination of the principal axis from the x axis, in (-90, 90]
    /// degrees.
    pub angle: f64,
    /// Extent along the principal axis [m]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub threshold: f64,
    /// Indices (into the input) of all ridge points.
    pub ridge: Vec<usize>,
    pub bands: Vec<Band>,
    /// Conjugate pairs: `min(#positive-slope, #negative-slope)` bands.
    pub pairs: usize,
}

impl BandReport {
    /// Mean absolute inclination of the bands, weighted by point count.
    pub fn mean_inclination(&self) -> Option<f64> {
        let n: usize = self.bands.iter().map(|b| b.points.len()).sum();
        if n == 0 {
            return None;
        }
        Some(
            self.bands
                .iter()
                .map(|b| b.angle.abs() * b.points.len() as f64)
                .sum::<f64>()
                / n as f64,
        )
    }
}

fn principal_axis(pts: &[[f64; 2]]) -> (Vector2<f64>, f64, f64) {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vector2::zeros(), |s, p| s + Vector2::new(p[0], p[1])) / n;
    let mut cov = Matrix2::zeros();
    for p in pts {
        let d = Vector2::new(p[0], p[1]) - c;
        cov += d * d.transpose();
    }
    let eig = (cov / n).symmetric_eigen();
    let (k, l) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(k).into_owned();
    (v, eig.eigenvalues[k], eig.eigenvalues[l])
}

fn inclination(v: &Vector2<f64>) -> f64 {
    let mut a = v[1].atan2(v[0]).to_degrees();
    if a <= -90.0 {
        a += 180.0;
    } else if a > 90.0 {
        a -= 180.0;
    }
    a
}

/// Detect shear bands on a 2D field: ridge points exceed mean + 2 std;
/// each ridge point gets a slope sign from the principal axis of the ridge
/// points within `3 dx`; same-sign ridge points closer than `1.5 dx` are
/// clustered; clusters with at least `min_points` points and an elongated
/// shape (axis ratio >= 3) are bands.
pub fn detect_bands(points: &[[f64; 2]], values: &[f64], dx: f64, min_points: usize) -> BandReport {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + 2.0 * std;
    let ridge: Vec<usize> = (0..values.len()).filter(|&i| values[i] > threshold).collect();
    let near = |a: usize, b: usize, r: f64| {
        let (p, q) = (points[a], points[b]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= r * r * (1.0 + 1e-9)
    };
    let sign: Vec<i8> = ridge
        .iter()
        .map(|&i| {
            let local: Vec<[f64; 2]> = ridge.iter().filter(|&&j| near(i, j, 3.0 * dx)).map(|&j| points[j]).collect();
            if local.len() < 3 {
                return 0;
            }
            let (v, l1, l2) = principal_axis(&local);
            let a = inclination(&v);
            if l1 < 2.0 * l2 || a.abs() < 10.0 || a.abs() > 80.0 {
                0
            } else if a > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let mut label = vec![usize::MAX; ridge.len()];
    let mut bands = Vec::new();
    for seed in 0..ridge.len() {
        if label[seed] != usize::MAX || sign[seed] == 0 {
            continue;
        }
        let id = bands.len();
        let mut stack = vec![seed];
        let mut members = Vec::new();
        label[seed] = id;
        while let Some(k) = stack.pop() {
            members.push(ridge[k]);
            for m in 0..ridge.len() {
                if label[m] == usize::MAX && sign[m] == sign[seed] && near(ridge[k], ridge[m], 1.5 * dx) {
                    label[m] = id;
                    stack.push(m);
                }
            }
        }
        members.sort_unstable();
        let pts: Vec<[f64; 2]> = members.iter().map(|&i| points[i]).collect();
        let (v, l1, l2) = if pts.len() >= 2 {
            principal_axis(&pts)
        } else {
            (Vector2::x(), 0.0, 0.0)
        };
        let proj: Vec<f64> = pts.iter().map(|p| p[0] * v[0] + p[1] * v[1]).collect();
        let length = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - proj.iter().cloned().fold(f64::INFINITY, f64::min);
        bands.push((
            Band {
                points: members,
                angle: inclination(&v),
                length,
            },
            l1,
            l2,
        ));
    }
    let bands: Vec<Band> = bands
        .into_iter()
        .filter(|(b, l1, l2)| b.points.len() >= min_points && *l1 >= 9.0 * *l2)
        .map(|(b, _, _)| b)
        .collect();
    let pos = bands.iter().filter(|b| b.angle > 0.0).count();
    let neg = bands.iter().filter(|b| b.angle < 0.0).count();
    BandReport {
        threshold,
        ridge,
        bands,
        pairs: pos.min(neg),
    }
}
