use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::scenarios::{RunResult, Snapshot};

/// Format like C's `%.17g`: 17 significant digits, shortest of fixed and
/// exponent notation, trailing zeros removed.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Probe series: `time` then, per probe, `u_<axis>` for each active axis,
/// `p`, `eps_s`, `eps_pv`, prefixed by the probe name.
pub fn probes_csv(result: &RunResult) -> String {
    let dim = result.dim;
    let mut s = String::from("time");
    for pr in &result.probes {
        let n = &pr.probe.name;
        for a in AXES.iter().take(dim) {
            let _ = write!(s, ",{n}.u_{a}");
        }
        let _ = write!(s, ",{n}.p,{n}.eps_s,{n}.eps_pv");
    }
    s.push('\n');
    for (k, t) in result.times.iter().enumerate() {
        s.push_str(&format_g17(*t));
        for pr in &result.probes {
            for a in 0..dim {
                s.push(',');
                s.push_str(&format_g17(pr.u[k][a]));
            }
            for v in [pr.p[k], pr.eps_s[k], pr.eps_pv[k]] {
                s.push(',');
                s.push_str(&format_g17(v));
            }
        }
        s.push('\n');
    }
    s
}

/// Reaction force and mean displacement of the loaded face per sample.
pub fn reaction_csv(result: &RunResult) -> String {
    let dim = result.dim;
    let mut s = String::from("time");
    for a in AXES.iter().take(dim) {
        let _ = write!(s, ",reaction_{a}");
    }
    for a in AXES.iter().take(dim) {
        let _ = write!(s, ",face_u_{a}");
    }
    s.push('\n');
    for (k, t) in result.times.iter().enumerate() {
        s.push_str(&format_g17(*t));
        for v in result.reaction[k].iter().take(dim).chain(result.face_displacement[k].iter().take(dim)) {
            s.push(',');
            s.push_str(&format_g17(*v));
        }
        s.push('\n');
    }
    s
}

/// Field snapshot: `#` metadata lines, a header, then one record per point.
pub fn snapshot_text(scenario: &str, snap: &Snapshot) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# scenario = {scenario}");
    let _ = writeln!(s, "# step = {}", snap.step);
    let _ = writeln!(s, "# time = {} s", format_g17(snap.time));
    let _ = writeln!(s, "# units: x y z u_x u_y u_z [m]; p p_c [kPa]; eps_s eps_pv J [-]");
    s.push_str("id,x,y,z,u_x,u_y,u_z,p,eps_s,eps_pv,p_c,J\n");
    for r in &snap.rows {
        s.push_str(&r.id.to_string());
        let vals = [
            r.x[0], r.x[1], r.x[2], r.u[0], r.u[1], r.u[2], r.p, r.eps_s, r.eps_pv, r.pc, r.j,
        ];
        for v in vals {
            s.push(',');
            s.push_str(&format_g17(v));
        }
        s.push('\n');
    }
    s
}

pub fn snapshot_file_name(snap: &Snapshot) -> String {
    format!("snapshot_{:07}.csv", snap.step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub scenario: String,
    pub config_sha256: String,
    pub status: String,
    pub steps: usize,
    pub final_time: f64,
    pub newton_iterations: usize,
    pub factorizations: usize,
    pub files: Vec<ManifestFile>,
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<ManifestFile>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(ManifestFile {
        name: name.to_string(),
        bytes: contents.len(),
        sha256: sha256_hex(contents.as_bytes()),
    });
    Ok(())
}

/// Write probe and reaction tables, snapshots, the resolved configuration,
/// and a manifest into `dir` (created if missing). Returns the manifest.
pub fn write_outputs(result: &RunResult, config: &RunConfig, dir: &Path) -> Result<Manifest> {
    if result.times.is_empty() {
        return Err(Error::config("output", "run produced no samples"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let config_text = config.to_toml_string()?;
    write_file(dir, "config.resolved.toml", &config_text, &mut files)?;
    write_file(dir, "probes.csv", &probes_csv(result), &mut files)?;
    write_file(dir, "reaction.csv", &reaction_csv(result), &mut files)?;
    for snap in &result.snapshots {
        write_file(dir, &snapshot_file_name(snap), &snapshot_text(&result.scenario, snap), &mut files)?;
    }
    let status = match &result.error {
        None => "completed".to_string(),
        Some(e) => format!("failed: {e}"),
    };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: result.scenario.clone(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        status,
        steps: result.steps,
        final_time: result.final_state.time,
        newton_iterations: result.newton_iterations,
        factorizations: result.factorizations,
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let path: PathBuf = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_c_formatting() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (-2.5, "-2.5"),
            (1e-4, "0.0001"),
            (1e-5, "1.0000000000000001e-05"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (0.0, "0"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
