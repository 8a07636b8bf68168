//! CSV persistence. Every file starts with `# key=value` lines echoing the
//! configuration, the seed and a timestamp.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::ber::BerReport;
use super::complexity::ComplexityRow;
use super::config::ExperimentConfig;
use super::consistency::ConsistencyReport;
use super::exit::ExitPoint;
use super::probe::ProbeReport;
use super::Result;

pub fn header(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = String::new();
    for (k, v) in cfg
        .pairs()
        .into_iter()
        .chain(extra.iter().map(|(k, v)| (*k, v.clone())))
    {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(&format!("# timestamp={stamp}\n"));
    s
}

pub fn ber_csv(report: &BerReport) -> String {
    let mut s = header(&report.config, &[]);
    s.push_str("ebn0_db,iter,bit_errors,bits,ber,frame_errors,frames,stop\n");
    for p in &report.points {
        for (z, c) in p.iterations.iter().enumerate() {
            s.push_str(&format!(
                "{},{z},{},{},{:e},{},{},{}\n",
                p.ebn0_db,
                c.bit_errors,
                c.bits,
                c.ber(),
                c.frame_errors,
                p.frames,
                p.stop
            ));
        }
    }
    s
}

pub fn exit_csv(cfg: &ExperimentConfig, points: &[ExitPoint]) -> String {
    let mut s = header(cfg, &[]);
    s.push_str("ia,ie,detector,ebn0_db\n");
    for p in points {
        s.push_str(&format!("{},{},{},{}\n", p.ia, p.ie, p.detector, p.ebn0_db));
    }
    s
}

pub fn consistency_csv(cfg: &ExperimentConfig, report: &ConsistencyReport) -> String {
    let mut s = header(
        cfg,
        &[
            ("slope", report.slope.to_string()),
            ("slope_ci", format!("{},{}", report.slope_ci.0, report.slope_ci.1)),
            ("intercept", report.intercept.to_string()),
            (
                "intercept_ci",
                format!("{},{}", report.intercept_ci.0, report.intercept_ci.1),
            ),
            ("samples", report.samples.to_string()),
        ],
    );
    s.push_str("bin_center,log_ratio,count\n");
    for b in &report.bins {
        s.push_str(&format!("{},{},{}\n", b.center, b.log_ratio, b.count));
    }
    s
}

pub fn probe_csv(cfg: &ExperimentConfig, report: &ProbeReport) -> String {
    let mut s = header(
        cfg,
        &[("fluctuating_fraction", report.fluctuating_fraction.to_string())],
    );
    s.push_str("it_i,ber,mean_delta,mean_abs_delta,positive,negative,below_epsilon\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &report.rows {
        s.push_str(&format!(
            "{},{:e},{},{},{},{},{}\n",
            r.it_i,
            r.ber(),
            opt(r.mean_delta),
            opt(r.mean_abs_delta),
            r.positive,
            r.negative,
            r.below_epsilon
        ));
    }
    s
}

pub fn complexity_csv(cfg: &ExperimentConfig, rows: &[ComplexityRow]) -> String {
    let mut s = header(cfg, &[]);
    s.push_str("nt,nr,m_order,detector,counted_ops,analytic_ops\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_t, r.n_r, r.order, r.detector, r.counted_ops, r.analytic_ops
        ));
    }
    s
}

/// Writes `contents` to `dir/name`, creating `dir`.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    f.write_all(contents.as_bytes())?;
    Ok(path)
}
