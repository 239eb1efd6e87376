//! CSV output for trajectories and sweeps.

use std::io::Write;

use horizon_core::flow::Trajectory;

use crate::error::Result;
use crate::run::SweepRow;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// Header `tau,t,x1..xn,p2c,G,kappa_inv`, one row per recorded sample.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let n = traj.samples.first().map_or(0, |s| s.x.len());
    let mut w = writer(out);
    let mut header = vec!["tau".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(["p2c", "G", "kappa_inv"].map(String::from));
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut row = vec![num(s.tau), num(s.t)];
        row.extend(s.x.iter().map(|&v| num(v)));
        row.extend([num(s.p2c), num(s.big_g), num(s.kappa_inv)]);
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Header `t0,t_max,sign_x1x3,a_t_max,status`; failed rows leave the
/// numeric columns empty.
pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t0", "t_max", "sign_x1x3", "a_t_max", "status"])?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in rows {
        w.write_record([
            num(r.t0),
            opt(r.t_max),
            r.sign.clone().unwrap_or_default(),
            opt(r.driver),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_is_header_only() {
        let mut buf = Vec::new();
        write_sweep(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t0,t_max,sign_x1x3,a_t_max,status\n");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 23.1796559, 1e-300, f64::MAX] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
