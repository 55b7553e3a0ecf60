use std::fmt::Write as _;
use std::io::Write;

pub const TELEMETRY_HEADER: &str =
    "t,n_t,b_t,c_t,phi_total,phi_max,s_min,w_max,sigma_dang,sigma_safe,n_dang,dang_support_max,guard_tripped";

/// One telemetry row, recorded at every rebuild.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub n_t: usize,
    pub b_t: f64,
    pub c_t: f64,
    pub phi_total: f64,
    pub phi_max: f64,
    pub s_min: f64,
    pub w_max: f64,
    /// `σ_{⌈n_t/11⌉}` of the dangerous and safe matrices (0 below that rank).
    pub sigma_dang: f64,
    pub sigma_safe: f64,
    pub n_dang: usize,
    /// Largest alive support among dangerous rows left unblocked.
    pub dang_support_max: usize,
    pub guard_tripped: bool,
    pub diagnostics: SamplerDiagnostics,
}

/// Per-rebuild facts about the blocked subspace and the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SamplerDiagnostics {
    pub declared: usize,
    pub dim_w: usize,
    pub plan_trace: f64,
    pub plan_passes: usize,
    pub svd_iterations: usize,
}

impl StepRecord {
    pub fn csv_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.n_t,
            self.b_t,
            self.c_t,
            self.phi_total,
            self.phi_max,
            self.s_min,
            self.w_max,
            self.sigma_dang,
            self.sigma_safe,
            self.n_dang,
            self.dang_support_max,
            u8::from(self.guard_tripped)
        )
        .unwrap();
        s
    }
}

pub fn write_telemetry<W: Write>(out: &mut W, records: &[StepRecord]) -> std::io::Result<()> {
    writeln!(out, "{TELEMETRY_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn telemetry_csv(records: &[StepRecord]) -> String {
    let mut buf = Vec::new();
    write_telemetry(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_matches_header_width() {
        let r = StepRecord {
            t: 0.5,
            n_t: 10,
            b_t: 3.0,
            c_t: 0.1,
            phi_total: 1e10,
            phi_max: 2.0,
            s_min: 1.5,
            w_max: 7.0,
            sigma_dang: 0.0,
            sigma_safe: 1.25,
            n_dang: 0,
            dang_support_max: 0,
            guard_tripped: true,
            diagnostics: SamplerDiagnostics::default(),
        };
        let csv = telemetry_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TELEMETRY_HEADER);
        let body = lines.next().unwrap();
        assert_eq!(body.split(',').count(), TELEMETRY_HEADER.split(',').count());
        assert!(body.starts_with("0.5,10,3,0.1,10000000000,"));
        assert!(body.ends_with(",1"));
    }
}
