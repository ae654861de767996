//! Bench report data model and the CSV contracts.
//!
//! All floating-point columns are written with 17 significant digits in
//! scientific notation, which is enough to reproduce every f64 bit
//! pattern and is locale-independent by construction.

use std::io::Write;
use std::path::Path;

use idealframe::formulations::FormulationKind;
use idealframe::propagator::Trajectory;

/// Full-precision float formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRAJECTORY_HEADER: &str =
    "t_s,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s,bilinear,norm_defect,ge_defect,energy_internal,gz_internal";

/// Trajectory CSV: one row per output sample, source units, plus the
/// constraint diagnostics recorded at the sample.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &tr.samples {
        let cells = [
            s.state.t,
            s.state.pos.x,
            s.state.pos.y,
            s.state.pos.z,
            s.state.vel.x,
            s.state.vel.y,
            s.state.vel.z,
            s.diag.bilinear,
            s.diag.norm_defect,
            s.diag.ge_defect,
            s.diag.energy,
            s.diag.gz,
        ];
        let row: Vec<String> = cells.iter().map(|&c| fmt_f64(c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One (formulation × tolerance) cell of the comparison grid.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub formulation: FormulationKind,
    pub rtol: f64,
    pub atol: f64,
    pub steps: u64,
    pub rejected: u64,
    pub field_evals: u64,
    /// Median of the timed repeats, nanoseconds, monotonic clock.
    pub runtime_ns: u128,
    pub pos_err_rel: f64,
    pub vel_err_rel: f64,
    pub max_norm_defect: f64,
    pub max_bilinear: f64,
    /// "ok" or the failure message for this cell.
    pub status: String,
}

/// Agreement between the two self-generated reference runs; accuracy
/// below this floor is not resolvable by the report.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceInfo {
    pub pos_floor_rel: f64,
    pub vel_floor_rel: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub scenario: String,
    pub reference: ReferenceInfo,
    pub rows: Vec<BenchRow>,
}

pub const REPORT_HEADER: &str = "formulation,rtol,atol,steps,rejected,field_evals,runtime_ns,pos_err_rel,vel_err_rel,max_norm_defect,max_bilinear,status";

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.formulation,
                fmt_f64(r.rtol),
                fmt_f64(r.atol),
                r.steps,
                r.rejected,
                r.field_evals,
                r.runtime_ns,
                fmt_f64(r.pos_err_rel),
                fmt_f64(r.vel_err_rel),
                fmt_f64(r.max_norm_defect),
                fmt_f64(r.max_bilinear),
                r.status,
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.csv().as_bytes())
    }

    pub fn row(&self, kind: FormulationKind, rtol: f64) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.formulation == kind && r.rtol == rtol)
    }
}
