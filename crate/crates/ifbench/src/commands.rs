//! The `run` and `compare` entry points: single propagations with CSV
//! trajectory output, and the work–precision comparison grid.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use idealframe::formulations::FormulationKind;
use idealframe::integrator::Tolerances;
use idealframe::propagator::{propagate, Scenario, Trajectory};
use idealframe::state::CartesianState;

use crate::report::{trajectory_csv, BenchReport, BenchRow, ReferenceInfo};
use crate::scenario::parse_scenario;
use crate::CliError;

/// Tolerance of the self-generated Cowell reference run.
pub const REFERENCE_RTOL: f64 = 1e-13;

fn tols(rtol: f64, atol: f64) -> Tolerances {
    Tolerances { rtol, atol, ..Tolerances::default() }
}

/// Reference final state: Cowell at rtol = 1e-13, confirmed by a second
/// run at half the tolerance. The disagreement between the two runs is
/// the resolution floor of every accuracy column in the report.
pub fn reference_final_state(
    scn: &Scenario,
) -> Result<(CartesianState, ReferenceInfo), CliError> {
    let a = propagate(scn, FormulationKind::Cowell, &tols(REFERENCE_RTOL, REFERENCE_RTOL))?;
    let b = propagate(
        scn,
        FormulationKind::Cowell,
        &tols(REFERENCE_RTOL / 2.0, REFERENCE_RTOL / 2.0),
    )?;
    let fa = *a.final_state();
    let fb = b.final_state();
    let info = ReferenceInfo {
        pos_floor_rel: (fa.pos - fb.pos).norm() / fb.pos.norm(),
        vel_floor_rel: (fa.vel - fb.vel).norm() / fb.vel.norm(),
    };
    Ok((fa, info))
}

/// Grid specification for `compare`.
#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub kinds: Vec<FormulationKind>,
    pub rtols: Vec<f64>,
    pub repeats: usize,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { kinds: vec![], rtols: vec![], repeats: 11 }
    }
}

fn median_ns(mut times: Vec<u128>) -> u128 {
    times.sort_unstable();
    times[times.len() / 2]
}

/// Run the full (formulation × tolerance) grid. Accuracy is scored
/// against the self-generated reference; runtimes are medians of
/// `repeats` timed runs after one warm-up (the accuracy run). A failing
/// cell is recorded in its row and the grid continues.
pub fn run_compare(scn: &Scenario, spec: &CompareSpec) -> Result<BenchReport, CliError> {
    if spec.kinds.is_empty() {
        return Err(CliError::Usage("at least one formulation is required".into()));
    }
    if spec.rtols.is_empty() {
        return Err(CliError::Usage("the tolerance sweep must not be empty".into()));
    }
    if spec.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let (reference, ref_info) = reference_final_state(scn)?;

    let mut rows = Vec::with_capacity(spec.kinds.len() * spec.rtols.len());
    for &kind in &spec.kinds {
        for &rtol in &spec.rtols {
            let tol = tols(rtol, rtol);
            // warm-up + accuracy/diagnostics run
            let trajectory = match propagate(scn, kind, &tol) {
                Ok(t) => t,
                Err(e) => {
                    rows.push(BenchRow {
                        formulation: kind,
                        rtol,
                        atol: rtol,
                        steps: 0,
                        rejected: 0,
                        field_evals: 0,
                        runtime_ns: 0,
                        pos_err_rel: f64::NAN,
                        vel_err_rel: f64::NAN,
                        max_norm_defect: f64::NAN,
                        max_bilinear: f64::NAN,
                        status: format!("error: {e}").replace(',', ";"),
                    });
                    continue;
                }
            };
            // timed repeats: only the propagate call is inside the timer
            let mut times = Vec::with_capacity(spec.repeats);
            for _ in 0..spec.repeats {
                let t0 = Instant::now();
                let out = propagate(scn, kind, &tol);
                let dt = t0.elapsed().as_nanos();
                black_box(&out);
                times.push(dt);
            }
            let fs = trajectory.final_state();
            rows.push(BenchRow {
                formulation: kind,
                rtol,
                atol: rtol,
                steps: trajectory.stats.accepted,
                rejected: trajectory.stats.rejected,
                field_evals: trajectory.stats.field_evals,
                runtime_ns: median_ns(times),
                pos_err_rel: (fs.pos - reference.pos).norm() / reference.pos.norm(),
                vel_err_rel: (fs.vel - reference.vel).norm() / reference.vel.norm(),
                max_norm_defect: trajectory.max_norm_defect,
                max_bilinear: trajectory.max_bilinear(),
                status: "ok".into(),
            });
        }
    }
    Ok(BenchReport { scenario: scn.name.clone(), reference: ref_info, rows })
}

/// `run`: propagate one formulation and write the trajectory CSV.
pub fn cmd_run(
    scenario_path: &Path,
    kind: FormulationKind,
    rtol: f64,
    atol: f64,
    out_path: &Path,
) -> Result<Trajectory, CliError> {
    let scn = parse_scenario(scenario_path)?;
    let trajectory = propagate(&scn, kind, &tols(rtol, atol))?;
    std::fs::write(out_path, trajectory_csv(&trajectory))?;
    Ok(trajectory)
}

/// `compare`: run the grid and write the report CSV.
pub fn cmd_compare(
    scenario_path: &Path,
    spec: &CompareSpec,
    out_path: &Path,
) -> Result<BenchReport, CliError> {
    let scn = parse_scenario(scenario_path)?;
    let report = run_compare(&scn, spec)?;
    report.write_csv(out_path)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use idealframe::math::Vec3;

    fn toy() -> Scenario {
        Scenario::two_body(
            "toy",
            1.0,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            2.0 * std::f64::consts::PI,
            vec![],
        )
    }

    #[test]
    fn compare_rejects_empty_grid() {
        let scn = toy();
        let err = run_compare(&scn, &CompareSpec { kinds: vec![], rtols: vec![1e-9], repeats: 1 })
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = run_compare(
            &scn,
            &CompareSpec { kinds: vec![FormulationKind::Cowell], rtols: vec![], repeats: 1 },
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn compare_scores_small_errors_on_pure_kepler() {
        let scn = toy();
        let spec = CompareSpec {
            kinds: vec![FormulationKind::Ideal7Cs, FormulationKind::Ideal8Cs],
            rtols: vec![1e-11],
            repeats: 1,
        };
        let report = run_compare(&scn, &spec).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.status, "ok");
            assert!(row.pos_err_rel < 1e-9, "{}: {}", row.formulation, row.pos_err_rel);
            assert!(row.field_evals > 0);
            assert!(row.runtime_ns > 0);
        }
    }
}
