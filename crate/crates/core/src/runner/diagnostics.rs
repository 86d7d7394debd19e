use serde_json::{json, Value};

use super::scenario::DiagnosticSpec;
use crate::ancient_analysis::{
    barrier_comparison, displacement_envelope_check, envelope_constant, inner_ball_check,
    interior_estimate_statistic, lower_speed_check, type1_sup, umbilicity_gap, BarrierPlacement,
    INNER_BALL_MIN_LAG,
};
use crate::certification::{certify, Property};
use crate::error::{FlowError, Result};
use crate::flow_solver::{InitialData, Trajectory};
use crate::model_solutions::TranslatingParaboloid;
use crate::speed_calculus::Speed;

/// What a diagnostic may need beyond the trajectory.
pub struct Context<'a> {
    pub speed: &'a Speed<f64>,
    pub initial: Option<&'a InitialData>,
    pub seed: u64,
}

/// Largest relative deviation of h from the exact shrinking sphere.
pub fn sphere_error(traj: &Trajectory<f64>, speed: &Speed<f64>, r0: f64) -> Result<f64> {
    let c0 = speed.cylinder_constant(0)?;
    let mut worst = 0.0f64;
    for s in traj.snapshots() {
        let Some(p) = s.support() else { continue };
        let r2 = r0 * r0 - 2.0 * s.time / c0;
        if !(r2 > 0.0) {
            return Err(FlowError::Domain(format!("exact sphere is extinct at t = {}", s.time)));
        }
        let r = r2.sqrt();
        for &h in p.values() {
            worst = worst.max((h - r).abs() / r);
        }
    }
    Ok(worst)
}

fn evaluate_one(d: &DiagnosticSpec, traj: &Trajectory<f64>, ctx: &Context<'_>) -> Result<Value> {
    Ok(match d.name.as_str() {
        "type1" => json!({ "value": type1_sup(traj, d.number("t")?)? }),
        "extinction" => json!({ "estimate": traj.meta.extinction_estimate }),
        "envelope" => {
            let k = match d.number("k")? {
                Some(k) => k,
                None => d.number_or("factor", 1.0)? * envelope_constant(traj)?,
            };
            serde_json::to_value(displacement_envelope_check(traj, k)?).expect("serializable")
        }
        "umbilicity" => {
            let series = umbilicity_gap(traj)?;
            let worst_decrease = series
                .windows(2)
                .map(|w| w[0].1 - w[1].1)
                .fold(0.0f64, f64::max);
            json!({
                "final": series.last().map(|s| s.1),
                "worst_decrease": worst_decrease,
                "series": series,
            })
        }
        "inner-ball" => {
            let report = inner_ball_check(
                traj,
                d.number_or("c", 0.0)?,
                d.number_or("z", 0.0)?,
                d.number_or("min_lag", INNER_BALL_MIN_LAG)?,
            )?;
            serde_json::to_value(report).expect("serializable")
        }
        "lower-speed" => {
            serde_json::to_value(lower_speed_check(traj, d.number_or("l", 1.0)?)?).expect("serializable")
        }
        "interior" => json!({
            "value": interior_estimate_statistic(
                traj,
                d.number_or("p", 0.0)?,
                d.number_or("r", 0.1)?,
                d.number_or("l", 2.0)?,
                d.number_or("k", 1.0)?,
            )?
        }),
        "sphere-error" => {
            let r0 = match (d.number("r0")?, ctx.initial) {
                (Some(r), _) => r,
                (None, Some(InitialData::Sphere(r))) => *r,
                _ => return Err(FlowError::Domain("sphere-error needs a sphere or r0".into())),
            };
            json!({ "value": sphere_error(traj, ctx.speed, r0)? })
        }
        "certify" => {
            let property: Property = d
                .params
                .get("property")
                .map(String::as_str)
                .unwrap_or("concave")
                .parse()?;
            let samples = d.number_or("samples", 1000.0)? as usize;
            serde_json::to_value(certify(ctx.speed, property, samples, ctx.seed)?).expect("serializable")
        }
        "barrier" => {
            let bowl = TranslatingParaboloid::new(ctx.speed.clone(), d.number_or("m", 1.0)? as usize)?;
            let placement = BarrierPlacement {
                a: d.number_or("a", 1.0)?,
                z_shift: d.number_or("z_shift", 0.0)?,
                time_offset: d.number_or("time_offset", 0.0)?,
            };
            let report = barrier_comparison(traj, &bowl, &placement, d.number_or("eps", 0.0)?)?;
            serde_json::to_value(report).expect("serializable")
        }
        other => return Err(FlowError::Domain(format!("unknown diagnostic `{other}`"))),
    })
}

/// Evaluates each diagnostic; failures are recorded as `{"error": …}`.
pub fn evaluate(specs: &[DiagnosticSpec], traj: &Trajectory<f64>, ctx: &Context<'_>) -> serde_json::Map<String, Value> {
    let mut out = serde_json::Map::new();
    for d in specs {
        let value = evaluate_one(d, traj, ctx).unwrap_or_else(|e| json!({ "error": e.to_string() }));
        out.insert(d.to_string(), value);
    }
    out
}
