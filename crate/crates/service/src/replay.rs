use std::time::Duration;

use csa_core::planner::{replay_metrics, verify_log, PlanMetrics, RunEvent, RunLog};
use csa_core::world::scene_hash;

use crate::protocol::Telemetry;
use crate::session::{raster_for, telemetry_for, SLOW_SENSOR_TICKS};
use crate::ServiceError;

/// Telemetry a live session would have sent while recording `log`, and the
/// metrics recomputed from it. Refuses logs whose scene does not match the
/// header hash, and logs whose stored metrics disagree with the recomputation.
pub fn replay(log: &RunLog) -> Result<(Vec<Telemetry>, PlanMetrics), ServiceError> {
    let metrics = if log.metrics.is_some() {
        verify_log(log).map_err(|e| ServiceError::Replay(e.to_string()))?
    } else {
        if scene_hash(&log.header.scene) != log.header.scene_hash {
            return Err(ServiceError::Replay("scene hash does not match header".into()));
        }
        replay_metrics(log)
    };
    let mut out = Vec::new();
    replay_each(log, |batch| out.extend(batch));
    Ok((out, metrics))
}

fn replay_each(log: &RunLog, mut emit: impl FnMut(Vec<Telemetry>)) {
    let mut scene = log.header.scene.clone();
    for rec in &log.records {
        let tick = (rec.time_s / log.header.dt_s).round() as u64;
        let raster = if tick % SLOW_SENSOR_TICKS == 0 { raster_for(&scene, rec) } else { None };
        emit(telemetry_for(rec, raster));
        for e in &rec.events {
            if let RunEvent::Displaced { id, position_m, orientation_rad } = e {
                if let Some(item) = scene.evidence.iter_mut().find(|i| i.id == *id) {
                    item.position_m = *position_m;
                    item.orientation_rad = *orientation_rad;
                    item.displaced = true;
                }
            }
        }
    }
}

/// Streams the replay with the recorded spacing divided by `speed`.
pub async fn replay_paced(
    log: &RunLog,
    speed: f64,
    mut emit: impl FnMut(Telemetry),
) -> Result<PlanMetrics, ServiceError> {
    if !(speed > 0.0) {
        return Err(ServiceError::Replay("speed must be positive".into()));
    }
    let (messages, metrics) = replay(log)?;
    let mut last_t: Option<f64> = None;
    for m in messages {
        if let Some(t0) = last_t {
            let gap = (m.time_s - t0) / speed;
            if gap > 0.0 {
                tokio::time::sleep(Duration::from_secs_f64(gap)).await;
            }
        }
        last_t = Some(m.time_s);
        emit(m);
    }
    Ok(metrics)
}
