use std::time::Duration;

use super::PipelineHooks;
use crate::executor::{ExecutionObserver, TraceEvent};
use crate::planner::ActionStep;

/// Sleeps between monitor ticks so trace playback follows virtual time.
/// `speed` 2 plays twice as fast as real time; 0 disables pacing.
#[derive(Debug, Clone, Default)]
pub struct Pacer {
    speed: f64,
    last_tick: Option<f64>,
}

impl Pacer {
    pub fn new(speed: f64) -> Self {
        Self {
            speed: speed.max(0.0),
            last_tick: None,
        }
    }

    pub fn enabled(&self) -> bool {
        self.speed > 0.0
    }

    /// Wall-clock time to wait before showing `event`.
    pub fn delay(&mut self, event: &TraceEvent) -> Option<Duration> {
        if !self.enabled() {
            return None;
        }
        let TraceEvent::Tick { t, .. } = event else { return None };
        let dt = self.last_tick.replace(*t).map_or(0.0, |prev| (t - prev).max(0.0));
        (dt > 0.0).then(|| Duration::from_secs_f64(dt / self.speed))
    }

    pub fn pace(&mut self, event: &TraceEvent) {
        if let Some(d) = self.delay(event) {
            std::thread::sleep(d);
        }
    }
}

/// Approves every step.
impl ExecutionObserver for Pacer {
    fn confirm(&mut self, _: usize, _: &ActionStep, _: &str) -> bool {
        true
    }

    fn on_event(&mut self, event: &TraceEvent) {
        self.pace(event);
    }
}

impl PipelineHooks for Pacer {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn tick(t: f64) -> TraceEvent {
        TraceEvent::Tick {
            t,
            xyz: Vec3::new(400.0, 0.0, 350.0),
            speed: 0.0,
            accel: 0.0,
            angular_rate: 0.0,
            joint_rate: None,
            aperture: 1.0,
            load: 0.0,
        }
    }

    #[test]
    fn delays_scale_with_virtual_time() {
        let mut p = Pacer::new(4.0);
        assert_eq!(p.delay(&tick(0.1)), None);
        assert_eq!(p.delay(&tick(0.5)), Some(Duration::from_secs_f64(0.1)));
        let other = TraceEvent::Capture { t: 0.9, tags: vec![] };
        assert_eq!(p.delay(&other), None);
    }

    #[test]
    fn zero_speed_never_sleeps() {
        let mut p = Pacer::new(0.0);
        assert!(!p.enabled());
        assert_eq!(p.delay(&tick(0.0)), None);
        assert_eq!(p.delay(&tick(10.0)), None);
    }
}
