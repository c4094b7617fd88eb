use super::{validate_target, Deadline, ExecError, Executor, TraceEvent, World};
use crate::perception::Observation;
use crate::{HomTransform, RpyDeg, Vec3};

/// Orientation with the tool axis pointing straight down.
pub(crate) fn tool_down() -> RpyDeg {
    RpyDeg::new(180.0, 0.0, 0.0)
}

impl Executor {
    fn check_speed(&self, speed: Option<f64>) -> Result<f64, ExecError> {
        let v = speed.unwrap_or(self.motion.default_speed_mm_s);
        if v > self.limits.max_cart_speed {
            return Err(ExecError::SpeedCapExceeded {
                requested: v,
                max: self.limits.max_cart_speed,
            });
        }
        if !(v > 0.0) {
            return Err(ExecError::SafetyAbort(format!("speed {v} mm/s is not positive")));
        }
        Ok(v)
    }

    /// Single straight-line move. `rpy` defaults to the current orientation.
    pub fn move_to_pose(&self, world: &mut World, xyz: Vec3, rpy: Option<RpyDeg>, speed: Option<f64>, deadline: &Deadline) -> Result<(), ExecError> {
        let speed = self.check_speed(speed)?;
        validate_target(xyz, &self.bounds)?;
        let distance = world.arm.position().distance(xyz);
        if distance > self.limits.max_single_move {
            return Err(ExecError::MoveTooLong {
                distance,
                max: self.limits.max_single_move,
            });
        }
        let rpy = rpy.unwrap_or_else(|| world.arm.pose().1);
        self.run_motion(world, HomTransform::from_pose(xyz, rpy), None, speed, deadline)
    }

    /// Like [`Executor::move_to_pose`], but splits moves longer than
    /// `max_single_move` into equal straight segments.
    pub fn travel(&self, world: &mut World, xyz: Vec3, rpy: Option<RpyDeg>, speed: Option<f64>, deadline: &Deadline) -> Result<(), ExecError> {
        validate_target(xyz, &self.bounds)?;
        let start = world.arm.tcp;
        let rpy = rpy.unwrap_or_else(|| world.arm.pose().1);
        let goal = HomTransform::from_pose(xyz, rpy);
        let d = start.translation_part().distance(xyz);
        let n = (d / self.limits.max_single_move).ceil().max(1.0) as usize;
        for i in 1..=n {
            let (p, r) = start.interpolate(&goal, i as f64 / n as f64).to_pose();
            let p = if i == n { xyz } else { p };
            let r = if i == n { rpy } else { r };
            self.move_to_pose(world, p, Some(r), speed, deadline)?;
        }
        Ok(())
    }

    /// Highest-confidence observation of `label` in the latest snapshot.
    pub fn resolve(&self, world: &World, label: &str) -> Result<Observation, ExecError> {
        world
            .perception
            .store()
            .snapshot()
            .into_iter()
            .filter(|o| o.label == label)
            .max_by(|a, b| a.confidence.total_cmp(&b.confidence).then(b.tag_id.cmp(&a.tag_id)))
            .ok_or_else(|| ExecError::ObjectNotObserved(label.to_string()))
    }

    /// Hover target for `label`: observed position raised by `hover_mm`.
    pub fn approach_target(&self, world: &World, label: &str, hover_mm: f64) -> Result<Vec3, ExecError> {
        let obs = self.resolve(world, label)?;
        Ok(obs.position_xyz + Vec3::new(0.0, 0.0, hover_mm))
    }

    /// Moves tool-down to the hover pose above the best observation of
    /// `label`, in segments if needed.
    pub fn approach_object(&self, world: &mut World, label: &str, hover_mm: f64, speed: Option<f64>, deadline: &Deadline) -> Result<Vec3, ExecError> {
        let target = self.approach_target(world, label, hover_mm)?;
        self.travel(world, target, Some(tool_down()), speed, deadline)?;
        Ok(target)
    }

    /// Vertical lift by `retreat_mm`, clamped to the top of the workspace.
    pub fn retreat_z(&self, world: &mut World, retreat_mm: f64, speed: Option<f64>, deadline: &Deadline) -> Result<(), ExecError> {
        if !(retreat_mm >= 0.0) {
            return Err(ExecError::SafetyAbort(format!("retreat distance {retreat_mm} mm is negative")));
        }
        let p = world.arm.position();
        let z = (p.z + retreat_mm).min(self.bounds.z.max);
        if z <= p.z {
            return Ok(());
        }
        self.travel(world, Vec3::new(p.x, p.y, z), None, speed, deadline)
    }

    /// Straight-up escape after repeated failures; ignores the step and plan
    /// timers.
    pub(crate) fn emergency_retreat(&self, world: &mut World) -> Result<(), ExecError> {
        let p = world.arm.position();
        let z = (p.z + self.motion.emergency_retreat_mm).min(self.bounds.z.max);
        world.log(TraceEvent::EmergencyRetreat {
            t: world.arm.time,
            from_z: p.z,
            to_z: z,
        });
        if z <= p.z || !self.bounds.contains(p) {
            return Ok(());
        }
        self.travel(
            world,
            Vec3::new(p.x, p.y, z),
            None,
            Some(self.motion.emergency_speed_mm_s),
            &Deadline::never(),
        )
    }

    /// Grabs one frame from the wrist camera and commits it to the store.
    pub fn capture(&self, world: &mut World) -> Result<Vec<Observation>, ExecError> {
        let t = world.arm.time;
        let obs = world.perception.capture(&world.scene, &world.arm.tcp, t)?;
        world.log(TraceEvent::Capture {
            t,
            tags: obs.iter().map(|o| o.tag_id).collect(),
        });
        Ok(obs)
    }
}
