//! Parallel-jaw gripper with load- and time-based gating.
//!
//! Jaw opening is `aperture · max_opening_mm`. An object inside the grasp
//! volume pushes back with `stiffness · compression`, capped by the commanded
//! force (the jaws stall there).

use serde::{Deserialize, Serialize};

use super::{Deadline, ExecError, Executor, TraceEvent, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperConfig {
    pub max_opening_mm: f64,
    /// Device units for a full open→close stroke.
    pub stroke_units: f64,
    /// Load at which a grasp counts as secure.
    pub grasp_load: f64,
    /// Load at which the jaws are released immediately.
    pub emergency_load: f64,
    /// Longest a close may take before it is treated as an anomaly.
    pub gate_time_sec: f64,
    pub grasp_radius_mm: f64,
    /// Grasp volume extends this far below the TCP.
    pub grasp_depth_mm: f64,
    pub default_speed_units: f64,
    pub default_force_units: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        Self {
            max_opening_mm: 85.0,
            stroke_units: 1000.0,
            grasp_load: 40.0,
            emergency_load: 90.0,
            gate_time_sec: 8.0,
            grasp_radius_mm: 30.0,
            grasp_depth_mm: 60.0,
            default_speed_units: 200.0,
            default_force_units: 100.0,
        }
    }
}

impl GripperConfig {
    pub fn validate(&self, gripper_max_force: f64) -> Result<(), ExecError> {
        let positive = [
            self.max_opening_mm,
            self.stroke_units,
            self.grasp_load,
            self.gate_time_sec,
            self.grasp_radius_mm,
            self.grasp_depth_mm,
            self.default_speed_units,
            self.default_force_units,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(ExecError::Config("gripper parameters must be positive".into()));
        }
        if !(self.grasp_load < self.emergency_load && self.emergency_load < gripper_max_force) {
            return Err(ExecError::Config(format!(
                "need grasp_load < emergency_load < gripper_max_force ({} < {} < {gripper_max_force})",
                self.grasp_load, self.emergency_load
            )));
        }
        Ok(())
    }
}

impl Executor {
    fn gripper_speed(&self, speed: Option<f64>) -> Result<f64, ExecError> {
        let v = speed.unwrap_or(self.gripper.default_speed_units);
        if !(v > 0.0 && v <= self.limits.gripper_max_speed) {
            return Err(ExecError::GripperLimit {
                what: "speed",
                requested: v,
                max: self.limits.gripper_max_speed,
            });
        }
        Ok(v)
    }

    /// Graspable object whose tag lies in the cylinder under the TCP,
    /// nearest the jaw axis first.
    fn object_in_grasp_volume(&self, world: &World) -> Option<u32> {
        let tcp = world.arm.position();
        let g = &self.gripper;
        world
            .scene
            .objects
            .iter()
            .filter(|o| o.graspable && !o.held)
            .filter(|o| o.position.distance_xy(tcp) <= g.grasp_radius_mm && o.position.z <= tcp.z && o.position.z >= tcp.z - g.grasp_depth_mm)
            .min_by(|a, b| {
                a.position
                    .distance_xy(tcp)
                    .total_cmp(&b.position.distance_xy(tcp))
                    .then(a.tag_id.cmp(&b.tag_id))
            })
            .map(|o| o.tag_id)
    }

    /// Closes until the load gate decides. Success sets `holding`.
    pub fn close_gripper(&self, world: &mut World, speed: Option<f64>, force: Option<f64>, deadline: &Deadline) -> Result<(), ExecError> {
        let speed = self.gripper_speed(speed)?;
        let force = force.unwrap_or(self.gripper.default_force_units);
        if !(force > 0.0 && force <= self.limits.gripper_max_force) {
            return Err(ExecError::GripperLimit {
                what: "force",
                requested: force,
                max: self.limits.gripper_max_force,
            });
        }
        if world.arm.gripper.holding.is_some() {
            return Ok(());
        }
        let g = self.gripper;
        let target = self.object_in_grasp_volume(world);
        let (width, stiffness) = target
            .and_then(|id| world.scene.object(id))
            .map(|o| (o.width_mm, o.stiffness))
            .unwrap_or((0.0, 0.0));
        // Jaw opening in mm as a function of time, ignoring contact.
        let w0 = world.arm.gripper.aperture * g.max_opening_mm;
        let closing = speed / g.stroke_units * g.max_opening_mm;
        let stall = if target.is_some() { (width - force / stiffness).max(0.0) } else { 0.0 };
        let opening_at = |t: f64| (w0 - closing * t).max(stall).max(0.0);
        let load_at = |w: f64| {
            if target.is_some() {
                (stiffness * (width - w)).clamp(0.0, force)
            } else {
                0.0
            }
        };
        // First instant the load reaches the emergency threshold, if ever.
        let crossed = (target.is_some() && force >= g.emergency_load).then(|| {
            let w_cross = width - g.emergency_load / stiffness;
            ((w0 - w_cross) / closing).max(0.0)
        });

        let t0 = world.arm.time;
        let dt = self.limits.safety_check_interval;
        let xyz = world.arm.position();
        let mut k = 1u64;
        loop {
            let t = k as f64 * dt;
            if t0 + t > deadline.at {
                world.arm.time = deadline.at.max(t0);
                let w = opening_at(world.arm.time - t0);
                world.arm.gripper.aperture = w / g.max_opening_mm;
                world.arm.gripper.load = load_at(w);
                return Err(deadline.error(world.arm.time));
            }
            world.arm.time = t0 + t;
            let w = opening_at(t);
            let load = load_at(w);
            world.arm.gripper.aperture = w / g.max_opening_mm;
            world.arm.gripper.load = load;
            world.log(TraceEvent::Tick {
                t: world.arm.time,
                xyz,
                speed: 0.0,
                accel: 0.0,
                angular_rate: 0.0,
                joint_rate: None,
                aperture: world.arm.gripper.aperture,
                load,
            });
            if load >= g.emergency_load {
                return Err(self.emergency_open(world, load, crossed.map(|c| t0 + c), "load above emergency threshold"));
            }
            if load >= g.grasp_load {
                let id = target.expect("load implies contact");
                let obj = world.scene.object_mut(id).expect("grasp target exists");
                obj.held = true;
                world.arm.held_rest_z = obj.position.z;
                world.arm.gripper.holding = Some(id);
                world.arm.moved_since_grasp = false;
                world.perception.store().remove(id);
                world.log(TraceEvent::Grasp {
                    t: world.arm.time,
                    tag_id: id,
                    load,
                });
                return Ok(());
            }
            if w <= 0.0 {
                return Err(ExecError::GraspFailure);
            }
            if t >= g.gate_time_sec {
                return Err(self.emergency_open(world, load, None, "grasp gate time exceeded"));
            }
            k += 1;
        }
    }

    fn emergency_open(&self, world: &mut World, load: f64, crossed_at: Option<f64>, reason: &str) -> ExecError {
        world.log(TraceEvent::EmergencyOpen {
            t: world.arm.time,
            load,
            crossed_at,
            reason: reason.into(),
        });
        let g = &self.gripper;
        let dur = (1.0 - world.arm.gripper.aperture) * g.stroke_units / self.limits.gripper_max_speed;
        world.arm.time += dur;
        world.arm.gripper.aperture = 1.0;
        world.arm.gripper.load = 0.0;
        ExecError::EmergencyOpen { load, reason: reason.into() }
    }

    /// Opens fully. A held object is set down under the TCP at the height it
    /// was picked from; releasing before any transport move is refused.
    pub fn open_gripper(&self, world: &mut World, speed: Option<f64>, deadline: &Deadline) -> Result<(), ExecError> {
        let speed = self.gripper_speed(speed)?;
        if world.arm.gripper.holding.is_some() && !world.arm.moved_since_grasp {
            return Err(ExecError::SafetyAbort("release requested before any move to a drop pose".into()));
        }
        let g = self.gripper;
        let a0 = world.arm.gripper.aperture;
        let dur = (1.0 - a0) * g.stroke_units / speed;
        if dur > 0.0 {
            let t0 = world.arm.time;
            if t0 + dur > deadline.at {
                world.arm.time = deadline.at.max(t0);
                return Err(deadline.error(world.arm.time));
            }
            let dt = self.limits.safety_check_interval;
            let xyz = world.arm.position();
            let mut k = 1u64;
            loop {
                let t = (k as f64 * dt).min(dur);
                world.arm.time = t0 + t;
                world.arm.gripper.aperture = a0 + (1.0 - a0) * t / dur;
                world.arm.gripper.load = 0.0;
                world.log(TraceEvent::Tick {
                    t: world.arm.time,
                    xyz,
                    speed: 0.0,
                    accel: 0.0,
                    angular_rate: 0.0,
                    joint_rate: None,
                    aperture: world.arm.gripper.aperture,
                    load: 0.0,
                });
                if t >= dur {
                    break;
                }
                k += 1;
            }
        }
        world.arm.gripper.aperture = 1.0;
        world.arm.gripper.load = 0.0;
        if let Some(id) = world.arm.gripper.holding.take() {
            let tcp = world.arm.position();
            let rest = crate::Vec3::new(tcp.x, tcp.y, world.arm.held_rest_z);
            if let Some(obj) = world.scene.object_mut(id) {
                obj.held = false;
                obj.position = rest;
            }
            world.log(TraceEvent::Release {
                t: world.arm.time,
                tag_id: id,
                xyz: rest,
            });
        }
        Ok(())
    }
}
