//! Straight-line pose motion on the virtual clock.
//!
//! A move is parameterized by `s ∈ [0, 1]`: translation is linear in `s`,
//! orientation follows the geodesic, and joint angles (for joint-space moves)
//! interpolate linearly. `s(t)` follows a trapezoidal profile whose peak rate
//! and acceleration are the tightest of the Cartesian, angular and joint caps.

use super::{Deadline, ExecError, Executor, TraceEvent, World, RATE_SLACK};
use crate::{HomTransform, JointConfig, Vec3};

/// Trapezoidal (or triangular) profile over a unit path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub peak_rate: f64,
    pub accel: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
}

impl Profile {
    /// `max_rate` and `max_accel` are in path units (1 = whole move).
    pub fn new(max_rate: f64, max_accel: f64) -> Self {
        debug_assert!(max_rate > 0.0 && max_accel > 0.0);
        if max_rate * max_rate / max_accel <= 1.0 {
            Self {
                peak_rate: max_rate,
                accel: max_accel,
                t_accel: max_rate / max_accel,
                t_cruise: (1.0 - max_rate * max_rate / max_accel) / max_rate,
            }
        } else {
            let peak = max_accel.sqrt();
            Self {
                peak_rate: peak,
                accel: max_accel,
                t_accel: peak / max_accel,
                t_cruise: 0.0,
            }
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_accel + self.t_cruise
    }

    /// `(s, ṡ, s̈)` at time `t`.
    pub fn sample(&self, t: f64) -> (f64, f64, f64) {
        let (ta, tc, a) = (self.t_accel, self.t_cruise, self.accel);
        let total = self.duration();
        if t <= 0.0 {
            (0.0, 0.0, a)
        } else if t < ta {
            (0.5 * a * t * t, a * t, a)
        } else if t < ta + tc {
            (0.5 * a * ta * ta + self.peak_rate * (t - ta), self.peak_rate, 0.0)
        } else if t < total {
            let r = total - t;
            (1.0 - 0.5 * a * r * r, a * r, -a)
        } else {
            (1.0, 0.0, 0.0)
        }
    }
}

/// Closed-form duration of a rest-to-rest move of `d` mm at cruise speed `v`
/// and acceleration `a`.
pub fn trapezoid_duration(d: f64, v: f64, a: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else if d >= v * v / a {
        d / v + v / a
    } else {
        2.0 * (d / a).sqrt()
    }
}

/// One monitor sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickSample {
    pub xyz: Vec3,
    pub speed: f64,
    pub accel: f64,
    pub angular_rate: f64,
    pub joint_rate: Option<f64>,
}

impl Executor {
    /// Runtime invariant check applied at every monitor tick.
    pub fn check_tick(&self, s: &TickSample) -> Result<(), String> {
        let l = &self.limits;
        let eps = 1e-9;
        let b = &self.bounds;
        let inside = s.xyz.x >= b.x.min - eps
            && s.xyz.x <= b.x.max + eps
            && s.xyz.y >= b.y.min - eps
            && s.xyz.y <= b.y.max + eps
            && s.xyz.z >= b.z.min - eps
            && s.xyz.z <= b.z.max + eps;
        if !inside {
            return Err(format!("TCP {} left the workspace", s.xyz));
        }
        if s.speed > l.max_cart_speed * (1.0 + RATE_SLACK) {
            return Err(format!("speed {:.3} mm/s above cap {}", s.speed, l.max_cart_speed));
        }
        if s.accel > l.max_cart_accel * (1.0 + RATE_SLACK) {
            return Err(format!("acceleration {:.3} mm/s² above cap {}", s.accel, l.max_cart_accel));
        }
        let rate = s.joint_rate.unwrap_or(0.0).max(s.angular_rate);
        if rate > l.max_joint_speed * (1.0 + RATE_SLACK) {
            return Err(format!("joint rate {rate:.3} deg/s above cap {}", l.max_joint_speed));
        }
        Ok(())
    }

    fn tick(&self, world: &mut World, s: TickSample) -> Result<(), String> {
        let g = &world.arm.gripper;
        let e = TraceEvent::Tick {
            t: world.arm.time,
            xyz: s.xyz,
            speed: s.speed,
            accel: s.accel,
            angular_rate: s.angular_rate,
            joint_rate: s.joint_rate,
            aperture: g.aperture,
            load: g.load,
        };
        world.log(e);
        self.check_tick(&s)
    }

    /// Holds still for `duration`, with monitor ticks.
    pub(crate) fn idle(&self, world: &mut World, duration: f64, deadline: &Deadline) -> Result<(), ExecError> {
        let t0 = world.arm.time;
        let end = t0 + duration;
        let dt = self.limits.safety_check_interval;
        let xyz = world.arm.position();
        let mut k = 1u64;
        loop {
            let t = (t0 + k as f64 * dt).min(end);
            if deadline.at < t {
                world.arm.time = deadline.at.max(t0);
                return Err(deadline.error(world.arm.time));
            }
            world.arm.time = t;
            let sample = TickSample {
                xyz,
                speed: 0.0,
                accel: 0.0,
                angular_rate: 0.0,
                joint_rate: None,
            };
            self.tick(world, sample).map_err(ExecError::SafetyAbort)?;
            if t >= end {
                return Ok(());
            }
            k += 1;
        }
    }

    /// Moves the TCP to `target` with the given Cartesian speed cap. When
    /// `joints` is given the move is joint-space and ends at that
    /// configuration. All preconditions (workspace, distance, speed) are the
    /// caller's job; this only integrates and monitors.
    pub(crate) fn run_motion(
        &self,
        world: &mut World,
        target: HomTransform,
        joints: Option<&JointConfig>,
        speed: f64,
        deadline: &Deadline,
    ) -> Result<(), ExecError> {
        let l = &self.limits;
        let start = world.arm.tcp;
        let p0 = start.translation_part();
        let p1 = target.translation_part();
        let d = p0.distance(p1);
        let theta = start.rotation_angle_to(&target);
        let j_pair = match (&world.arm.joints, joints) {
            (Some(a), Some(b)) => Some((a.clone(), b.clone())),
            _ => None,
        };
        let j_delta = j_pair.as_ref().map(|(a, b)| a.max_delta(b)).unwrap_or(0.0);

        if d < 1e-9 && theta < 1e-9 && j_delta < 1e-9 {
            world.arm.tcp = target;
            world.arm.joints = joints.cloned();
            return Ok(());
        }

        let ang_accel = self.motion.angular_accel_deg_s2;
        let mut rate = f64::INFINITY;
        let mut accel = f64::INFINITY;
        if d > 1e-9 {
            rate = rate.min(speed / d);
            accel = accel.min(l.max_cart_accel / d);
        }
        for span in [theta, j_delta] {
            if span > 1e-9 {
                rate = rate.min(l.max_joint_speed / span);
                accel = accel.min(ang_accel / span);
            }
        }
        let profile = Profile::new(rate, accel);
        let total = profile.duration();
        let t0 = world.arm.time;
        let dt = l.safety_check_interval;

        let pose_at = |s: f64| start.interpolate(&target, s);
        let sample_at = |s: f64, sd: f64, sdd: f64| TickSample {
            xyz: p0.lerp(p1, s),
            speed: d * sd,
            accel: d * sdd.abs(),
            angular_rate: theta * sd,
            joint_rate: j_pair.as_ref().map(|_| j_delta * sd),
        };

        let mut k = 1u64;
        loop {
            let t = (k as f64 * dt).min(total);
            // Timer expiry interrupts the move at the exact deadline.
            let (abort_t, reason) = if t0 + t > deadline.at {
                ((deadline.at - t0).max(0.0), None)
            } else {
                let (s, sd, sdd) = profile.sample(t);
                world.arm.time = t0 + t;
                world.arm.tcp = pose_at(s);
                match self.tick(world, sample_at(s, sd, sdd)) {
                    Ok(()) if t >= total => break,
                    Ok(()) => {
                        k += 1;
                        continue;
                    }
                    Err(msg) => (t, Some(msg)),
                }
            };
            // Controlled stop along the path at the profile deceleration.
            let (s, sd, _) = profile.sample(abort_t);
            let t_stop = sd / profile.accel;
            let s_stop = (s + sd * sd / (2.0 * profile.accel)).min(1.0);
            world.arm.time = t0 + abort_t + t_stop;
            world.arm.tcp = pose_at(s_stop);
            world.arm.joints = None;
            world.log(TraceEvent::Abort {
                t: t0 + abort_t,
                reason: reason.clone().unwrap_or_else(|| "deadline reached during motion".into()),
            });
            return Err(match reason {
                Some(msg) => ExecError::SafetyAbort(msg),
                None => deadline.error(t0 + abort_t),
            });
        }
        world.arm.tcp = target;
        world.arm.joints = joints.cloned();
        if world.arm.gripper.holding.is_some() {
            world.arm.moved_since_grasp = true;
        }
        world.log(TraceEvent::Move {
            t: world.arm.time,
            from: p0,
            to: p1,
            duration: total,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_matches_closed_form() {
        for &(d, v, a) in &[(300.0, 150.0, 1000.0), (10.0, 150.0, 1000.0), (400.0, 20.0, 50.0), (1.0, 1.0, 1.0)] {
            let p = Profile::new(v / d, a / d);
            assert!((p.duration() - trapezoid_duration(d, v, a)).abs() < 1e-9, "{d} {v} {a}");
            let (s, sd, _) = p.sample(p.duration());
            assert_eq!((s, sd), (1.0, 0.0));
        }
        assert!((trapezoid_duration(300.0, 150.0, 1000.0) - 2.15).abs() < 1e-12);
    }

    #[test]
    fn profile_is_continuous_and_monotone() {
        let p = Profile::new(0.5, 2.0);
        let mut prev = 0.0;
        let n = 10_000;
        for i in 0..=n {
            let t = p.duration() * i as f64 / n as f64;
            let (s, sd, _) = p.sample(t);
            assert!(s >= prev - 1e-12 && s <= 1.0 + 1e-12);
            assert!(sd <= 0.5 + 1e-12);
            prev = s;
        }
    }
}
