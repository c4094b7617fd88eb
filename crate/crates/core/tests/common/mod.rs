#![allow(dead_code)]

use std::path::PathBuf;

use ragarm_core::executor::{Executor, World};
use ragarm_core::perception::{PerceptionConfig, SimObject, SimScene};
use ragarm_core::planner::{parse_plan, validate_plan, ParamBounds, ValidatedPlan};
use ragarm_core::Vec3;

pub const HOME: Vec3 = Vec3 { x: 400.0, y: 0.0, z: 350.0 };

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn object(tag_id: u32, label: &str, position: Vec3) -> SimObject {
    SimObject {
        tag_id,
        label: label.into(),
        position,
        tag_half_size: 15.0,
        graspable: true,
        width_mm: 30.0,
        stiffness: 4.0,
        held: false,
    }
}

pub fn scene(objects: Vec<SimObject>) -> SimScene {
    SimScene::new(objects, vec![], 0.0, 7).unwrap()
}

pub fn world(scene: SimScene) -> World {
    World::new(scene, PerceptionConfig::default(), HOME)
}

pub fn world_at(scene: SimScene, tcp: Vec3) -> World {
    World::new(scene, PerceptionConfig::default(), tcp)
}

pub fn validated(ex: &Executor, json: &str) -> ValidatedPlan {
    let plan = parse_plan(json).unwrap();
    validate_plan(&plan, ex.limits(), ex.bounds(), &ParamBounds::default()).unwrap()
}
