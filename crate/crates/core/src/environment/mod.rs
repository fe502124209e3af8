//! World state: terrain, road, obstacles, lighting and weather.

mod conditions;
mod scenario;
mod terrain;

pub use conditions::{illumination, set_conditions, set_conditions_named, EnvironmentState, Weather, MOONLIGHT_FLOOR, SOLAR_NOON};
pub use scenario::{
    collision_check, dirt_road_herd, CollisionMonitor, Footprint, Mount, Obstacle, RoadSample, Scenario, ScenarioFile,
    DTC_CAP,
};
pub use terrain::{rolling_height, Terrain, TerrainSpec};
