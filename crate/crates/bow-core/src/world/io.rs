//! World file format: a single JSON document.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "bounds": {"min": [-10.0, -10.0], "max": [10.0, 10.0]},
//!   "obstacles": [{"type": "circle", "center": [1.0, 2.0], "radius": 0.3}],
//!   "start": [-6.75, 0.0],
//!   "goal": [6.75, 0.0]
//! }
//! ```
//!
//! Obstacle types are `circle`, `box`, `polygon`, and `sphere`; all lengths
//! are meters. Parsing is done by hand over a JSON value so errors can name
//! the offending field and unknown obstacle types are reported as
//! unsupported rather than as generic parse failures.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::geometry::Aabb;
use crate::scalar::{lit, Real};

use super::{Obstacle, World, WorldError};

pub fn save_world<T: Real + serde::Serialize>(
    world: &World<T>,
    path: impl AsRef<Path>,
) -> Result<(), WorldError> {
    let json = world_to_json(world)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_world<T: Real>(path: impl AsRef<Path>) -> Result<World<T>, WorldError> {
    let text = fs::read_to_string(&path)?;
    world_from_json(&text)
}

pub fn world_to_json<T: Real + serde::Serialize>(world: &World<T>) -> Result<String, WorldError> {
    serde_json::to_string_pretty(world).map_err(|e| WorldError::Parse(e.to_string()))
}

pub fn world_from_json<T: Real>(text: &str) -> Result<World<T>, WorldError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| WorldError::Parse(format!("invalid JSON: {e}")))?;
    let root = as_object(&value, "world")?;

    let dimension = field(root, "dimension", "world")
        .and_then(|v| as_usize(v, "dimension"))?;
    let bounds_value = field(root, "bounds", "world")?;
    let bounds_obj = as_object(bounds_value, "bounds")?;
    let bounds = Aabb::new(
        vector(field(bounds_obj, "min", "bounds")?, "bounds.min")?,
        vector(field(bounds_obj, "max", "bounds")?, "bounds.max")?,
    );

    let obstacles_value = field(root, "obstacles", "world")?;
    let obstacle_list = obstacles_value
        .as_array()
        .ok_or_else(|| WorldError::Parse("field \"obstacles\" must be an array".into()))?;
    let mut obstacles = Vec::with_capacity(obstacle_list.len());
    for (i, entry) in obstacle_list.iter().enumerate() {
        obstacles.push(parse_obstacle(entry, i)?);
    }

    let mut world = World::new(dimension, bounds, obstacles)?;
    if let Some(v) = root.get("start") {
        world.start = Some(vector(v, "start")?);
    }
    if let Some(v) = root.get("goal") {
        world.goal = Some(vector(v, "goal")?);
    }
    world.validate()?;
    Ok(world)
}

fn parse_obstacle<T: Real>(value: &Value, index: usize) -> Result<Obstacle<T>, WorldError> {
    let ctx = format!("obstacles[{index}]");
    let obj = as_object(value, &ctx)?;
    let tag = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| WorldError::Parse(format!("{ctx}: missing string field \"type\"")))?;
    let obstacle = match tag {
        "circle" => Obstacle::Circle {
            center: pair(field(obj, "center", &ctx)?, &format!("{ctx}.center"))?,
            radius: number(field(obj, "radius", &ctx)?, &format!("{ctx}.radius"))?,
        },
        "box" => Obstacle::Box {
            min: vector(field(obj, "min", &ctx)?, &format!("{ctx}.min"))?,
            max: vector(field(obj, "max", &ctx)?, &format!("{ctx}.max"))?,
        },
        "polygon" => {
            let raw = field(obj, "vertices", &ctx)?
                .as_array()
                .ok_or_else(|| WorldError::Parse(format!("{ctx}.vertices must be an array")))?;
            let mut vertices = Vec::with_capacity(raw.len());
            for (j, v) in raw.iter().enumerate() {
                vertices.push(pair(v, &format!("{ctx}.vertices[{j}]"))?);
            }
            Obstacle::Polygon { vertices }
        }
        "sphere" => Obstacle::Sphere {
            center: triple(field(obj, "center", &ctx)?, &format!("{ctx}.center"))?,
            radius: number(field(obj, "radius", &ctx)?, &format!("{ctx}.radius"))?,
        },
        other => return Err(WorldError::UnsupportedShape(other.to_string())),
    };
    obstacle.validate()?;
    Ok(obstacle)
}

fn as_object<'v>(
    value: &'v Value,
    ctx: &str,
) -> Result<&'v serde_json::Map<String, Value>, WorldError> {
    value
        .as_object()
        .ok_or_else(|| WorldError::Parse(format!("{ctx} must be a JSON object")))
}

fn field<'v>(
    obj: &'v serde_json::Map<String, Value>,
    name: &str,
    ctx: &str,
) -> Result<&'v Value, WorldError> {
    obj.get(name)
        .ok_or_else(|| WorldError::Parse(format!("{ctx}: missing field \"{name}\"")))
}

fn as_usize(value: &Value, ctx: &str) -> Result<usize, WorldError> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| WorldError::Parse(format!("field \"{ctx}\" must be a non-negative integer")))
}

fn number<T: Real>(value: &Value, ctx: &str) -> Result<T, WorldError> {
    value
        .as_f64()
        .map(lit::<T>)
        .ok_or_else(|| WorldError::Parse(format!("field \"{ctx}\" must be a number")))
}

fn vector<T: Real>(value: &Value, ctx: &str) -> Result<Vec<T>, WorldError> {
    let arr = value
        .as_array()
        .ok_or_else(|| WorldError::Parse(format!("field \"{ctx}\" must be an array of numbers")))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| number(v, &format!("{ctx}[{i}]")))
        .collect()
}

fn pair<T: Real>(value: &Value, ctx: &str) -> Result<[T; 2], WorldError> {
    let v = vector::<T>(value, ctx)?;
    <[T; 2]>::try_from(v)
        .map_err(|_| WorldError::Parse(format!("field \"{ctx}\" must have exactly 2 elements")))
}

fn triple<T: Real>(value: &Value, ctx: &str) -> Result<[T; 3], WorldError> {
    let v = vector::<T>(value, ctx)?;
    <[T; 3]>::try_from(v)
        .map_err(|_| WorldError::Parse(format!("field \"{ctx}\" must have exactly 3 elements")))
}
