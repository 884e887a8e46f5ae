//! JSON scene documents.
//!
//! ```json
//! {"triangles": [{"v1": [x, y, z], "v2": [..], "v3": [..], "color": [r, g, b], "alpha": a}]}
//! ```
//!
//! Every value lies in `[0, 1]`. Numbers are written in shortest round-trip
//! form, so a saved scene reloads bit-exactly.

use std::path::Path;

use thiserror::Error;

use crate::genome::{GenomeError, Scene};

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("field `triangles[{triangle}].{field}`: {value} is outside [0, 1]")]
    Invalid {
        triangle: usize,
        field: &'static str,
        value: f64,
    },
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scenes always serialise")
}

pub fn scene_from_json(text: &str) -> Result<Scene, SceneFileError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let scene: Scene = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        SceneFileError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    scene.validate().map_err(|e| match e {
        GenomeError::OutOfRange {
            triangle,
            field,
            value,
        } => SceneFileError::Invalid {
            triangle,
            field,
            value,
        },
        other => unreachable!("scene validation only reports ranges: {other}"),
    })?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneFileError> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_json(scene)).map_err(|source| SceneFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scene_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Triangle;
    use proptest::prelude::*;

    #[test]
    fn empty_scene() {
        let scene = scene_from_json(r#"{"triangles": []}"#).unwrap();
        assert!(scene.is_empty());
    }

    #[test]
    fn parse_error_names_field_and_line() {
        let text = "{\"triangles\": [\n  {\"v1\": [0, 0, 0], \"v2\": [0, 0, 0], \"v3\": [0, 0], \"color\": [1, 1, 1], \"alpha\": 1}\n]}";
        match scene_from_json(text).unwrap_err() {
            SceneFileError::Parse { line, field, .. } => {
                assert_eq!(line, 2);
                assert!(field.starts_with("triangles[0].v3"), "{field}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn out_of_range_is_reported() {
        let text = r#"{"triangles": [{"v1": [0, 0, 0], "v2": [0, 0, 0], "v3": [0, 0, 0], "color": [1, 1.5, 1], "alpha": 1}]}"#;
        match scene_from_json(text).unwrap_err() {
            SceneFileError::Invalid {
                triangle, field, ..
            } => {
                assert_eq!(triangle, 0);
                assert_eq!(field, "color.g");
            }
            other => panic!("unexpected {other}"),
        }
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0f64..=1.0
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(values in prop::collection::vec(unit(), 13 * 3)) {
            let scene = Scene::new(values.chunks_exact(13).map(|c| {
                Triangle::from_components(c.try_into().unwrap())
            }).collect());
            prop_assert_eq!(scene_from_json(&scene_to_json(&scene)).unwrap(), scene);
        }
    }
}
