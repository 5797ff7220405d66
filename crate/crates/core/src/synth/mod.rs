//! Synthetic street scenes with cars, readable plates and exact ground truth.

mod annotation;
pub mod font;
mod scene;

pub use annotation::{
    read_annotations, valid_plate_text, write_annotations, Annotation, Difficulty, ObjectKind,
};
pub use scene::{
    generate_scene, image_id, layout_scene, scene_index, CarLayout, DifficultyRule, PlateLayout,
    SceneLayout, SceneSpec, MAX_PLACEMENT_ATTEMPTS,
};
