//! Scene data model: objects, support tree, layouts and their file formats.

mod io;
mod model;
mod tree;

use std::path::PathBuf;

use thiserror::Error;

use crate::geom::GeomError;

pub use io::{
    layout_from_json, layout_to_json, load_layout, load_scene, parse_obj, parse_obj_mesh,
    parse_scene, save_layout, LoadedScene, ObjectSpec, PoseSpec, SceneSpec, TreeEntrySpec,
    DEFAULT_DENSITY,
};
pub use model::{
    objects_intersect, Layout, LocalGroup, Relation, Scene, SceneObject, Stage, SupportKind,
    SupportNode,
};
pub use tree::SceneTree;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene file: {0}")]
    Parse(String),
    #[error("invalid field '{field}' of object '{id}': {msg}")]
    InvalidField {
        id: String,
        field: String,
        msg: String,
    },
    #[error("duplicate object id '{id}'")]
    DuplicateId { id: String },
    #[error("object '{id}': mesh file {path} not found")]
    MissingMesh { id: String, path: PathBuf },
    #[error("object '{id}': {source}")]
    Geometry {
        id: String,
        #[source]
        source: GeomError,
    },
    #[error("object '{id}' has no pose in the layout")]
    MissingPose { id: String },
    #[error("cycle in support tree through '{id}'")]
    Cycle { id: String },
    #[error("object '{id}' has more than one parent entry")]
    MultipleParents { id: String },
    #[error("object '{id}' references unknown parent '{parent}'")]
    DanglingParent { id: String, parent: String },
    #[error("object '{id}': relation '{relation:?}' is not allowed under '{parent}'")]
    InvalidRelation {
        id: String,
        relation: Relation,
        parent: String,
    },
    #[error("object '{id}' has no support-tree entry")]
    MissingParent { id: String },
    #[error("unknown object '{id}'")]
    UnknownObject { id: String },
}

impl SceneError {
    /// Stable machine-readable code for each failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            SceneError::Io { .. } => "io",
            SceneError::Parse(_) => "parse",
            SceneError::InvalidField { .. } => "invalid_field",
            SceneError::DuplicateId { .. } => "duplicate_id",
            SceneError::MissingMesh { .. } => "missing_mesh",
            SceneError::Geometry { .. } => "geometry",
            SceneError::MissingPose { .. } => "missing_pose",
            SceneError::Cycle { .. } => "cycle",
            SceneError::MultipleParents { .. } => "multiple_parents",
            SceneError::DanglingParent { .. } => "dangling_parent",
            SceneError::InvalidRelation { .. } => "invalid_relation",
            SceneError::MissingParent { .. } => "missing_parent",
            SceneError::UnknownObject { .. } => "unknown_object",
        }
    }
}
