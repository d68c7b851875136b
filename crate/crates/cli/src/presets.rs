//! Experiment presets shipped with the binary; each is a manifest file under `presets/`.

use crate::config::RunManifest;
use crate::error::{CliError, Result};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../presets/", $name, ".toml")))),*]
    };
}

/// `(name, manifest text)` pairs.
pub const PRESETS: &[(&str, &str)] = presets![
    "ball_gallery",
    "cube_gallery",
    "disk_gallery",
    "eigen_disk",
    "eigen_equilateral_triangle",
    "eigen_rectangle",
    "eigen_rotated_square",
    "eigen_three_quarter_disk",
    "five_fold_star_gallery",
    "hexagon_gallery",
    "pentagon_gallery",
    "square_eigen_n1024",
    "square_eigen_n128",
    "square_eigen_n256",
    "square_eigen_n512",
    "square_eigen_n64",
    "square_gallery",
    "square_relaxation",
    "tetrahedron_gallery",
    "three_fold_star_gallery",
    "torus3d_gallery",
    "torus_gallery",
    "torus_k3_adaptive_alg1",
    "torus_k3_adaptive_alg2",
    "torus_k3_alg1",
    "torus_k3_alg2",
    "torus_k5_adaptive",
    "torus_k5_fixed",
    "triangle_gallery",
];

/// Text of a preset manifest.
pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| CliError::UnknownPreset(name.to_string()))
}

pub fn load_preset(name: &str) -> Result<RunManifest> {
    RunManifest::parse(preset_text(name)?, &format!("preset {name}"))
}

/// First comment line of a preset, used as its description.
pub fn describe(text: &str) -> &str {
    text.lines()
        .find_map(|l| l.strip_prefix('#'))
        .map(str::trim)
        .unwrap_or("")
}
