//! Domain masks: the indicator `ψ` of the physical domain inside the periodic box.
//!
//! Shapes are closed sets tested at grid nodes with a small absolute tolerance, so nodes that
//! lie on a boundary belong to the domain. Default sizes:
//!
//! | shape | size parameter | default |
//! |-------|----------------|---------|
//! | `square`, `rotated_square` | side | π |
//! | `rectangle` | long side (short side is half) | π |
//! | `equilateral_triangle` | side | π |
//! | `disk`, `three_quarter_disk` | radius | π/2 |
//! | `pentagon`, `hexagon` | circumradius | π/2 |
//! | `three_fold_star`, `five_fold_star` | outer radius (inner is half) | π/2 |
//! | `cube` | side | π |
//! | `ball` | radius | π/2 |
//! | `tetrahedron` | circumradius | 3π/4 |
//!
//! Polygons and stars put a vertex on the `+x₂` axis, the tetrahedron a vertex on `+x₃`, and the
//! three-quarter disk omits the quadrant `x₁ > 0, x₂ < 0`. `rotated_square` defaults to a
//! rotation of π/4; every 2D shape accepts an explicit rotation about the origin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeName {
    Torus,
    Square,
    RotatedSquare,
    Rectangle,
    EquilateralTriangle,
    Disk,
    ThreeQuarterDisk,
    Pentagon,
    Hexagon,
    ThreeFoldStar,
    FiveFoldStar,
    Cube,
    Ball,
    Tetrahedron,
}

impl ShapeName {
    pub const ALL: [ShapeName; 14] = [
        ShapeName::Torus,
        ShapeName::Square,
        ShapeName::RotatedSquare,
        ShapeName::Rectangle,
        ShapeName::EquilateralTriangle,
        ShapeName::Disk,
        ShapeName::ThreeQuarterDisk,
        ShapeName::Pentagon,
        ShapeName::Hexagon,
        ShapeName::ThreeFoldStar,
        ShapeName::FiveFoldStar,
        ShapeName::Cube,
        ShapeName::Ball,
        ShapeName::Tetrahedron,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeName::Torus => "torus",
            ShapeName::Square => "square",
            ShapeName::RotatedSquare => "rotated_square",
            ShapeName::Rectangle => "rectangle",
            ShapeName::EquilateralTriangle => "equilateral_triangle",
            ShapeName::Disk => "disk",
            ShapeName::ThreeQuarterDisk => "three_quarter_disk",
            ShapeName::Pentagon => "pentagon",
            ShapeName::Hexagon => "hexagon",
            ShapeName::ThreeFoldStar => "three_fold_star",
            ShapeName::FiveFoldStar => "five_fold_star",
            ShapeName::Cube => "cube",
            ShapeName::Ball => "ball",
            ShapeName::Tetrahedron => "tetrahedron",
        }
    }

    /// Dimension the shape lives in; `None` for the torus, which exists in both.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ShapeName::Torus => None,
            ShapeName::Cube | ShapeName::Ball | ShapeName::Tetrahedron => Some(3),
            _ => Some(2),
        }
    }

    pub fn default_size(&self) -> f64 {
        match self {
            ShapeName::Torus => 2.0 * PI,
            ShapeName::Square
            | ShapeName::RotatedSquare
            | ShapeName::Rectangle
            | ShapeName::EquilateralTriangle
            | ShapeName::Cube => PI,
            ShapeName::Disk
            | ShapeName::ThreeQuarterDisk
            | ShapeName::Pentagon
            | ShapeName::Hexagon
            | ShapeName::ThreeFoldStar
            | ShapeName::FiveFoldStar
            | ShapeName::Ball => PI / 2.0,
            ShapeName::Tetrahedron => 0.75 * PI,
        }
    }

    pub fn default_rotation(&self) -> f64 {
        match self {
            ShapeName::RotatedSquare => PI / 4.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ShapeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeName::ALL
            .into_iter()
            .find(|shape| shape.as_str() == s)
            .ok_or_else(|| Error::UnknownShape(s.to_string()))
    }
}

/// Optional overrides of a shape's size and rotation (radians, 2D only).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShapeParams {
    pub size: Option<f64>,
    pub rotation: Option<f64>,
}

/// Indicator `ψ` of a domain inside the computational box.
#[derive(Debug, Clone)]
pub struct DomainMask {
    shape: ShapeName,
    size: f64,
    rotation: f64,
    indicator: ScalarField,
    cells: usize,
}

impl DomainMask {
    pub fn shape(&self) -> ShapeName {
        self.shape
    }

    pub fn name(&self) -> &'static str {
        self.shape.as_str()
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn spec(&self) -> &GridSpec {
        self.indicator.spec()
    }

    pub fn indicator(&self) -> &ScalarField {
        &self.indicator
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.indicator.values()[idx] != 0.0
    }

    /// Number of nodes with `ψ = 1`.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn is_torus(&self) -> bool {
        self.shape == ShapeName::Torus
    }
}

/// Builds the mask of `shape` on `spec`.
pub fn make_mask(spec: GridSpec, shape: ShapeName, params: ShapeParams) -> Result<DomainMask> {
    let invalid = |reason: String| Error::InvalidShape {
        shape: shape.to_string(),
        reason,
    };
    if let Some(dim) = shape.dim() {
        if dim != spec.dim() {
            return Err(invalid(format!(
                "shape is {dim}-dimensional but the grid is {}-dimensional",
                spec.dim()
            )));
        }
    }
    let size = params.size.unwrap_or_else(|| shape.default_size());
    if !(size.is_finite() && size > 0.0) {
        return Err(invalid(format!("size must be positive, got {size}")));
    }
    let rotation = params.rotation.unwrap_or_else(|| shape.default_rotation());
    if !rotation.is_finite() {
        return Err(invalid(format!("rotation must be finite, got {rotation}")));
    }
    if spec.dim() == 3 && rotation != 0.0 {
        return Err(invalid("rotation is only supported in 2D".into()));
    }

    let test = inside_test(shape, size);
    let (c, s) = (rotation.cos(), rotation.sin());
    let indicator = ScalarField::from_fn(spec, |p| {
        // Undo the rotation so the canonical shape can be tested.
        let q = [c * p[0] + s * p[1], -s * p[0] + c * p[1], p[2]];
        if test(q) {
            1.0
        } else {
            0.0
        }
    });
    let cells = indicator.values().iter().filter(|&&v| v != 0.0).count();
    if cells == 0 {
        return Err(Error::EmptyDomain);
    }
    Ok(DomainMask {
        shape,
        size,
        rotation,
        indicator,
        cells,
    })
}

/// Pointwise product `f·ψ`.
pub fn restrict(f: &ScalarField, mask: &DomainMask) -> Result<ScalarField> {
    f.mul(mask.indicator())
}

fn inside_test(shape: ShapeName, size: f64) -> Box<dyn Fn([f64; 3]) -> bool> {
    let eps = BOUNDARY_EPS;
    match shape {
        ShapeName::Torus => Box::new(|_| true),
        ShapeName::Square | ShapeName::RotatedSquare => {
            let a = size / 2.0 + eps;
            Box::new(move |p| p[0].abs() <= a && p[1].abs() <= a)
        }
        ShapeName::Rectangle => {
            let (a, b) = (size / 2.0 + eps, size / 4.0 + eps);
            Box::new(move |p| p[0].abs() <= a && p[1].abs() <= b)
        }
        ShapeName::Disk => {
            let r = size + eps;
            Box::new(move |p| p[0].hypot(p[1]) <= r)
        }
        ShapeName::ThreeQuarterDisk => {
            let r = size + eps;
            Box::new(move |p| p[0].hypot(p[1]) <= r && !(p[0] > eps && p[1] < -eps))
        }
        ShapeName::EquilateralTriangle => polygon(regular_polygon(3, size / 3f64.sqrt())),
        ShapeName::Pentagon => polygon(regular_polygon(5, size)),
        ShapeName::Hexagon => polygon(regular_polygon(6, size)),
        ShapeName::ThreeFoldStar => polygon(star_polygon(3, size, size / 2.0)),
        ShapeName::FiveFoldStar => polygon(star_polygon(5, size, size / 2.0)),
        ShapeName::Cube => {
            let a = size / 2.0 + eps;
            Box::new(move |p| p.iter().all(|x| x.abs() <= a))
        }
        ShapeName::Ball => {
            let r = size + eps;
            Box::new(move |p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= r)
        }
        ShapeName::Tetrahedron => {
            let vertices = tetrahedron_vertices(size);
            // Face opposite vertex v has outward normal -v/|v| at distance R/3 from the center.
            let bound = size * size / 3.0 + eps * size;
            Box::new(move |p| {
                vertices
                    .iter()
                    .all(|v| -(v[0] * p[0] + v[1] * p[1] + v[2] * p[2]) <= bound)
            })
        }
    }
}

fn polygon(vertices: Vec<[f64; 2]>) -> Box<dyn Fn([f64; 3]) -> bool> {
    Box::new(move |p| polygon_contains(&vertices, [p[0], p[1]], BOUNDARY_EPS))
}

/// Regular `m`-gon with circumradius `r` and a vertex on the `+y` axis.
pub fn regular_polygon(m: usize, r: f64) -> Vec<[f64; 2]> {
    (0..m)
        .map(|j| {
            let theta = PI / 2.0 + 2.0 * PI * j as f64 / m as f64;
            [r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

/// Star with `points` tips at radius `outer` alternating with notches at radius `inner`.
pub fn star_polygon(points: usize, outer: f64, inner: f64) -> Vec<[f64; 2]> {
    (0..2 * points)
        .map(|j| {
            let theta = PI / 2.0 + PI * j as f64 / points as f64;
            let r = if j % 2 == 0 { outer } else { inner };
            [r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

/// Regular tetrahedron with circumradius `r`, one vertex on `+z`.
pub fn tetrahedron_vertices(r: f64) -> [[f64; 3]; 4] {
    let rho = r * 8f64.sqrt() / 3.0;
    let z = -r / 3.0;
    let base = |k: f64| {
        let theta = 2.0 * PI * k / 3.0;
        [rho * theta.cos(), rho * theta.sin(), z]
    };
    [[0.0, 0.0, r], base(0.0), base(1.0), base(2.0)]
}

/// Closed point-in-polygon test: points within `eps` of an edge are inside.
pub fn polygon_contains(vertices: &[[f64; 2]], p: [f64; 2], eps: f64) -> bool {
    let m = vertices.len();
    let mut inside = false;
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        if segment_distance(a, b, p) <= eps {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let w = [p[0] - a[0], p[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (w[0] - t * d[0]).hypot(w[1] - t * d[1])
}
