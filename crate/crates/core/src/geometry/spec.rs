use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    make_circle, make_ellipse, make_perturbed_sphere, make_weierstrass_curve, make_weierstrass_sphere,
    seeded_phases, BoundaryGeometry, RegularityClass,
};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Circle,
    Ellipse,
    Weierstrass,
    PerturbedSphere,
    WeierstrassSphere,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// `[l, m, c]` triples for perturbed spheres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<(u32, i32, f64)>>,
    /// Draw phases from a seeded generator when `phases` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_seed: Option<u64>,
}

/// On-disk description of a geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(rename = "type")]
    pub kind: GeometryKind,
    #[serde(default)]
    pub parameters: GeometryParameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityClass>,
    #[serde(default)]
    pub levels: u32,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_base")]
    pub base: u32,
    #[serde(default)]
    pub phases: Vec<f64>,
    #[serde(default)]
    pub description: String,
}

fn default_base() -> u32 {
    2
}

impl GeometrySpec {
    pub fn weierstrass(k: u32, alpha: f64, levels: u32, amplitude: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::Weierstrass,
            parameters: GeometryParameters::default(),
            regularity: Some(RegularityClass { k, alpha }),
            levels,
            amplitude,
            base: 2,
            phases: Vec::new(),
            description: String::new(),
        }
    }

    pub fn circle(radius: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::Circle,
            parameters: GeometryParameters { radius: Some(radius), ..Default::default() },
            regularity: None,
            levels: 0,
            amplitude: 0.0,
            base: 2,
            phases: Vec::new(),
            description: String::new(),
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        GeometrySpec {
            kind: GeometryKind::Ellipse,
            parameters: GeometryParameters { a: Some(a), b: Some(b), ..Default::default() },
            ..GeometrySpec::circle(1.0)
        }
    }

    pub fn build(&self) -> Result<BoundaryGeometry> {
        let p = &self.parameters;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("missing parameter `{name}`")));
        let reg = || {
            self.regularity
                .ok_or_else(|| invalid("missing `regularity`"))
                .and_then(|r| RegularityClass::new(r.k, r.alpha))
        };
        let mut geom = match self.kind {
            GeometryKind::Circle => make_circle(need(p.radius, "radius")?)?,
            GeometryKind::Ellipse => make_ellipse(need(p.a, "a")?, need(p.b, "b")?)?,
            GeometryKind::Weierstrass => {
                let phases = if !self.phases.is_empty() {
                    self.phases.clone()
                } else if let Some(seed) = p.phase_seed {
                    seeded_phases(self.levels, seed)
                } else {
                    vec![0.0; self.levels as usize]
                };
                make_weierstrass_curve(reg()?, self.levels, self.amplitude, self.base, &phases)?
            }
            GeometryKind::PerturbedSphere => make_perturbed_sphere(p.coeffs.as_deref().unwrap_or(&[]))?,
            GeometryKind::WeierstrassSphere => make_weierstrass_sphere(reg()?, self.levels, self.amplitude, self.base)?,
        };
        if !self.description.is_empty() {
            geom.description = format!("{} ({})", self.description, geom.description);
        }
        Ok(geom)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
