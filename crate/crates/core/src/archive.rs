//! Self-contained JSON archive of a constructed surface.

use crate::construct_g1::BasisDiagnostics;
use crate::error::{Error, Result};
use crate::evaluate::{GSplineSurface, Variant};
use crate::extraction::ElementExtraction;
use crate::mesh::{ControlNet, Point3};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub positions: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub element: usize,
    pub degree: usize,
    pub rational: bool,
    pub basis: Vec<usize>,
    /// One row per entry of `basis`, `(degree+1)^2` Bernstein coefficients each.
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceArchive {
    pub format_version: u32,
    pub variant: Variant,
    pub net: NetRecord,
    pub elements: Vec<ExtractionRecord>,
    pub diagnostics: Vec<BasisDiagnostics>,
}

impl NetRecord {
    pub fn from_net(net: &ControlNet) -> Self {
        Self {
            positions: net.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: net.cnet.faces().to_vec(),
        }
    }

    pub fn to_net(&self) -> Result<ControlNet> {
        let positions = self.positions.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        ControlNet::from_faces(positions, self.faces.clone())
    }
}

impl ExtractionRecord {
    fn from_extraction(ext: &ElementExtraction) -> Self {
        Self {
            element: ext.element,
            degree: ext.degree,
            rational: ext.rational,
            basis: ext.basis.clone(),
            coeffs: ext.coeffs.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    fn to_extraction(&self, n_basis: usize) -> Result<ElementExtraction> {
        if self.degree != 3 && self.degree != 5 {
            return Err(Error::Format(format!("element {}: unsupported degree {}", self.element, self.degree)));
        }
        let nb = (self.degree + 1) * (self.degree + 1);
        if self.coeffs.len() != self.basis.len() || self.coeffs.iter().any(|r| r.len() != nb) {
            return Err(Error::Format(format!("element {}: extraction matrix has the wrong shape", self.element)));
        }
        if let Some(a) = self.basis.iter().find(|&&a| a >= n_basis) {
            return Err(Error::Format(format!("element {}: basis function {a} out of range", self.element)));
        }
        Ok(ElementExtraction {
            element: self.element,
            degree: self.degree,
            basis: self.basis.clone(),
            coeffs: DMatrix::from_fn(self.basis.len(), nb, |r, k| self.coeffs[r][k]),
            rational: self.rational,
        })
    }
}

impl SurfaceArchive {
    pub fn from_surface(surface: &GSplineSurface) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            variant: surface.variant,
            net: NetRecord::from_net(&surface.net),
            elements: surface.elements.iter().map(ExtractionRecord::from_extraction).collect(),
            diagnostics: surface.diagnostics.clone(),
        }
    }

    pub fn into_surface(self) -> Result<GSplineSurface> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "archive format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let net = self.net.to_net()?;
        if self.elements.len() != net.cnet.n_faces() {
            return Err(Error::Format(format!(
                "{} extractions for {} faces",
                self.elements.len(),
                net.cnet.n_faces()
            )));
        }
        let n_basis = net.cnet.n_vertices();
        let elements = self
            .elements
            .iter()
            .enumerate()
            .map(|(f, r)| {
                if r.element != f {
                    return Err(Error::Format(format!("extraction {f} is labelled element {}", r.element)));
                }
                r.to_extraction(n_basis)
            })
            .collect::<Result<Vec<_>>>()?;
        let classes = net.cnet.classify_elements();
        Ok(GSplineSurface { net, elements, variant: self.variant, classes, diagnostics: self.diagnostics })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("surface archive: {e}")))
    }
}

pub fn save(surface: &GSplineSurface, path: impl AsRef<Path>) -> Result<()> {
    let mut text = SurfaceArchive::from_surface(surface).to_json()?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<GSplineSurface> {
    let text = std::fs::read_to_string(path)?;
    SurfaceArchive::from_json(&text)?.into_surface()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build, nets};

    #[test]
    fn round_trip_is_exact() {
        for variant in Variant::ALL {
            let s = build(&nets::fan(5, 2, 0.4), variant).unwrap();
            let text = SurfaceArchive::from_surface(&s).to_json().unwrap();
            let back = SurfaceArchive::from_json(&text).unwrap().into_surface().unwrap();
            assert_eq!(back.elements, s.elements);
            assert_eq!(back.classes, s.classes);
            assert_eq!(back.diagnostics, s.diagnostics);
            for e in 0..s.n_elements() {
                let a = s.map_point(e, 0.3, 0.7).unwrap();
                let b = back.map_point(e, 0.3, 0.7).unwrap();
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_other_versions_and_shapes() {
        let s = build(&nets::grid(2, 2), Variant::C0).unwrap();
        let mut a = SurfaceArchive::from_surface(&s);
        a.format_version = 99;
        assert!(matches!(a.clone().into_surface(), Err(Error::Format(_))));
        a.format_version = FORMAT_VERSION;
        a.elements[0].coeffs[0].pop();
        assert!(matches!(a.into_surface(), Err(Error::Format(_))));
        assert!(matches!(SurfaceArchive::from_json("{"), Err(Error::Format(_))));
    }
}
