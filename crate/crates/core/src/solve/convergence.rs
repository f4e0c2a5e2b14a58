//! Refinement studies for the manufactured Poisson problem.

use super::galerkin::{compute_errors, solve_poisson, ErrorNorms, Manufactured};
use crate::construct_g1::build;
use crate::error::{Error, Result};
use crate::evaluate::Variant;
use crate::mesh::ControlNet;
use crate::refine::refine;
use serde::{Deserialize, Serialize};

pub const MAX_STUDY_LEVELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub n_el: usize,
    pub n_dofs: usize,
    pub h: f64,
    pub errors: ErrorNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub variant: Variant,
    pub problem: String,
    pub levels: Vec<LevelResult>,
    /// `log2(e_k / e_{k+1})` between consecutive levels.
    pub orders: Vec<ErrorNorms>,
}

impl ConvergenceReport {
    pub const CSV_HEADER: &'static str = "variant,level,n_el,n_dofs,h,e_l2,e_linf,e_h1";

    pub fn csv_rows(&self) -> Vec<String> {
        self.levels
            .iter()
            .map(|l| {
                format!(
                    "{},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e}",
                    self.variant, l.level, l.n_el, l.n_dofs, l.h, l.errors.l2, l.errors.linf, l.errors.h1
                )
            })
            .collect()
    }

    /// Whitespace-separated `h e_l2 e_linf e_h1` columns for plotting.
    pub fn dat(&self) -> String {
        let mut out = format!("# {} {}\n# h e_l2 e_linf e_h1\n", self.variant, self.problem);
        for l in &self.levels {
            out.push_str(&format!("{:.8e} {:.8e} {:.8e} {:.8e}\n", l.h, l.errors.l2, l.errors.linf, l.errors.h1));
        }
        out
    }

    pub fn last_order(&self) -> Option<ErrorNorms> {
        self.orders.last().copied()
    }

    /// Every norm strictly smaller at every finer level.
    pub fn strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| {
            let (a, b) = (w[0].errors, w[1].errors);
            b.l2 < a.l2 && b.linf < a.linf && b.h1 < a.h1
        })
    }
}

fn order(a: f64, b: f64) -> f64 {
    (a / b).ln() / 2f64.ln()
}

/// Solves on `net0` and on `levels - 1` successive refinements, rebuilding
/// the construction from scratch on every level.
pub fn convergence_study(net0: &ControlNet, variant: Variant, levels: usize, problem: &Manufactured) -> Result<ConvergenceReport> {
    if levels == 0 || levels > MAX_STUDY_LEVELS {
        return Err(Error::Resource(format!("{levels} study levels requested, between 1 and {MAX_STUDY_LEVELS} allowed")));
    }
    let mut net = net0.clone();
    let mut results = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            net = refine(&net)?;
        }
        let surface = build(&net, variant)?;
        let u = solve_poisson(&surface, problem)?;
        results.push(LevelResult {
            level,
            n_el: surface.n_elements(),
            n_dofs: surface.n_basis(),
            h: surface.mean_element_size()?,
            errors: compute_errors(&surface, &u, problem)?,
        });
    }
    let orders = results
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].errors, w[1].errors);
            ErrorNorms { l2: order(a.l2, b.l2), linf: order(a.linf, b.linf), h1: order(a.h1, b.h1) }
        })
        .collect();
    Ok(ConvergenceReport { variant, problem: problem.name.to_string(), levels: results, orders })
}
