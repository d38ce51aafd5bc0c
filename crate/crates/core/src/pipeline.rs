//! plan -> design -> bases -> report, plus file persistence.

use std::path::Path;

use thiserror::Error;

use crate::designs::{affine_resolvable_design, Design, DesignError};
use crate::mubgen::{assemble_bases, check_claims_with, BasisSet, MubError, SpectrumReport, Tolerances};
use crate::planner::{FactorizationPlan, PlanError, Resources, Route};
use crate::trims::{extend_union_with, shrink_const_with, trim_minus_with, trim_plus_with, Choice, TrimError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Trim(#[from] TrimError),
    #[error(transparent)]
    Mub(#[from] MubError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub choice: Choice,
    pub append_identity: bool,
    pub tolerances: Tolerances,
}

pub struct BuildOutput {
    pub plan: FactorizationPlan,
    pub design: Design,
    pub bases: BasisSet,
    pub report: SpectrumReport,
}

/// The design the plan's route calls for.
pub fn build_design(
    plan: &FactorizationPlan,
    res: &Resources,
    choice: Choice,
) -> Result<Design, PipelineError> {
    let q = plan.q.q();
    let (e, f) = (plan.e as u64, plan.f as u64);
    Ok(match plan.route {
        Route::SquareMub => affine_resolvable_design(q)?,
        Route::TrimPlus => trim_plus_with(q, e, f, choice)?,
        Route::TrimMinus => trim_minus_with(q, e, f, choice)?,
        Route::ShrinkConst | Route::ExtendConst => {
            let c = plan.constant.expect("constant-block routes carry a layout");
            let mols = res.mols.get(c.side)?;
            if plan.route == Route::ShrinkConst {
                shrink_const_with(c.side, c.offset, &mols, choice)?
            } else {
                extend_union_with(c.side, c.offset, &mols, choice)?
            }
        }
    })
}

pub fn build(
    plan: &FactorizationPlan,
    res: &Resources,
    opts: BuildOptions,
) -> Result<BuildOutput, PipelineError> {
    let design = build_design(plan, res, opts.choice)?;
    let mut bases = assemble_bases(&design, plan.target, &res.hadamard)?;
    if opts.append_identity {
        bases.append_identity();
    }
    let report = check_claims_with(&design, &bases, plan, &opts.tolerances)?;
    Ok(BuildOutput {
        plan: plan.clone(),
        design,
        bases,
        report,
    })
}

pub const PLAN_FILE: &str = "plan.json";
pub const DESIGN_FILE: &str = "design.json";
pub const BASES_FILE: &str = "bases.json";
pub const REPORT_FILE: &str = "report.json";

fn write(dir: &Path, name: &str, text: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read(dir: &Path, name: &str) -> Result<String, PipelineError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl BuildOutput {
    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        write(dir, PLAN_FILE, &self.plan.to_json())?;
        write(dir, DESIGN_FILE, &self.design.to_json())?;
        write(dir, BASES_FILE, &self.bases.to_json())?;
        write(dir, REPORT_FILE, &self.report.to_json())
    }
}

/// Reloads plan, design and bases from a build directory and recomputes
/// the report.
pub fn analyze_dir(dir: &Path, tol: &Tolerances) -> Result<BuildOutput, PipelineError> {
    let parse = |name: &str, message: String| PipelineError::Parse {
        path: dir.join(name).display().to_string(),
        message,
    };
    let plan = FactorizationPlan::from_json(&read(dir, PLAN_FILE)?)
        .map_err(|e| parse(PLAN_FILE, e.to_string()))?;
    let design = Design::from_json(&read(dir, DESIGN_FILE)?)?;
    let bases = BasisSet::from_json(&read(dir, BASES_FILE)?)?;
    let report = check_claims_with(&design, &bases, &plan, tol)?;
    Ok(BuildOutput {
        plan,
        design,
        bases,
        report,
    })
}

pub fn load_report(dir: &Path) -> Result<SpectrumReport, PipelineError> {
    SpectrumReport::from_json(&read(dir, REPORT_FILE)?).map_err(|e| PipelineError::Parse {
        path: dir.join(REPORT_FILE).display().to_string(),
        message: e.to_string(),
    })
}
