//! Rayon drivers over the sequential core kernels. Work is split per seed or
//! per branch and reduced in input order, so results do not depend on the
//! thread count.

use rayon::prelude::*;

use fullerkit_core::continuation::{self, AdmissibilityReport, OrbitBranch, SkyJob, SkyMode};
use fullerkit_core::index::{fixed_point_index, IndexReport};
use fullerkit_core::orbits::{self, OrbitSet};
use fullerkit_core::{Config, Result, VectorFieldFamily};

pub fn sample(fam: &dyn VectorFieldFamily, t: f64, cap: f64, seeds: &[Vec<f64>], cfg: &Config) -> Result<OrbitSet> {
    orbits::check_sampling_args(fam, t, cap, seeds, cfg)?;
    let per_seed = seeds.par_iter().map(|s| orbits::seed_candidates(fam, t, cap, s, cfg)).collect();
    Ok(orbits::assemble(fam, t, cap, per_seed, cfg).0)
}

pub fn index_reports(fam: &dyn VectorFieldFamily, set: &OrbitSet, cfg: &Config) -> Result<Vec<IndexReport>> {
    set.orbits.par_iter().map(|o| fixed_point_index(o, fam, cfg)).collect()
}

pub fn continue_jobs(fam: &dyn VectorFieldFamily, jobs: &[SkyJob], p_max: f64, cfg: &Config) -> Result<Vec<OrbitBranch>> {
    jobs.par_iter().map(|j| continuation::continue_branch(fam, &j.start, j.t_target, p_max, cfg)).collect()
}

pub fn detect_sky(
    fam: &dyn VectorFieldFamily,
    seeds: &[Vec<f64>],
    p_max: f64,
    sample_cap: f64,
    mode: SkyMode,
    cfg: &Config,
) -> Result<AdmissibilityReport> {
    let s0 = sample(fam, 0.0, sample_cap, seeds, cfg)?;
    let s1 = match mode {
        SkyMode::Full => Some(sample(fam, 1.0, sample_cap, seeds, cfg)?),
        SkyMode::Partial => None,
    };
    let jobs = continuation::sky_jobs(&s0, s1.as_ref());
    let branches = continue_jobs(fam, &jobs, p_max, cfg)?;
    Ok(continuation::assemble_sky(fam, p_max, mode, branches, cfg))
}
