use std::path::PathBuf;

use anyhow::{anyhow, Context};
use prefpomdp::envs::tabular;
use prefpomdp::exact::{run_convergence, write_convergence_csv, ConvergenceConfig, ConvergenceRow, Scheme};

#[derive(Debug, Clone)]
pub struct ConvergeArgs {
    pub model: String,
    pub scheme: Scheme,
    pub delta: f64,
    pub eta: f64,
    pub k_max: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn converge(args: &ConvergeArgs) -> anyhow::Result<Vec<ConvergenceRow>> {
    let model = tabular::by_id(&args.model).ok_or_else(|| anyhow!("unknown model {:?}", args.model))?;
    let config = ConvergenceConfig {
        scheme: args.scheme,
        delta: args.delta,
        eta: args.eta,
        k_max: args.k_max,
        seed: args.seed,
        ..Default::default()
    };
    let rows = run_convergence(&model, &config)?;
    if let Some(path) = &args.out {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_convergence_csv(path, &rows).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(rows)
}
