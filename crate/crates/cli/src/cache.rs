//! On-disk cache of the constant integrals, enabled by `BUMPFORGE_CACHE`.

use std::path::PathBuf;

use bumpforge::bubble::{compute_constant_integrals, ConstantIntegrals, UniversalConstants};
use bumpforge::quadrature::IntegrationPlan;
use serde::{Deserialize, Serialize};

pub const CACHE_ENV: &str = "BUMPFORGE_CACHE";

#[derive(Serialize, Deserialize)]
struct Entry {
    plan: IntegrationPlan,
    integrals: ConstantIntegrals,
}

fn entry_path(dir: &str, n: usize, beta: f64) -> PathBuf {
    PathBuf::from(dir).join(format!("constants_n{n}_beta{:016x}.json", beta.to_bits()))
}

/// Constants for (n, β, Σa). Cache read or write failures fall back to
/// recomputation.
pub fn constants(n: usize, beta: f64, sum_a: f64) -> bumpforge::Result<UniversalConstants> {
    let plan = IntegrationPlan::for_constants(n);
    let dir = std::env::var(CACHE_ENV).ok().filter(|d| !d.is_empty());
    if let Some(dir) = &dir {
        let hit = std::fs::read_to_string(entry_path(dir, n, beta))
            .ok()
            .and_then(|s| serde_json::from_str::<Entry>(&s).ok())
            .filter(|e| e.plan == plan && e.integrals.n == n && e.integrals.beta == beta);
        if let Some(e) = hit {
            return Ok(UniversalConstants::from_integrals(&e.integrals, sum_a));
        }
    }
    let integrals = compute_constant_integrals(n, beta, &plan)?;
    if let Some(dir) = &dir {
        let entry = Entry { plan, integrals };
        if std::fs::create_dir_all(dir).is_ok() {
            if let Ok(s) = serde_json::to_string(&entry) {
                let _ = std::fs::write(entry_path(dir, n, beta), s);
            }
        }
    }
    Ok(UniversalConstants::from_integrals(&integrals, sum_a))
}
