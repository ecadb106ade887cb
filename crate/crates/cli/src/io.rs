use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use qkbp::envelope::Envelope;
use qkbp::format::{read_canonical, read_soutif, write_canonical, InstanceFile};
use qkbp::generators::{Generated, GeneratorSpec};
use qkbp::instance::format_rational;
use qkbp::qkbp::SolveResult;
use qkbp::{Budget, QkpInstance};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstanceFormat {
    Canonical,
    Soutif,
}

/// Reads an instance; canonical files are named after their file stem.
pub fn load_instance(path: &Path, format: InstanceFormat) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = match format {
        InstanceFormat::Canonical => read_canonical(&text),
        InstanceFormat::Soutif => read_soutif(&text),
    };
    let mut file = parsed.with_context(|| format!("parsing {}", path.display()))?;
    if format == InstanceFormat::Canonical {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        file.instance.set_name(stem);
    }
    Ok(file)
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: GeneratorSpec,
    /// Instance file, relative to the manifest.
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub budgets: Vec<Budget>,
}

impl Manifest {
    /// Writes `<name>.qkp` and `<name>.json` into `dir`, returning the
    /// manifest path.
    pub fn write(dir: &Path, spec: &GeneratorSpec, generated: &Generated) -> Result<PathBuf> {
        let name = spec.name();
        let file = format!("{name}.qkp");
        let inst = &generated.instance;
        let text = write_canonical(inst, &generated.budgets);
        std::fs::write(dir.join(&file), text).with_context(|| format!("writing {file}"))?;
        let manifest = Manifest {
            spec: spec.clone(),
            instance: file,
            n: inst.n(),
            m: inst.m(),
            budgets: generated.budgets.clone(),
        };
        let path = dir.join(format!("{name}.json"));
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn instance_path(&self, manifest_path: &Path) -> PathBuf {
        manifest_path.parent().unwrap_or(Path::new(".")).join(&self.instance)
    }
}

pub fn envelope_json(inst: &QkpInstance, env: &Envelope, results: &[SolveResult]) -> Value {
    let breakpoints: Vec<Value> = env
        .breakpoints()
        .iter()
        .map(|b| {
            json!({
                "lambda": format_rational(&b.lambda),
                "lowest_lambda": format_rational(&b.lowest_lambda),
                "budget": b.budget,
                "utility": b.utility,
                "set": b.set.to_vec(),
            })
        })
        .collect();
    let markers: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "budget": r.budget.value,
                "gamma": r.budget.fraction.map(|g| format_rational(&g)),
                "objective": r.objective,
                "cost": r.cost,
                "method": r.method.tag(),
                "upper_bound": format_rational(&r.upper_bound),
                "set": r.set.to_vec(),
            })
        })
        .collect();
    json!({
        "instance": inst.name(),
        "n": inst.n(),
        "grid_size": env.grid_size(),
        "lambda_upper_bound": format_rational(&env.ub_lambda()),
        "breakpoints": breakpoints,
        "solutions": markers,
    })
}
