//! Resolving command-line operands to relations.
//!
//! An operand is `FILE` or `FILE#NAME`. Each operand file is loaded together
//! with the `--space` files into its own workspace, so two files may reuse an
//! item name without colliding.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use relcorr::{Extraction, ProgramDef, Relation, SpecDef, Workspace};

pub enum Item {
    Spec(SpecDef),
    Prog(ProgramDef),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Spec(s) => s.name(),
            Item::Prog(p) => p.name(),
        }
    }

    pub fn as_spec(&self) -> Result<&SpecDef> {
        match self {
            Item::Spec(s) => Ok(s),
            Item::Prog(p) => bail!("`{}` is a program, expected a specification", p.name()),
        }
    }

    pub fn as_prog(&self) -> Result<&ProgramDef> {
        match self {
            Item::Prog(p) => Ok(p),
            Item::Spec(s) => bail!("`{}` is a specification, expected a program", s.name()),
        }
    }

    /// The item's relation: the specification itself, or the program's
    /// extracted function.
    pub fn relation(&self, fuel: u64) -> Result<Relation> {
        match self {
            Item::Spec(s) => Ok(s.as_relation()),
            Item::Prog(p) => Ok(extract(p, fuel)?.relation),
        }
    }
}

pub fn extract(p: &ProgramDef, fuel: u64) -> Result<Extraction> {
    let ex = p
        .extract_function(fuel)
        .with_context(|| format!("extracting `{}`", p.name()))?;
    if ex.divergent_states > 0 {
        log::warn!(
            "{}: {} initial states ran out of fuel ({fuel} steps)",
            p.name(),
            ex.divergent_states
        );
    }
    log::info!(
        "{}: {} runs, {} pairs, {} runtime-error paths, {} abort paths",
        p.name(),
        ex.runs,
        ex.relation.pair_count(),
        ex.runtime_error_paths,
        ex.abort_paths
    );
    Ok(ex)
}

pub struct Loader {
    base: Workspace,
    sources: Vec<(String, String)>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Loader {
    pub fn new(space_files: &[impl AsRef<Path>]) -> Result<Loader> {
        let mut sources = Vec::new();
        for f in space_files {
            let f = f.as_ref();
            sources.push((f.display().to_string(), read(f)?));
        }
        let mut base = Workspace::new();
        base.load(sources.iter().map(|(o, t)| (o.as_str(), t.as_str())))?;
        Ok(Loader { base, sources })
    }

    pub fn resolve(&self, operand: &str) -> Result<Item> {
        let (path, wanted) = match operand.rsplit_once('#') {
            Some((p, n)) => (p, Some(n)),
            None => (operand, None),
        };
        let text = read(Path::new(path))?;
        let mut ws = Workspace::new();
        ws.load(
            self.sources
                .iter()
                .map(|(o, t)| (o.as_str(), t.as_str()))
                .chain(std::iter::once((path, text.as_str()))),
        )?;
        let fresh = |name: &str| self.base.spec(name).is_err() && self.base.program(name).is_err();
        let mut items: Vec<Item> = ws
            .specs()
            .filter(|s| fresh(s.name()))
            .map(|s| Item::Spec(s.clone()))
            .chain(
                ws.programs()
                    .filter(|p| fresh(p.name()))
                    .map(|p| Item::Prog(p.clone())),
            )
            .collect();
        if let Some(name) = wanted {
            items.retain(|i| i.name() == name);
        }
        match items.len() {
            1 => Ok(items.pop().expect("one item")),
            0 => match wanted {
                Some(name) => bail!("{path} defines no specification or program named `{name}`"),
                None => bail!("{path} defines no specification or program"),
            },
            _ => {
                let names: Vec<&str> = items.iter().map(Item::name).collect();
                bail!(
                    "{path} defines several items ({}); pick one with {path}#NAME",
                    names.join(", ")
                )
            }
        }
    }
}
