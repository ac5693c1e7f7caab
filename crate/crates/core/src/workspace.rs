//! Named spaces, specifications and programs loaded from source documents.
//!
//! A document holds any mix of `space`, `spec` and `prog` items. All spaces
//! from all documents are declared before any spec or program is resolved,
//! so an item may refer to a space declared later or in another file. Every
//! item name must be unique across the workspace.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::minilang::ProgramDef;
use crate::space::Space;
use crate::speclang::SpecDef;
use crate::syntax::{ParseError, Parser, Tok};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkspaceError {
    #[error("{origin}:{error}")]
    Parse { origin: String, error: ParseError },
    #[error("{origin}: `{name}` is already defined")]
    Duplicate { origin: String, name: String },
    #[error("no {kind} named `{name}`")]
    NotFound { kind: &'static str, name: String },
}

type Result<T> = std::result::Result<T, WorkspaceError>;

#[derive(Debug, Clone, Default)]
pub struct Workspace {
    spaces: BTreeMap<String, Space>,
    specs: BTreeMap<String, SpecDef>,
    programs: BTreeMap<String, ProgramDef>,
    /// Item names in load order.
    order: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Item {
    Space,
    Spec,
    Prog,
}

fn item_kind(p: &Parser) -> Option<Item> {
    if p.is_kw("space") {
        Some(Item::Space)
    } else if p.is_kw("spec") {
        Some(Item::Spec)
    } else if p.is_kw("prog") {
        Some(Item::Prog)
    } else {
        None
    }
}

fn skip_through(p: &mut Parser, sym: &str) -> std::result::Result<(), ParseError> {
    while !p.eat_sym(sym) {
        if p.at_end() {
            return p.syntax(format!("expected `{sym}` before end of input"));
        }
        p.bump();
    }
    Ok(())
}

fn skip_item(p: &mut Parser, kind: Item) -> std::result::Result<(), ParseError> {
    match kind {
        Item::Spec => {
            skip_through(p, ";")?;
            if p.is_kw("domain") {
                skip_through(p, ";")?;
            }
        }
        Item::Prog | Item::Space => {
            skip_through(p, "{")?;
            let mut depth = 1;
            while depth > 0 {
                match p.bump() {
                    Tok::Sym("{") => depth += 1,
                    Tok::Sym("}") => depth -= 1,
                    Tok::Eof => return p.syntax("unbalanced `{`"),
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

impl Workspace {
    pub fn new() -> Self {
        Workspace::default()
    }

    /// Load several documents, given as `(origin, text)` pairs. Nothing is
    /// added unless every document loads.
    pub fn load<'a>(&mut self, sources: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let sources: Vec<(&str, &str)> = sources.into_iter().collect();
        let mut next = self.clone();
        let wrap = |origin: &str| {
            let origin = origin.to_string();
            move |error| WorkspaceError::Parse {
                origin: origin.clone(),
                error,
            }
        };
        let mut parsers = Vec::with_capacity(sources.len());
        for (origin, text) in &sources {
            parsers.push(Parser::new(text).map_err(wrap(origin))?);
        }

        for ((origin, _), p) in sources.iter().zip(parsers.iter_mut()) {
            while !p.at_end() {
                match item_kind(p) {
                    Some(Item::Space) => {
                        let sp = p.space_decl().map_err(wrap(origin))?;
                        next.insert_name(origin, sp.name())?;
                        next.spaces.insert(sp.name().to_string(), sp);
                    }
                    Some(kind) => skip_item(p, kind).map_err(wrap(origin))?,
                    None => {
                        let t = p.peek().clone();
                        return Err(wrap(origin)(p.error(crate::syntax::ParseErrorKind::Syntax(
                            format!("expected `space`, `spec` or `prog`, found {t}"),
                        ))));
                    }
                }
            }
            p.reset(0);
        }

        for ((origin, _), p) in sources.iter().zip(parsers.iter_mut()) {
            let spaces = next.spaces.clone();
            let lookup = |name: &str| spaces.get(name).cloned();
            while !p.at_end() {
                match item_kind(p) {
                    Some(Item::Space) => skip_item(p, Item::Space).map_err(wrap(origin))?,
                    Some(Item::Spec) => {
                        let spec = p.spec_decl(lookup).map_err(wrap(origin))?;
                        next.insert_name(origin, spec.name())?;
                        next.specs.insert(spec.name().to_string(), spec);
                    }
                    Some(Item::Prog) => {
                        let prog = p.prog_decl(lookup).map_err(wrap(origin))?;
                        next.insert_name(origin, prog.name())?;
                        next.programs.insert(prog.name().to_string(), prog);
                    }
                    None => unreachable!("checked in the first pass"),
                }
            }
        }
        *self = next;
        Ok(())
    }

    pub fn load_str(&mut self, text: &str) -> Result<()> {
        self.load([("<input>", text)])
    }

    fn insert_name(&mut self, origin: &str, name: &str) -> Result<()> {
        if self.order.iter().any(|n| n == name) {
            return Err(WorkspaceError::Duplicate {
                origin: origin.to_string(),
                name: name.to_string(),
            });
        }
        self.order.push(name.to_string());
        Ok(())
    }

    pub fn space(&self, name: &str) -> Result<&Space> {
        self.spaces.get(name).ok_or_else(|| WorkspaceError::NotFound {
            kind: "space",
            name: name.to_string(),
        })
    }

    pub fn spec(&self, name: &str) -> Result<&SpecDef> {
        self.specs.get(name).ok_or_else(|| WorkspaceError::NotFound {
            kind: "spec",
            name: name.to_string(),
        })
    }

    pub fn program(&self, name: &str) -> Result<&ProgramDef> {
        self.programs.get(name).ok_or_else(|| WorkspaceError::NotFound {
            kind: "program",
            name: name.to_string(),
        })
    }

    /// Spaces in load order.
    pub fn spaces(&self) -> impl Iterator<Item = &Space> + '_ {
        self.order.iter().filter_map(|n| self.spaces.get(n))
    }

    /// Specifications in load order.
    pub fn specs(&self) -> impl Iterator<Item = &SpecDef> + '_ {
        self.order.iter().filter_map(|n| self.specs.get(n))
    }

    /// Programs in load order.
    pub fn programs(&self) -> impl Iterator<Item = &ProgramDef> + '_ {
        self.order.iter().filter_map(|n| self.programs.get(n))
    }
}
