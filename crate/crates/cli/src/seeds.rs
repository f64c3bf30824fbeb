//! Seed-program directories.
//!
//! `DIR/NAME.py` is a seed with id and problem id `NAME`.
//! `DIR/PROBLEM/NAME.py` is a seed with id `PROBLEM/NAME` and problem id
//! `PROBLEM`. An optional `NAME.in` beside a seed holds its stdin.

use std::fs;
use std::path::{Path, PathBuf};

use tracecorpus::program::{Program, TestInput};

use crate::error::{CliError, Result};

pub struct Seed {
    pub program: Program,
    pub input: TestInput,
}

pub struct SeedSet {
    pub seeds: Vec<Seed>,
    /// Files that did not parse, with the reason.
    pub rejected: Vec<(PathBuf, String)>,
}

fn python_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read seed directory {}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            out.extend(python_files(&path)?);
        } else if path.extension().is_some_and(|e| e == "py") {
            out.push(path);
        }
    }
    Ok(out)
}

pub fn load(dir: &Path) -> Result<SeedSet> {
    let mut set = SeedSet { seeds: Vec::new(), rejected: Vec::new() };
    for path in python_files(dir)? {
        let rel = path.strip_prefix(dir).expect("walked from dir").with_extension("");
        let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        let id = parts.join("/");
        let problem_id = if parts.len() > 1 { parts[0].clone() } else { id.clone() };
        let source = fs::read_to_string(&path)?;
        let input_path = path.with_extension("in");
        let input = if input_path.is_file() {
            TestInput::from_text(&fs::read_to_string(&input_path)?)
        } else {
            TestInput::default()
        };
        match Program::parse(source) {
            Ok(p) => set.seeds.push(Seed { program: p.with_id(id).with_problem_id(problem_id), input }),
            Err(e) => set.rejected.push((path, e.to_string())),
        }
    }
    Ok(set)
}
