//! Reference external adapter. Answers every request with the ground truth
//! stored in the `suite.json` next to the requested image.
//!
//! Usage: mtpose-echo-adapter [--model NAME]

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mtpose_core::adapter::protocol::{Message, PROTOCOL_VERSION};
use mtpose_core::adapter::OracleAdapter;
use mtpose_core::testgen::{SuiteIndex, TestCaseDescriptor};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut model = "echo".to_string();
    while let Some(a) = args.next() {
        match (a.as_str(), args.next()) {
            ("--model", Some(m)) => model = m,
            _ => {
                eprintln!("usage: mtpose-echo-adapter [--model NAME]");
                return ExitCode::from(2);
            }
        }
    }
    match serve(&model) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mtpose-echo-adapter: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(model: &str) -> Result<(), String> {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut suites: HashMap<PathBuf, HashMap<String, TestCaseDescriptor>> = HashMap::new();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line).map_err(|e| e.to_string())? {
            Message::Hello { .. } => Message::Hello {
                version: PROTOCOL_VERSION,
                model: Some(model.to_string()),
            },
            Message::Predict { id, image } => {
                let dir = Path::new(&image)
                    .parent()
                    .ok_or_else(|| format!("image path `{image}` has no directory"))?
                    .to_path_buf();
                if !suites.contains_key(&dir) {
                    let index = SuiteIndex::load(&dir).map_err(|e| e.to_string())?;
                    let cases = index.cases.into_iter().map(|c| (c.id.clone(), c)).collect();
                    suites.insert(dir.clone(), cases);
                }
                let case = suites[&dir]
                    .get(&id)
                    .ok_or_else(|| format!("case `{id}` not in {}", dir.display()))?;
                Message::result(&id, &OracleAdapter::prediction(case))
            }
            other => return Err(format!("unexpected message {other:?}")),
        };
        out.write_all(reply.to_line().as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}
