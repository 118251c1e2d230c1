use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Result;
use attncausal::io::{pag_to_dot, pag_to_json, trace_to_json};
use attncausal::learn_structure;
use clap::Args;
use rayon::prelude::*;

use crate::{bundle_heads, file_stem, load_bundle, write_atomic, GlobalOpts, RunReport};

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Attention bundle JSON files.
    #[arg(required = true)]
    pub bundles: Vec<PathBuf>,
}

struct HeadOutput {
    head: usize,
    pag_json: String,
    dot: String,
    trace_json: String,
}

struct BundleOutput {
    stem: String,
    heads: Vec<HeadOutput>,
    failures: Vec<String>,
}

fn process(opts: &GlobalOpts, path: &Path) -> BundleOutput {
    let bundle = match load_bundle(path) {
        Ok(b) => b,
        Err(e) => {
            return BundleOutput {
                stem: String::new(),
                heads: Vec::new(),
                failures: vec![format!("{e:#}")],
            }
        }
    };
    let stem = file_stem(&bundle.sequence_id);
    let (heads, mut failures) = bundle_heads(path, &bundle);
    let mut out = Vec::with_capacity(heads.len());
    for (head, a) in heads {
        let learned = opts
            .ci_config(a.n())
            .and_then(|cfg| Ok(learn_structure(&a, &cfg)?));
        match learned {
            Ok(res) => out.push(HeadOutput {
                head,
                pag_json: pag_to_json(&res.pag),
                dot: pag_to_dot(&res.pag, &format!("{}/head{head}", bundle.sequence_id)),
                trace_json: trace_to_json(&res.trace),
            }),
            Err(e) => failures.push(format!("{}: head {head}: {e:#}", path.display())),
        }
    }
    BundleOutput {
        stem,
        heads: out,
        failures,
    }
}

/// Writes `<out>/<sequence>/head<k>.pag.json`, `.dot` and `.trace.json`.
pub fn cmd_discover(opts: &GlobalOpts, args: &DiscoverArgs) -> Result<RunReport> {
    let outputs: Vec<BundleOutput> = args.bundles.par_iter().map(|p| process(opts, p)).collect();
    let mut report = RunReport::default();
    let mut seen = BTreeSet::new();
    for (path, b) in args.bundles.iter().zip(outputs) {
        report.failures.extend(b.failures);
        if b.heads.is_empty() {
            continue;
        }
        if !seen.insert(b.stem.clone()) {
            report
                .failures
                .push(format!("{}: duplicate sequence id '{}', skipped", path.display(), b.stem));
            continue;
        }
        let dir = opts.out.join(&b.stem);
        for h in b.heads {
            for (suffix, text) in [("pag.json", &h.pag_json), ("dot", &h.dot), ("trace.json", &h.trace_json)] {
                let p = dir.join(format!("head{}.{suffix}", h.head));
                write_atomic(&p, text)?;
                report.written.push(p);
            }
        }
    }
    Ok(report)
}
