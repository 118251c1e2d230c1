use anyhow::{bail, Result};
use attncausal::io::{pag_to_dot, pag_to_json};
use attncausal::synth::{chain_fixture, synth_bundle, SynthConfig, SynthItem, SynthKind};
use clap::{Args, ValueEnum};

use crate::{file_stem, write_atomic, GlobalOpts, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// The three-token chain 0 → 1 → 2 with unit weights.
    Chain,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthKind::Clean)]
    pub kind: SynthKind,
    /// Number of bundles.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Tokens per sequence, latents included.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 0.25)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub latents: usize,
    /// Extra weight bound for the noisy kind.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Sequence id prefix; bundle k is named `<prefix>-<k>`.
    #[arg(long, default_value = "synth")]
    pub prefix: String,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            kind: self.kind,
            n: self.n,
            heads: self.heads,
            density: self.density,
            latents: self.latents,
            jitter: self.jitter,
        }
    }
}

fn write_item(opts: &GlobalOpts, item: &SynthItem, report: &mut RunReport) -> Result<()> {
    let stem = file_stem(&item.bundle.sequence_id);
    let path = opts.out.join(format!("{stem}.json"));
    write_atomic(&path, &item.bundle.to_json())?;
    report.written.push(path);
    for (head, truth) in item.truth.iter().enumerate() {
        let Some(g) = truth else { continue };
        let dir = opts.out.join(format!("{stem}.truth"));
        let json = dir.join(format!("head{head}.pag.json"));
        write_atomic(&json, &pag_to_json(g))?;
        let dot = dir.join(format!("head{head}.dot"));
        write_atomic(&dot, &pag_to_dot(g, &format!("{}/head{head}", item.bundle.sequence_id)))?;
        report.written.extend([json, dot]);
    }
    Ok(())
}

/// Writes `<out>/<id>.json` per bundle and, for structured kinds, the
/// ground-truth PAGs under `<out>/<id>.truth/`. Bundle k uses seed `--seed + k`.
pub fn cmd_synth(opts: &GlobalOpts, args: &SynthArgs) -> Result<RunReport> {
    let mut report = RunReport::default();
    if args.preset == Some(Preset::Chain) {
        write_item(opts, &chain_fixture(), &mut report)?;
        return Ok(report);
    }
    if args.latents >= args.n {
        bail!("--latents ({}) must be smaller than --n ({})", args.latents, args.n);
    }
    let cfg = args.config();
    for k in 0..args.count {
        let id = format!("{}-{k}", args.prefix);
        match synth_bundle(&cfg, opts.seed.wrapping_add(k as u64), &id) {
            Ok(item) => write_item(opts, &item, &mut report)?,
            Err(e) => report.failures.push(format!("{id}: {e}")),
        }
    }
    Ok(report)
}
