//! `shoal analyze`: closed-form sizing for states that outgrow one
//! machine, from the published cost model.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use shoal_core::analysis::{
    bottleneck_report, gate_flops, gates_per_second, state_bytes, storage_cost_usd,
    transfer_seconds, AnalysisConfig, Bottleneck, WorkloadParams,
};

use crate::common::commas;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Qubit count to size for
    #[arg(long, default_value_t = 40, env = "SHOAL_QUBITS")]
    pub qubits: u8,
    /// Compute profile named in the bottleneck verdict
    #[arg(long, default_value = "gpu")]
    pub compute: String,
    /// Link profile named in the bottleneck verdict
    #[arg(long, default_value = "100gbe")]
    pub link: String,
    /// TOML document overriding the built-in profile tables
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Iterative workload: ITERATIONS GATES SECONDS, e.g. a training
    /// loop of 10000 iterations of 1000 gates inside one day
    #[arg(long, num_args = 3, value_names = ["ITERATIONS", "GATES", "SECONDS"])]
    pub workload: Option<Vec<u64>>,
}

pub fn execute(args: &AnalyzeArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let config = AnalysisConfig::from_toml(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            config.validate()?;
            config
        }
        None => AnalysisConfig::default(),
    };
    let n = args.qubits;
    let workload = args.workload.as_ref().map(|w| WorkloadParams {
        m_iter: w[0],
        n_gate: w[1],
        t_train_seconds: w[2] as f64,
    });

    println!("state: {n} qubits = {} bytes", commas(state_bytes(n)?));
    println!("gate cost: {} flops per dense single-qubit gate\n", commas(gate_flops(n)?));

    println!("sustained gate rate by compute profile");
    for profile in &config.compute {
        println!(
            "  {:<8} {:>10.3e} flops  {:>12.4} gates/s",
            profile.label,
            profile.flops,
            gates_per_second(profile, n)?
        );
    }

    println!("\nfull-state transfer time by link");
    for link in &config.links {
        println!(
            "  {:<8} {:>10.3e} B/s    {:>12.1} s",
            link.label,
            link.bytes_per_second,
            transfer_seconds(state_bytes(n)?, link)?
        );
    }

    println!("\nstorage cost by media");
    for media in &config.media {
        println!(
            "  {:<8} ${:>3}/GB  ${}",
            media.label,
            media.usd_per_gb,
            commas(storage_cost_usd(n, media)?.round() as u128)
        );
    }

    let report = bottleneck_report(
        n,
        config.compute_profile(&args.compute)?,
        config.link_profile(&args.link)?,
        workload.as_ref(),
    )?;
    println!("\nbottleneck: {} compute over a {} link", report.compute_label, report.link_label);
    println!("  compute sustains {:>12.4} gates/s", report.compute_gates_per_sec);
    println!(
        "  link feeds       {:>12.6} gates/s at one full state transfer per gate\n  \
         ({:.6} charging a read plus a write)",
        report.link_gates_per_sec_one_pass, report.link_gates_per_sec_read_write
    );
    let ratio = report.compute_to_link_ratio;
    println!(
        "  compute outpaces the link {} to 1; the {} is the bottleneck",
        if ratio >= 1000.0 { commas(ratio.round() as u128) } else { format!("{ratio:.3}") },
        match report.bottleneck {
            Bottleneck::Compute => "compute",
            Bottleneck::Link => "link",
        }
    );
    if let Some(verdict) = &report.workload {
        let w = workload.expect("workload produced the verdict");
        println!(
            "\nworkload: {} iterations x {} gates within {} s needs {:.4} gates/s",
            commas(w.m_iter as u128),
            commas(w.n_gate as u128),
            w.t_train_seconds,
            verdict.required_gates_per_sec
        );
        println!(
            "  compute keeps up: {}   link keeps up: {}",
            if verdict.compute_satisfies { "yes" } else { "no" },
            if verdict.link_satisfies { "yes" } else { "no" }
        );
    }
    Ok(ExitCode::SUCCESS)
}
