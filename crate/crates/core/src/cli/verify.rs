//! `dabound verify`.

use serde::Serialize;

use super::io;
use super::{require_seed, Format, Outcome, VerifyArgs};
use crate::bounds::BoundConfig;
use crate::campaign::{self, CampaignSummary, CheckRow, CoverageConfig, InstanceLimits, Suite};
use crate::error::Result;

#[derive(Serialize)]
#[serde(untagged)]
enum ResolvedSuite {
    Instances { limits: InstanceLimits },
    Coverage { coverage: CoverageConfig },
}

#[derive(Serialize)]
struct Resolved {
    suite: Suite,
    instances: usize,
    seed: u64,
    #[serde(flatten)]
    params: ResolvedSuite,
    format: Format,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    config: &'a Resolved,
    summary: &'a CampaignSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<&'a [CheckRow]>,
}

pub(super) fn run(args: &VerifyArgs) -> Result<Outcome> {
    let seed = require_seed(args.seed, "verify")?;
    let (params, result) = if args.suite == Suite::Coverage {
        let coverage = CoverageConfig {
            points: args.points,
            voters: args.voters,
            bound: BoundConfig {
                c: args.c,
                alpha: args.alpha,
                delta: args.delta,
                m: args.m,
                lambda_mode: args.lambda,
            },
            random_posteriors: args.posteriors,
            slack: args.slack,
        };
        let result = campaign::run_coverage(args.instances, seed, &coverage)?;
        (ResolvedSuite::Coverage { coverage }, result)
    } else {
        let limits = InstanceLimits {
            max_points: args.max_points,
            max_voters: args.max_voters,
            concentration: args.concentration,
        };
        let result = campaign::run_suite(args.suite, args.instances, seed, &limits)?;
        (ResolvedSuite::Instances { limits }, result)
    };
    let config = Resolved {
        suite: args.suite,
        instances: args.instances,
        seed,
        params,
        format: args.format,
    };
    match args.format {
        Format::Json => io::write_json(
            &args.out,
            &Report {
                command: "verify",
                config: &config,
                summary: &result.summary,
                rows: Some(&result.rows),
            },
        )?,
        Format::Csv => {
            io::write_csv_rows(&args.out, &result.rows)?;
            io::write_json(
                &io::sidecar(&args.out, ".summary.json"),
                &Report {
                    command: "verify",
                    config: &config,
                    summary: &result.summary,
                    rows: None,
                },
            )?;
        }
    }
    let s = &result.summary;
    log::info!(
        "suite {}: {} instances, {} violations",
        s.suite,
        s.instances,
        s.violations
    );
    Ok(if s.passed() {
        Outcome::Success
    } else {
        Outcome::Violation
    })
}
