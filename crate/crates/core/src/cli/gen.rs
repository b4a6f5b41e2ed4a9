//! `dabound gen`.

use std::fs;

use serde::Serialize;

use super::io;
use super::{require_seed, GenArgs, GenKind, Outcome};
use crate::datagen::{self, DatasetSpec, FiniteInstance, FiniteSpec, MoonsSpec};
use crate::error::Result;

#[derive(Serialize)]
struct Resolved {
    seed: u64,
    dataset: DatasetSpec,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    config: Resolved,
    files: Vec<&'static str>,
}

#[derive(Serialize)]
struct Chi2Sidecar {
    magnitude: f64,
    chi2: f64,
}

fn spec(args: &GenArgs) -> DatasetSpec {
    let finite = FiniteSpec {
        points: args.points,
        voters: args.voters,
        concentration: args.concentration,
    };
    match args.kind {
        GenKind::RandomFinite => DatasetSpec::RandomFinite { finite },
        GenKind::Chi2Perturbed => DatasetSpec::Chi2Perturbed {
            finite,
            magnitude: args.magnitude,
        },
        GenKind::LabelFlip => DatasetSpec::LabelFlip {
            finite,
            noise_rate: args.noise_rate,
        },
        GenKind::RotatedMoons => DatasetSpec::RotatedMoons {
            moons: MoonsSpec {
                source_size: args.source_size,
                target_size: args.target_size,
                heldout_size: args.heldout_size,
                angle: args.angle,
                noise: args.noise,
            },
        },
    }
}

fn write_instance(
    args: &GenArgs,
    inst: &FiniteInstance,
    with_rho: bool,
) -> Result<Vec<&'static str>> {
    let dir = &args.out_dir;
    fs::create_dir_all(dir)?;
    io::write_json(&dir.join("source.json"), &inst.source)?;
    io::write_json(&dir.join("target.json"), &inst.target)?;
    io::write_json(&dir.join("voters.json"), &inst.voters)?;
    let mut files = vec!["source.json", "target.json", "voters.json"];
    if with_rho {
        io::write_json(&dir.join("rho.json"), &inst.rho)?;
        files.push("rho.json");
    }
    Ok(files)
}

pub(super) fn run(args: &GenArgs) -> Result<Outcome> {
    let seed = require_seed(args.seed, "gen")?;
    let dataset = spec(args);
    dataset.validate()?;
    let dir = &args.out_dir;

    let files = match dataset {
        DatasetSpec::RandomFinite { finite } => {
            let inst = datagen::random_finite_instance(&finite, seed)?;
            write_instance(args, &inst, true)?
        }
        DatasetSpec::Chi2Perturbed { finite, magnitude } => {
            let mut inst = datagen::random_finite_instance(&finite, datagen::derive_seed(seed, 0))?;
            let perturbed = datagen::chi2_perturbed_pair(
                &inst.source,
                magnitude,
                datagen::derive_seed(seed, 1),
            )?;
            inst.target = perturbed.target;
            let mut files = write_instance(args, &inst, true)?;
            io::write_json(
                &dir.join("chi2.json"),
                &Chi2Sidecar {
                    magnitude,
                    chi2: perturbed.chi2,
                },
            )?;
            files.push("chi2.json");
            files
        }
        DatasetSpec::LabelFlip { finite, noise_rate } => {
            let inst = datagen::label_flip_instance(&finite, noise_rate, seed)?;
            write_instance(args, &inst, false)?
        }
        DatasetSpec::RotatedMoons { moons } => {
            let data = datagen::rotated_moons(&moons, seed)?;
            fs::create_dir_all(dir)?;
            io::write_labeled(&dir.join("source.csv"), &data.pair.source)?;
            io::write_unlabeled(&dir.join("target.csv"), &data.pair.target)?;
            io::write_labeled(&dir.join("target_heldout.csv"), &data.heldout)?;
            vec!["source.csv", "target.csv", "target_heldout.csv"]
        }
    };
    io::write_json(
        &dir.join("manifest.json"),
        &Manifest {
            command: "gen",
            config: Resolved { seed, dataset },
            files,
        },
    )?;
    Ok(Outcome::Success)
}
