use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pitchml_core::evaluation::{evaluate_by_speaker, nmi, EvalReport};
use pitchml_core::f0::FuserKind;
use pitchml_core::features::{extract_all, read_feature_csv, write_feature_csv, Feature};
use pitchml_core::ground_truth::reference_for_pair;
use pitchml_core::pipeline::{synth_corpus, train_pipeline, CorpusManifest, SynthSpec};
use pitchml_core::signal::load_waveform;
use pitchml_core::voicing::VoicingKind;
use pitchml_core::{Config, Error, ModelDocument, PitchTrack, Result};

#[derive(Debug, Parser)]
#[command(
    name = "pitchml",
    version,
    about = "Pitch detection from engineered features and shallow learners"
)]
struct Cli {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (and the synthesis seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    f0_min: Option<f64>,
    #[arg(long, global = true)]
    f0_max: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes the 16 voicing features and 7 F0 candidates per frame.
    Features {
        wav: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Trains a voicing model and F0 fuser on a corpus manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// kmeans, gmm, logreg, knn or mlp (default from the config).
        #[arg(long)]
        voicing: Option<VoicingKind>,
        /// median, linreg, knn or mlp-idx (default from the config).
        #[arg(long)]
        fuser: Option<FuserKind>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tracks a recording with a trained model.
    Track {
        wav: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Derives a reference track from an EGG recording on the grid of its
    /// speech recording.
    Gt {
        egg: PathBuf,
        #[arg(long)]
        grid_from: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Scores predicted tracks against references. With a manifest, `--pred`
    /// and `--ref` are directories holding `<stem>.csv` per entry and the
    /// report averages over speakers.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Prints the NMI between each feature and the reference voicing as JSON.
    Nmi {
        #[arg(long)]
        features: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Writes a synthetic corpus: speech, pseudo-EGG, stored contours and a
    /// manifest.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.with_range(cli.f0_min, cli.f0_max)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })
}

fn read_track(path: &Path) -> Result<PitchTrack> {
    PitchTrack::read_csv(open(path)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Features { wav, output } => {
            let w = load_waveform(wav)?;
            let m = extract_all(&w, &config.features)?;
            let mut out = create(output)?;
            write_feature_csv(&mut out, &m)?;
            out.flush()?;
        }
        Command::Train {
            manifest,
            voicing,
            fuser,
            output,
        } => {
            let mut config = config;
            if let Some(v) = voicing {
                config.voicing_kind = *v;
            }
            if let Some(f) = fuser {
                config.fuser_kind = *f;
            }
            let manifest = CorpusManifest::load(manifest)?;
            let model = train_pipeline(&manifest, &config)?;
            if model.voicing.low_separation {
                eprintln!("warning: voiced and unvoiced clusters are poorly separated");
            }
            model.save(output)?;
            eprintln!(
                "trained {} voicing and {} fuser on {} speakers",
                config.voicing_kind,
                config.fuser_kind,
                model.summary.speakers.len()
            );
        }
        Command::Track { wav, model, output } => {
            let model = ModelDocument::load(model)?;
            if cli.f0_min.is_some() || cli.f0_max.is_some() {
                let range = model.config.range();
                if cli.f0_min.is_some_and(|v| v != range.f0_min)
                    || cli.f0_max.is_some_and(|v| v != range.f0_max)
                {
                    return Err(Error::InvalidConfig(format!(
                        "the model was trained for [{}, {}] Hz; the search range cannot be changed at tracking time",
                        range.f0_min, range.f0_max
                    )));
                }
            }
            let w = load_waveform(wav)?;
            let track = pitchml_core::pipeline::track(&w, &model)?;
            let mut out = create(output)?;
            track.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Gt {
            egg,
            grid_from,
            output,
        } => {
            let speech = load_waveform(grid_from)?;
            let egg = load_waveform(egg)?;
            let r = reference_for_pair(&speech, &egg, &config.range(), &config.ground_truth)?;
            let mut out = create(output)?;
            r.track.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::Eval {
            pred,
            reference,
            manifest,
            output,
        } => match manifest {
            None => {
                let report = EvalReport::evaluate(&read_track(pred)?, &read_track(reference)?)?;
                print!("{}", report.to_table());
                write_json(output, &report)?;
            }
            Some(manifest) => {
                let manifest = CorpusManifest::load(manifest)?;
                if manifest.entries.is_empty() {
                    return Err(Error::EmptyManifest);
                }
                let mut rows = Vec::new();
                for e in &manifest.entries {
                    let name = format!("{}.csv", e.stem());
                    rows.push((
                        e.speaker.clone(),
                        read_track(&pred.join(&name))?,
                        read_track(&reference.join(&name))?,
                    ));
                }
                let report = evaluate_by_speaker(rows.iter().map(|(s, p, r)| (s.as_str(), p, r)))?;
                print!("{}", report.to_table());
                write_json(output, &report)?;
            }
        },
        Command::Nmi {
            features,
            reference,
            output,
        } => {
            let table = read_feature_csv(open(features)?)?;
            let reference = read_track(reference)?;
            let n = table.features.len().min(reference.len());
            if table.features.len().abs_diff(reference.len()) > 1 {
                return Err(Error::LengthMismatch {
                    left: table.features.len(),
                    right: reference.len(),
                });
            }
            let labels = &reference.voicing()[..n];
            let mut scores = BTreeMap::new();
            for f in Feature::ALL {
                let column: Vec<f64> = table.features[..n].iter().map(|v| v.get(f)).collect();
                scores.insert(f.name(), nmi(&column, labels, config.nmi_bins)?);
            }
            let text = serde_json::to_string_pretty(&scores)?;
            println!("{text}");
            if let Some(path) = output {
                write_json(path, &scores)?;
            }
        }
        Command::Synth { spec, output } => {
            let mut spec = match spec {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
                            path: path.clone(),
                            source,
                        })?;
                    serde_json::from_str::<SynthSpec>(&text).map_err(|e| Error::Parse {
                        what: "synthesis spec".into(),
                        detail: e.to_string(),
                    })?
                }
                None => SynthSpec::default(),
            };
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let manifest = synth_corpus(&spec, output)?;
            eprintln!(
                "wrote {} utterances to {}",
                manifest.entries.len(),
                output.display()
            );
        }
    }
    Ok(())
}
