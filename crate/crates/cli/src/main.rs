//! `rexcl`: requirement extraction and classification from the command line.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rexcl_core::classify::{classify_rows, train_from_rows, BaselineModel, ClassifierBinding};
use rexcl_core::evalkit::{binary_counts, evaluate_rows, generate_corpus, prf1, DocTruth, EvalReport, GenConfig};
use rexcl_core::export::{self, ExportFormat};
use rexcl_core::hf::{
    corpus_label_units, default_allowlist, parse_allowlist, read_label_csv, training_samples, write_label_csv,
    ForestModel, ForestParams, HfLabel,
};
use rexcl_core::ingest::{read_paged, to_units};
use rexcl_core::model::{FinalOutput, RequirementRow, SourceMode};
use rexcl_core::pipeline::{default_baseline, default_hf_model, extract, ExtractionOutput};
use rexcl_core::store::DocumentStore;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] rexcl_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "rexcl", version, about = "Extract, classify, review and export requirement documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a document into text units.
    Ingest {
        input: PathBuf,
        /// md or txt; defaults to the file extension.
        #[arg(long)]
        mode: Option<SourceMode>,
        #[arg(long, value_name = "OUT")]
        dump_units: Option<PathBuf>,
    },
    /// Train the header/footer forest from labeled units.
    TrainHf {
        /// CSV with columns doc,page,line_index,text,label (HF or TEXT).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = ForestParams::default().num_trees)]
        num_trees: usize,
        #[arg(long, default_value_t = ForestParams::default().max_depth)]
        max_depth: usize,
        #[arg(long, default_value_t = ForestParams::default().seed)]
        seed: u64,
        /// Hold out this fraction of units, train on the rest and report scores.
        #[arg(long)]
        holdout: Option<f64>,
    },
    /// Run header/footer removal and section extraction.
    Extract {
        input: PathBuf,
        #[arg(long)]
        mode: Option<SourceMode>,
        /// Trained forest; a built-in model is used when omitted.
        #[arg(long)]
        hf_model: Option<PathBuf>,
        #[command(flatten)]
        allowlist: AllowlistArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train the naive Bayes baseline classifier.
    TrainBaseline {
        /// Labeled rows (final.json, or a csv/json/yaml export); synthetic rows when omitted.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        synthetic: usize,
        #[arg(long, default_value_t = rexcl_core::pipeline::DEFAULT_TRAINING_SEED)]
        seed: u64,
        #[arg(long)]
        title_header_weight: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Label every row with a requirement type.
    Classify {
        /// extraction.json or final.json.
        input: PathBuf,
        #[arg(long, conflicts_with = "endpoint")]
        model: Option<PathBuf>,
        /// Base URL of a model server speaking the classify protocol.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write rows as CSV, JSON or YAML.
    Export {
        input: PathBuf,
        /// csv, json or yaml; defaults to the output extension.
        #[arg(long)]
        format: Option<ExportFormat>,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score predicted rows against truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also write the metrics as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with ground truth.
    Gen {
        #[arg(long)]
        seed: u64,
        /// JSON generator configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the HTTP review service on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "./data")]
        data_dir: PathBuf,
        #[arg(long)]
        hf_model: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        allowlist: AllowlistArg,
    },
}

#[derive(Args)]
struct AllowlistArg {
    /// Phrases never removed as header/footer, one per line.
    #[arg(long)]
    allowlist: Option<PathBuf>,
}

impl AllowlistArg {
    fn load(&self) -> CliResult<HashSet<String>> {
        match &self.allowlist {
            Some(path) => Ok(parse_allowlist(&read_text(path)?)),
            None => Ok(default_allowlist()),
        }
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_bytes(path)?).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: format!("not valid UTF-8: {e}"),
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn doc_id_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
    let id: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if id.is_empty() {
        "doc".into()
    } else {
        id
    }
}

fn mode_for(path: &Path, mode: Option<SourceMode>) -> CliResult<SourceMode> {
    if let Some(mode) = mode {
        return Ok(mode);
    }
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("md" | "markdown") => Ok(SourceMode::Markdown),
        Some("txt") => Ok(SourceMode::Plaintext),
        _ => Err(CliError::Usage(format!(
            "cannot infer the mode of {}; pass --mode md or --mode txt",
            path.display()
        ))),
    }
}

fn load_hf_model(path: Option<&Path>) -> CliResult<ForestModel> {
    match path {
        Some(p) => Ok(ForestModel::from_json(&read_text(p)?)?),
        None => Ok(default_hf_model()?),
    }
}

fn load_baseline(path: Option<&Path>) -> CliResult<BaselineModel> {
    match path {
        Some(p) => parse_json(p, &read_bytes(p)?),
        None => Ok(default_baseline()?),
    }
}

/// Rows from any file this tool writes: final.json, extraction.json, a
/// generated truth file, or a csv/json/yaml export.
fn load_rows(path: &Path) -> CliResult<(String, Vec<RequirementRow>)> {
    let bytes = read_bytes(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "csv" || ext == "yaml" || ext == "yml" {
        return Ok((doc_id_for(path), export::read(&bytes, ext.parse()?)?));
    }
    if let Ok(final_output) = serde_json::from_slice::<FinalOutput>(&bytes) {
        return Ok((final_output.doc_id, final_output.rows));
    }
    if let Ok(extraction) = serde_json::from_slice::<ExtractionOutput>(&bytes) {
        return Ok((extraction.extraction.doc_id, extraction.rows));
    }
    if let Ok(truth) = serde_json::from_slice::<DocTruth>(&bytes) {
        return Ok((truth.doc_id.clone(), truth.labeled_rows()?));
    }
    match export::read(&bytes, ExportFormat::Json) {
        Ok(rows) => Ok((doc_id_for(path), rows)),
        Err(e) => Err(CliError::Input {
            path: path.to_path_buf(),
            message: format!("not a rows file ({e})"),
        }),
    }
}

fn cmd_ingest(input: &Path, mode: Option<SourceMode>, dump_units: Option<&Path>) -> CliResult<()> {
    let mode = mode_for(input, mode)?;
    let doc = read_paged(&doc_id_for(input), &read_bytes(input)?, mode)?;
    let units = to_units(&doc);
    println!("{}: {} pages, {} units", doc.doc_id, doc.pages.len(), units.len());
    if let Some(out) = dump_units {
        write_json(out, &units)?;
    }
    Ok(())
}

fn print_hf_scores(pred: &[HfLabel], truth: &[HfLabel]) {
    println!("{:<8} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support");
    for label in [HfLabel::HeaderFooter, HfLabel::ReqText] {
        let c = binary_counts(pred, truth, &label);
        let m = prf1(c.tp, c.fp, c.fn_);
        println!(
            "{:<8} {:>9.3} {:>9.3} {:>9.3} {:>8}",
            label.short(),
            m.precision,
            m.recall,
            m.f1,
            c.tp + c.fn_
        );
    }
}

fn cmd_train_hf(labels: &Path, out: &Path, params: ForestParams, holdout: Option<f64>) -> CliResult<()> {
    let units = read_label_csv(&read_bytes(labels)?)?;
    let mut samples = training_samples(&units)?;
    let test = match holdout {
        Some(f) if !(0.0..1.0).contains(&f) => {
            return Err(CliError::Usage("--holdout must lie in [0, 1)".into()));
        }
        Some(f) => {
            samples.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
            let n_test = (samples.len() as f64 * f).round() as usize;
            samples.split_off(samples.len() - n_test)
        }
        None => Vec::new(),
    };
    let model = ForestModel::train(&samples, params)?;
    write_bytes(out, model.to_json()?.as_bytes())?;
    let hf = samples.iter().filter(|(_, l)| *l == HfLabel::HeaderFooter).count();
    println!("trained on {} units ({hf} HF, {} TEXT)", samples.len(), samples.len() - hf);
    if !test.is_empty() {
        let pred = test
            .iter()
            .map(|(f, _)| model.predict(f).map(|(l, _)| l))
            .collect::<Result<Vec<_>, _>>()?;
        let truth: Vec<HfLabel> = test.iter().map(|(_, l)| *l).collect();
        println!("held-out {} units:", test.len());
        print_hf_scores(&pred, &truth);
    }
    Ok(())
}

fn cmd_extract(
    input: &Path,
    mode: Option<SourceMode>,
    hf_model: Option<&Path>,
    allowlist: &AllowlistArg,
    output: &Path,
) -> CliResult<()> {
    let mode = mode_for(input, mode)?;
    let doc = read_paged(&doc_id_for(input), &read_bytes(input)?, mode)?;
    let out = extract(&doc, &load_hf_model(hf_model)?, &allowlist.load()?)?;
    println!(
        "{}: {} units, {} removed, {} sections, {} rows",
        doc.doc_id,
        out.units.len(),
        out.extraction.removed_units.len(),
        out.extraction.tuples.len(),
        out.rows.len()
    );
    write_json(output, &out)
}

fn cmd_train_baseline(
    rows: Option<&Path>,
    synthetic: usize,
    seed: u64,
    weight: Option<f64>,
    output: &Path,
) -> CliResult<()> {
    let mut model = match rows {
        Some(path) => train_from_rows(&load_rows(path)?.1)?,
        None => {
            let rows: Vec<_> = rexcl_core::evalkit::generate_labeled_rows(seed, synthetic, 0.6)?
                .into_iter()
                .map(|r| (rexcl_core::classify::preprocess(&r.text), r.kind, r.label))
                .collect();
            BaselineModel::train(&rows)?
        }
    };
    if let Some(w) = weight {
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Usage("--title-header-weight must be positive".into()));
        }
        model.title_header_weight = w;
    }
    println!("vocabulary of {} tokens", model.vocabulary.len());
    write_json(output, &model)
}

fn cmd_classify(
    input: &Path,
    model: Option<&Path>,
    endpoint: Option<String>,
    timeout_ms: u64,
    output: &Path,
) -> CliResult<()> {
    let (doc_id, rows) = load_rows(input)?;
    let binding = match endpoint {
        Some(endpoint) => ClassifierBinding::External { endpoint, timeout_ms },
        None => ClassifierBinding::Builtin {
            model: load_baseline(model)?,
        },
    };
    match classify_rows(&binding, &doc_id, &rows) {
        Ok(out) => {
            println!("{}: classified {} rows", out.doc_id, out.rows.len());
            write_json(output, &out)
        }
        Err(rexcl_core::Error::Classification { message, partial }) => {
            let partial_path = output.with_extension("partial.json");
            write_json(
                &partial_path,
                &FinalOutput {
                    doc_id,
                    rows: *partial.clone(),
                },
            )?;
            eprintln!("partial results written to {}", partial_path.display());
            Err(rexcl_core::Error::Classification { message, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_export(input: &Path, format: Option<ExportFormat>, output: Option<&Path>) -> CliResult<()> {
    let format = match (format, output) {
        (Some(f), _) => f,
        (None, Some(out)) => out
            .extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| CliError::Usage("pass --format csv|json|yaml".into()))?
            .parse()?,
        (None, None) => ExportFormat::Csv,
    };
    let (_, rows) = load_rows(input)?;
    let bytes = export::write(&rows, format);
    match output {
        Some(out) => write_bytes(out, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "rows: truth {}, predicted {}, matched {}, scored {}\n",
        report.truth_rows, report.pred_rows, report.matched_rows, report.scored_rows
    ));
    s.push_str(&format!("extraction row accuracy: {:.3}\n", report.row_accuracy));
    if let Some(acc) = report.class_accuracy {
        s.push_str(&format!("classification accuracy: {acc:.3}\n"));
    }
    s.push_str(&format!(
        "{:<13} {:>9} {:>9} {:>9} {:>8}\n",
        "label", "precision", "recall", "f1", "support"
    ));
    for (label, m) in &report.per_class {
        s.push_str(&format!(
            "{:<13} {:>9.3} {:>9.3} {:>9.3} {:>8}\n",
            label.as_str(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        ));
    }
    if let Some(f) = report.macro_f1 {
        s.push_str(&format!("macro-F1: {f:.3}\n"));
    }
    s
}

fn cmd_eval(truth: &Path, pred: &Path, json: Option<&Path>) -> CliResult<()> {
    let (_, truth_rows) = load_rows(truth)?;
    let (_, pred_rows) = load_rows(pred)?;
    let report = evaluate_rows(&pred_rows, &truth_rows);
    print!("{}", render_report(&report));
    if let Some(path) = json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_gen(seed: u64, config: Option<&Path>, output: &Path) -> CliResult<()> {
    let config: GenConfig = match config {
        Some(p) => parse_json(p, &read_bytes(p)?)?,
        None => GenConfig::default(),
    };
    let corpus = generate_corpus(seed, &config)?;
    let ext = match config.mode {
        SourceMode::Markdown => "md",
        SourceMode::Plaintext => "txt",
    };
    let mut manifest = Vec::new();
    for d in &corpus.documents {
        let id = &d.truth.doc_id;
        let doc_file = format!("{id}.{ext}");
        let truth_file = format!("{id}.truth.json");
        write_bytes(&output.join(&doc_file), d.doc.to_source().as_bytes())?;
        write_json(&output.join(&truth_file), &d.truth)?;
        manifest.push(serde_json::json!({"doc_id": id, "document": doc_file, "truth": truth_file}));
    }
    write_bytes(&output.join("hf_labels.csv"), &write_label_csv(&corpus_label_units(&corpus)))?;
    write_json(
        &output.join("manifest.json"),
        &serde_json::json!({"seed": seed, "config": config, "documents": manifest}),
    )?;
    println!("wrote {} documents to {}", corpus.documents.len(), output.display());
    Ok(())
}

fn cmd_serve(
    port: u16,
    data_dir: &Path,
    hf_model: Option<&Path>,
    model: Option<&Path>,
    allowlist: &AllowlistArg,
) -> CliResult<()> {
    let state = rexcl_service::AppState::new(
        DocumentStore::open(data_dir)?,
        load_hf_model(hf_model)?,
        allowlist.load()?,
        load_baseline(model)?,
    );
    let addr = rexcl_service::local_addr(port);
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| CliError::Io {
            path: PathBuf::from(addr.to_string()),
            source,
        })?;
        println!("listening on http://{addr}");
        rexcl_service::serve(listener, state).await.map_err(|source| CliError::Io {
            path: PathBuf::from(addr.to_string()),
            source,
        })
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest {
            input,
            mode,
            dump_units,
        } => cmd_ingest(&input, mode, dump_units.as_deref()),
        Command::TrainHf {
            labels,
            out,
            num_trees,
            max_depth,
            seed,
            holdout,
        } => cmd_train_hf(
            &labels,
            &out,
            ForestParams {
                num_trees,
                max_depth,
                seed,
            },
            holdout,
        ),
        Command::Extract {
            input,
            mode,
            hf_model,
            allowlist,
            output,
        } => cmd_extract(&input, mode, hf_model.as_deref(), &allowlist, &output),
        Command::TrainBaseline {
            rows,
            synthetic,
            seed,
            title_header_weight,
            output,
        } => cmd_train_baseline(rows.as_deref(), synthetic, seed, title_header_weight, &output),
        Command::Classify {
            input,
            model,
            endpoint,
            timeout_ms,
            output,
        } => cmd_classify(&input, model.as_deref(), endpoint, timeout_ms, &output),
        Command::Export { input, format, output } => cmd_export(&input, format, output.as_deref()),
        Command::Eval { truth, pred, json } => cmd_eval(&truth, &pred, json.as_deref()),
        Command::Gen { seed, config, output } => cmd_gen(seed, config.as_deref(), &output),
        Command::Serve {
            port,
            data_dir,
            hf_model,
            model,
            allowlist,
        } => cmd_serve(port, &data_dir, hf_model.as_deref(), model.as_deref(), &allowlist),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
