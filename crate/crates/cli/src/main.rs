mod args;

use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::Parser;
use cnr_core::classify::{align_ratings, evaluate, gwet_ac1, load_gold, load_ratings, FewShotBank};
use cnr_core::gateway::{
    Backend, Gateway, GatewayConfig, HttpBackend, HttpBackendConfig, RecordingBackend,
    ScriptedBackend, TemplateSet,
};
use cnr_core::ingest::load_document;
use cnr_core::model::ProcessedArticle;
use cnr_core::pipeline::{Pipeline, ProducedAt};
use cnr_core::stats::{ablation_table, load_paired_scores, render_table};
use cnr_core::store::{to_canonical_json, Store, StoreError};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use args::{
    BackendArgs, Cli, Command, EvalAblationArgs, EvalAgreementArgs, EvalClassifyArgs, EvalCommand,
    EvalHintsArgs, Format, IngestArgs, ProcessArgs, ServeArgs,
};

type Error = Box<dyn std::error::Error + Send + Sync>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let out = Output { format: cli.format };
    let result = match cli.command {
        Command::Ingest(a) => ingest(&out, a),
        Command::Process(a) => process(&out, a),
        Command::Eval(EvalCommand::Classify(a)) => eval_classify(&out, a),
        Command::Eval(EvalCommand::Agreement(a)) => eval_agreement(&out, a),
        Command::Eval(EvalCommand::Ablation(a)) => eval_ablation(&out, a),
        Command::Eval(EvalCommand::Hints(a)) => eval_hints(&out, a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("CNR_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

struct Output {
    format: Format,
}

impl Output {
    fn emit(&self, text: impl FnOnce() -> String, structured: impl FnOnce() -> serde_json::Value) {
        match self.format {
            Format::Text => print!("{}", text()),
            Format::Structured => println!(
                "{}",
                serde_json::to_string_pretty(&structured()).expect("json values serialize")
            ),
        }
    }
}

/// Gateway over the selected backend, plus the recorder when `--record` is set.
struct Backends {
    gateway: Gateway,
    recorder: Option<Arc<RecordingBackend<Arc<dyn Backend>>>>,
    record_path: Option<std::path::PathBuf>,
}

impl Backends {
    fn open(args: &BackendArgs) -> Result<Self, Error> {
        let base: Arc<dyn Backend> = match (&args.scripted, &args.backend) {
            (Some(path), _) => Arc::new(ScriptedBackend::from_file(path)?),
            (None, Some(url)) => Arc::new(HttpBackend::new(HttpBackendConfig::new(
                url.as_str(),
                args.model.as_str(),
            ))?),
            (None, None) => {
                return Err("choose a backend with --backend URL or --scripted FILE".into())
            }
        };
        let (backend, recorder): (Arc<dyn Backend>, _) = match &args.record {
            Some(_) => {
                let rec = Arc::new(RecordingBackend::new(base));
                (rec.clone(), Some(rec))
            }
            None => (base, None),
        };
        let config = GatewayConfig {
            max_in_flight: args.concurrency.max(1),
            ..GatewayConfig::default()
        };
        Ok(Self {
            gateway: Gateway::new(backend, TemplateSet::builtin(), config),
            recorder,
            record_path: args.record.clone(),
        })
    }

    fn save_recording(&self) -> Result<(), Error> {
        if let (Some(rec), Some(path)) = (&self.recorder, &self.record_path) {
            let script = rec.script();
            script.save(path)?;
            tracing::info!(entries = script.entries.len(), path = %path.display(), "script saved");
        }
        Ok(())
    }
}

fn ingest(out: &Output, args: IngestArgs) -> Result<bool, Error> {
    let store = Store::open(&args.data.data_dir)?;
    let mut stored = Vec::new();
    let mut errors = Vec::new();
    for file in &args.files {
        let outcome = load_document(file).map_err(Error::from).and_then(|doc| {
            let res = if args.replace {
                store.put_article(&doc)
            } else {
                store.insert_article(&doc)
            };
            res.map(|()| doc.article.id).map_err(Error::from)
        });
        match outcome {
            Ok(id) => stored.push((file.display().to_string(), id)),
            Err(e) => errors.push((file.display().to_string(), e.to_string())),
        }
    }
    out.emit(
        || {
            let mut s = String::new();
            for (file, id) in &stored {
                s.push_str(&format!("stored {id} from {file}\n"));
            }
            for (file, e) in &errors {
                s.push_str(&format!("rejected {file}: {e}\n"));
            }
            s.push_str(&format!("{} stored, {} rejected\n", stored.len(), errors.len()));
            s
        },
        || {
            json!({
                "stored": stored.iter().map(|(f, id)| json!({"file": f, "id": id})).collect::<Vec<_>>(),
                "errors": errors.iter().map(|(f, e)| json!({"file": f, "error": e})).collect::<Vec<_>>(),
            })
        },
    );
    Ok(errors.is_empty())
}

fn process(out: &Output, args: ProcessArgs) -> Result<bool, Error> {
    let store = Store::open(&args.data.data_dir)?;
    let ids = if args.all {
        store.article_ids()?
    } else {
        args.ids.clone()
    };
    let produced_at = args
        .produced_at
        .unwrap_or(if args.backend.scripted.is_some() {
            ProducedAt::ArticleCreated
        } else {
            ProducedAt::Now
        });
    let backends = Backends::open(&args.backend)?;
    let pipeline = Pipeline::new(backends.gateway.clone());

    let results = Collector::new(ids.len());
    let next = AtomicUsize::new(0);
    let workers = args.backend.concurrency.clamp(1, ids.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(id) = ids.get(i) else { break };
                results.put(i, run_one(&store, &pipeline, id, produced_at));
            });
        }
    });
    backends.save_recording()?;

    let mut done: Vec<ProcessedArticle> = Vec::new();
    let mut errors = Vec::new();
    for (id, r) in ids.iter().zip(results.into_vec()) {
        match r {
            Ok(pa) => done.push(pa),
            Err(e) => errors.push((id.clone(), e)),
        }
    }
    out.emit(
        || {
            let mut s = String::new();
            for pa in &done {
                s.push_str(&format!(
                    "processed {}: {} comments, {} main points, {} hints\n",
                    pa.article_id,
                    pa.classifications.len(),
                    pa.main_points.len(),
                    pa.hints.len()
                ));
            }
            for (id, e) in &errors {
                s.push_str(&format!("failed {id}: {e}\n"));
            }
            s
        },
        || {
            json!({
                "processed": done,
                "errors": errors.iter().map(|(id, e)| json!({"id": id, "error": e})).collect::<Vec<_>>(),
            })
        },
    );
    Ok(errors.is_empty())
}

fn run_one(
    store: &Store,
    pipeline: &Pipeline,
    id: &str,
    produced_at: ProducedAt,
) -> Result<ProcessedArticle, String> {
    let article = store.require_article(id).map_err(|e| e.to_string())?;
    let pa = pipeline
        .process(&article, produced_at.resolve(&article), &|state, progress| {
            tracing::debug!(article = %id, ?state, done = progress.processed, total = progress.total, "progress");
        })
        .map_err(|e| e.to_string())?;
    store.put_processed(&pa).map_err(|e| e.to_string())?;
    Ok(pa)
}

fn eval_classify(out: &Output, args: EvalClassifyArgs) -> Result<bool, Error> {
    let gold = load_gold(&args.gold)?;
    let backends = Backends::open(&args.backend)?;
    let classifier = cnr_core::classify::Classifier::new(
        backends.gateway.clone(),
        FewShotBank::builtin(),
        cnr_core::pipeline::pipeline_version(&backends.gateway),
    );
    let predictions = classifier.predict_gold(&gold)?;
    backends.save_recording()?;
    let report = evaluate(&gold, &predictions)?;
    out.emit(|| report.to_table(), || json!(report));
    Ok(report.all_pass || !args.require_gates)
}

fn eval_agreement(out: &Output, args: EvalAgreementArgs) -> Result<bool, Error> {
    let a = load_ratings(&args.rater_a)?;
    let b = load_ratings(&args.rater_b)?;
    let (la, lb) = align_ratings(&a, &b)?;
    let mut space = args.labels.clone();
    if space.is_empty() {
        space = la.iter().chain(&lb).cloned().collect();
    }
    space.sort();
    space.dedup();
    let result = gwet_ac1(&la, &lb, &space)?;
    out.emit(
        || {
            format!(
                "items {}\ncategories {}\nobserved agreement {:?}\nchance agreement {:?}\nac1 {:?}\n",
                result.n_items,
                result.n_categories,
                result.observed_agreement,
                result.chance_agreement,
                result.ac1
            )
        },
        || json!(result),
    );
    Ok(true)
}

fn eval_ablation(out: &Output, args: EvalAblationArgs) -> Result<bool, Error> {
    let scores = load_paired_scores(&args.paired_scores)?;
    let rows = ablation_table(&scores, args.alternative);
    out.emit(|| render_table(&rows), || json!({ "rows": rows }));
    Ok(true)
}

fn eval_hints(out: &Output, args: EvalHintsArgs) -> Result<bool, Error> {
    let store = Store::open(&args.data.data_dir)?;
    let article = store.require_article(&args.article)?;
    let processed = store
        .processed(&args.article)?
        .ok_or_else(|| StoreError::NotFound(format!("{} (not processed)", args.article)))?;
    let backends = Backends::open(&args.backend)?;
    let pipeline = Pipeline::new(backends.gateway.clone());
    let without = pipeline.hints_without_comments(&article)?;
    backends.save_recording()?;
    let doc = json!({
        "article_id": article.id,
        "with_comments": processed.hints,
        "without_comments": without,
    });
    out.emit(|| to_canonical_json(&doc), || doc.clone());
    Ok(true)
}

fn serve(args: ServeArgs) -> Result<bool, Error> {
    let store = Arc::new(Store::open(&args.data.data_dir)?);
    let backends = Backends::open(&args.backend)?;
    let produced_at = args
        .produced_at
        .unwrap_or(if args.backend.scripted.is_some() {
            ProducedAt::ArticleCreated
        } else {
            ProducedAt::Now
        });
    let pipeline = Arc::new(Pipeline::new(backends.gateway.clone()));
    let app = cnr_service::router(
        store,
        pipeline,
        cnr_service::ServiceConfig {
            cors_origin: args.cors_origin,
            static_dir: args.static_dir,
            produced_at,
        },
    );
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        cnr_service::serve(listener, app).await
    })?;
    runtime.shutdown_timeout(Duration::from_secs(5));
    backends.save_recording()?;
    Ok(true)
}

/// Fixed-size result slots filled from worker threads.
struct Collector<T> {
    slots: Mutex<Vec<Option<T>>>,
}

impl<T> Collector<T> {
    fn new(n: usize) -> Self {
        Self {
            slots: Mutex::new((0..n).map(|_| None).collect()),
        }
    }

    fn put(&self, i: usize, value: T) {
        self.slots.lock().expect("lock not poisoned")[i] = Some(value);
    }

    fn into_vec(self) -> Vec<T> {
        self.slots
            .into_inner()
            .expect("lock not poisoned")
            .into_iter()
            .map(|v| v.expect("every slot filled"))
            .collect()
    }
}
