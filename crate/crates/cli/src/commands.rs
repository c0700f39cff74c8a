use std::path::{Path, PathBuf};

use rayon::prelude::*;
use topicchoice::evaluation::{
    evaluate_model, predict_all, reports_to_csv, slate_uplifts, topic_breakdown, topics_to_csv, UpliftSpec,
};
use topicchoice::gsdmm::{fit_gsdmm, parse_assignment_tsv, topic_histogram, Corpus};
use topicchoice::logit::{train_logit, LogitParams};
use topicchoice::net::{checkpoint_bytes, dataset_bce, parse_checkpoint, train as train_net, ModelParams, TrainConfig};
use topicchoice::optimizer::{exhaustive_slate, greedy_slate_with, top_n_slate, SlateMethod, SlateProblem};
use topicchoice::pipeline::{prepare_splits, split_periods, Dataset, InteractionLog, ModelInputs};
use topicchoice::simulator::{generate_log, ground_truth_auc_bound, sample_users, GroundTruthModel, SimConfig};
use topicchoice::{ChoiceModel, Error};

use crate::config::RunConfig;
use crate::manifest::{sha256_file, Workdir, EXTERNAL};
use crate::{CliError, ModelArg};

pub const ASSIGNMENT: &str = "assignment.tsv";
pub const HISTOGRAM: &str = "topic_histogram.tsv";
pub const LOG: &str = "interactions.tsv";
pub const TRUTH: &str = "truth.engp";
pub const SIMULATION: &str = "simulation.toml";
pub const TRAIN: &str = "train.engt";
pub const VALID: &str = "valid.engt";
pub const TEST: &str = "test.engt";
pub const USERS: &str = "users.tsv";
pub const MODEL: &str = "model.caem";
pub const LOGIT: &str = "logit.blgt";
pub const LOSS_CURVE: &str = "loss_curve.tsv";
pub const LOGIT_FIT: &str = "logit_fit.tsv";
pub const REPORT: &str = "report.csv";
pub const REPORT_TOPICS: &str = "report_topics.csv";
pub const UPLIFT: &str = "uplift.tsv";
pub const SWEEP: &str = "sweep.tsv";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Workdir,
}

type CmdResult = Result<(), CliError>;

fn read_text(path: &Path) -> Result<String, CliError> {
    Ok(std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn toml_text<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    Ok(toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?)
}

fn external(path: &Path) -> Result<(String, String), CliError> {
    Ok((format!("{EXTERNAL}{}", path.display()), sha256_file(path)?))
}

fn load_dataset(ctx: &Ctx, name: &str) -> Result<(Dataset, (String, String)), CliError> {
    let (path, hash) = ctx.out.require(name, "prepare")?;
    Ok((Dataset::load(path)?, (name.to_string(), hash)))
}

fn load_users(ctx: &Ctx) -> Result<(Vec<String>, (String, String)), CliError> {
    let (path, hash) = ctx.out.require(USERS, "prepare")?;
    let ids = read_text(&path)?.lines().skip(1).map(str::to_string).collect();
    Ok((ids, (USERS.to_string(), hash)))
}

fn load_net(ctx: &Ctx, data: &Dataset) -> Result<(ModelParams, (String, String)), CliError> {
    let (path, hash) = ctx.out.require(MODEL, "train")?;
    let expected = ctx.cfg.model_config(data.num_topics, data.history_len);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok((parse_checkpoint(&bytes, Some(&expected))?, (MODEL.to_string(), hash)))
}

fn load_logit(ctx: &Ctx, data: &Dataset) -> Result<(LogitParams, (String, String)), CliError> {
    let (path, hash) = ctx.out.require(LOGIT, "train")?;
    let params = LogitParams::load(&path)?;
    for (name, expected, found) in [
        ("topics", data.num_topics, params.num_topics),
        ("history_len", data.history_len, params.history_len),
    ] {
        if expected != found {
            return Err(topicchoice::CheckpointError::DimensionMismatch { name, expected, found }.into());
        }
    }
    Ok((params, (LOGIT.to_string(), hash)))
}

pub fn cluster(ctx: &Ctx, input: Option<PathBuf>, raw: bool) -> CmdResult {
    let path = input
        .or_else(|| ctx.cfg.paths.corpus.clone())
        .ok_or_else(|| Error::Config("no corpus given; pass --input or set paths.corpus".into()))?;
    let (corpus, _) = Corpus::parse_tsv(&read_text(&path)?, raw || ctx.cfg.clustering.raw_text)?;
    let cfg = ctx.cfg.clustering_config();
    let assignment = fit_gsdmm(&corpus, &cfg)?;
    ctx.out.write(ASSIGNMENT, assignment.to_tsv(corpus.doc_ids()))?;
    let mut hist = String::from("topic\tcount\n");
    for (topic, count) in topic_histogram(&assignment) {
        hist.push_str(&format!("{topic}\t{count}\n"));
    }
    ctx.out.write(HISTOGRAM, hist)?;
    let config = format!("{}raw={raw}\n", toml_text(&cfg)?);
    ctx.out.record("cluster", &[external(&path)?], &config, &[ASSIGNMENT, HISTOGRAM])?;
    println!("J={}", assignment.num_topics());
    Ok(())
}

pub fn simulate(ctx: &Ctx, without_substitution: bool) -> CmdResult {
    let cfg = ctx.cfg.sim_config(without_substitution);
    let out = generate_log(&cfg)?;
    let mut log = Vec::new();
    out.log.write_tsv(&mut log)?;
    ctx.out.write(LOG, log)?;
    ctx.out.write(TRUTH, out.truth.to_bytes())?;
    let config = toml_text(&cfg)?;
    ctx.out.write(SIMULATION, &config)?;
    ctx.out.record("simulate", &[], &config, &[LOG, TRUTH, SIMULATION])?;
    let last = cfg.num_periods - 1;
    println!(
        "records={} users={} topics={} ceiling_auc_last_period={}",
        out.log.len(),
        cfg.num_users,
        cfg.num_topics,
        ground_truth_auc_bound(&out.truth, last..last + 1)
            .map(|v| v.to_string())
            .unwrap_or_else(|_| "undefined".into())
    );
    Ok(())
}

pub fn prepare(ctx: &Ctx, log: Option<PathBuf>, topics: Option<PathBuf>) -> CmdResult {
    let cfg = &ctx.cfg;
    let mut inputs = Vec::new();
    let log_path = match log.or_else(|| cfg.paths.log.clone()) {
        Some(p) => {
            inputs.push(external(&p)?);
            p
        }
        None => {
            let (p, hash) = ctx.out.require(LOG, "simulate")?;
            inputs.push((LOG.to_string(), hash));
            p
        }
    };
    let file = std::fs::File::open(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut records = InteractionLog::read_tsv(std::io::BufReader::new(file), &log_path.display().to_string())?;
    let mut declared = None;
    if let Some(path) = topics.or_else(|| cfg.paths.topics.clone()) {
        let (map, j) = parse_assignment_tsv(&read_text(&path)?)?;
        records = records.with_topics(&map)?;
        declared = Some(j);
        inputs.push(external(&path)?);
    }
    if cfg.pipeline.min_tweets > 0 {
        records = records.filter_min_tweets(cfg.pipeline.min_tweets);
    }
    let num_topics = match cfg.pipeline.num_topics.or(declared) {
        Some(j) => j,
        None => {
            records
                .records
                .iter()
                .map(|r| r.topic + 1)
                .max()
                .ok_or_else(|| Error::input(format!("{}: log has no records", log_path.display())))?
        }
    };
    let t_len = cfg.pipeline.history_len;
    let grid = cfg.pipeline.grid();
    grid.validate(t_len)?;
    let tensor = split_periods(&records, &grid, num_topics, cfg.pipeline.engagement)?;
    let splits = prepare_splits(&tensor, t_len, &cfg.split)?;
    for (name, instances) in [(TRAIN, &splits.train), (VALID, &splits.valid), (TEST, &splits.test)] {
        let data = Dataset {
            num_users: tensor.num_users(),
            num_topics,
            history_len: t_len,
            num_periods: tensor.num_periods,
            instances: instances.clone(),
        };
        ctx.out.write(name, data.to_bytes())?;
    }
    let mut users = String::from("user_id\n");
    for id in &tensor.user_ids {
        users.push_str(id);
        users.push('\n');
    }
    ctx.out.write(USERS, users)?;
    let config = format!("{}{}", toml_text(&cfg.pipeline)?, toml_text(&cfg.split)?);
    ctx.out.record("prepare", &inputs, &config, &[TRAIN, VALID, TEST, USERS])?;
    println!(
        "users={} topics={} train={} valid={} test={} test_periods={:?}",
        tensor.num_users(),
        num_topics,
        splits.train.len(),
        splits.valid.len(),
        splits.test.len(),
        splits.test_periods
    );
    Ok(())
}

pub fn train(ctx: &Ctx) -> CmdResult {
    let (train, h_train) = load_dataset(ctx, TRAIN)?;
    let (valid, h_valid) = load_dataset(ctx, VALID)?;
    let mc = ctx.cfg.model_config(train.num_topics, train.history_len);
    let (params, curve) = train_net(&train.instances, Some(&valid.instances), &mc, &ctx.cfg.training)?;
    ctx.out.write(MODEL, checkpoint_bytes(&params))?;
    ctx.out.write(LOSS_CURVE, curve.to_tsv())?;

    let fit = train_logit(&train.instances, &ctx.cfg.logit_config())?;
    ctx.out.write(LOGIT, fit.params.to_bytes())?;
    let mut table = String::from("topic\tdegenerate\tconverged\titerations\tobjective\n");
    for (j, t) in fit.topics.iter().enumerate() {
        table.push_str(&format!("{j}\t{}\t{}\t{}\t{}\n", t.degenerate, t.converged, t.iterations, t.objective));
    }
    ctx.out.write(LOGIT_FIT, table)?;

    let config = format!(
        "seed={}\n{}{}{}",
        ctx.cfg.seed,
        toml_text(&ctx.cfg.model)?,
        toml_text(&ctx.cfg.training)?,
        toml_text(&ctx.cfg.logit)?
    );
    ctx.out.record("train", &[h_train, h_valid], &config, &[MODEL, LOSS_CURVE, LOGIT, LOGIT_FIT])?;
    if let Some(last) = curve.last() {
        println!(
            "epochs={} train_bce={} valid_bce={}",
            last.epoch,
            last.train_bce,
            last.valid_bce.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    let degenerate = fit.topics.iter().filter(|t| t.degenerate).count();
    if degenerate > 0 {
        println!("logit: {degenerate} degenerate topics fit with ridge only");
    }
    Ok(())
}

/// Ground truth is available when the log came from `simulate` in this work
/// directory, or when a simulation config is named explicitly.
fn simulation_config(ctx: &Ctx, explicit: Option<PathBuf>) -> Result<Option<(SimConfig, (String, String))>, CliError> {
    let explicit = explicit.or_else(|| ctx.cfg.paths.simulation.clone());
    let (path, input) = match explicit {
        Some(p) => {
            let input = external(&p)?;
            (p, input)
        }
        None => {
            let chained = ctx
                .out
                .manifest("prepare")?
                .is_some_and(|m| m.inputs.contains_key(LOG));
            if !chained {
                return Ok(None);
            }
            let (p, hash) = ctx.out.require(SIMULATION, "simulate")?;
            (p, (SIMULATION.to_string(), hash))
        }
    };
    let cfg: SimConfig =
        toml::from_str(&read_text(&path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(Some((cfg, input)))
}

pub fn evaluate(ctx: &Ctx, simulation: Option<PathBuf>) -> CmdResult {
    let (test, h_test) = load_dataset(ctx, TEST)?;
    let (user_ids, h_users) = load_users(ctx)?;
    let (net, h_net) = load_net(ctx, &test)?;
    let (logit, h_logit) = load_logit(ctx, &test)?;
    let mut inputs = vec![h_test, h_users, h_net, h_logit];
    let truth = match simulation_config(ctx, simulation)? {
        Some((sim, input)) => {
            inputs.push(input);
            let users = sample_users(&sim)?;
            Some(GroundTruthModel::new(&sim, &users, &user_ids)?)
        }
        None => None,
    };
    if let Some(t) = &truth {
        if t.history_len() != test.history_len {
            return Err(Error::Config(format!(
                "simulation uses {} recency weights but the data has history length {}",
                t.history_len(),
                test.history_len
            ))
            .into());
        }
    }
    let mut models: Vec<&dyn ChoiceModel> = vec![&net, &logit];
    if let Some(t) = &truth {
        models.push(t);
    }
    let spec = UpliftSpec {
        n: ctx.cfg.slate.n,
        scorer: &net,
        variant: ctx.cfg.slate.variant,
    };
    let data = &test.instances;
    let mut reports = Vec::new();
    let mut topics = Vec::new();
    for &model in &models {
        reports.push(evaluate_model(model, data, Some(&spec))?);
        topics.push((model.name().to_string(), topic_breakdown(&predict_all(model, data)?)));
    }
    let mut uplift = String::from("model\tscorer\tmean_uplift\n");
    for &scorer in &models {
        if scorer.name() != net.name() && scorer.name() != "ground_truth" {
            continue;
        }
        for &model in &models {
            let values = slate_uplifts(model, data, &UpliftSpec { scorer, ..spec })?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            uplift.push_str(&format!("{}\t{}\t{mean}\n", model.name(), scorer.name()));
        }
    }
    let csv = reports_to_csv(&reports);
    ctx.out.write(REPORT, &csv)?;
    ctx.out.write(REPORT_TOPICS, topics_to_csv(&topics))?;
    ctx.out.write(UPLIFT, &uplift)?;
    let config = toml_text(&ctx.cfg.slate)?;
    ctx.out.record("evaluate", &inputs, &config, &[REPORT, REPORT_TOPICS, UPLIFT])?;
    print!("{csv}");
    Ok(())
}

fn slate_file(model: &str) -> String {
    format!("slates_{model}.tsv")
}

pub fn optimize(ctx: &Ctx, which: ModelArg, method: Option<SlateMethod>, n: Option<usize>) -> CmdResult {
    let (test, h_test) = load_dataset(ctx, TEST)?;
    let (user_ids, h_users) = load_users(ctx)?;
    let net;
    let logit;
    let (model, h_model): (&dyn ChoiceModel, _) = match which {
        ModelArg::Net => {
            let (m, h) = load_net(ctx, &test)?;
            net = m;
            (&net, h)
        }
        ModelArg::Logit => {
            let (m, h) = load_logit(ctx, &test)?;
            logit = m;
            (&logit, h)
        }
    };
    let method = method.unwrap_or(ctx.cfg.slate.method);
    let n = n.unwrap_or(ctx.cfg.slate.n);
    let last = test
        .instances
        .iter()
        .map(|i| i.target_period)
        .max()
        .ok_or_else(|| Error::input("test split is empty"))?;
    let instances: Vec<&ModelInputs> = test.instances.iter().filter(|i| i.target_period == last).collect();
    let cap = ctx.cfg.slate.search_cap;
    let variant = ctx.cfg.slate.variant;
    let results = instances
        .par_iter()
        .map(|inst| {
            let problem = SlateProblem {
                model,
                context: inst.context(),
                n,
            };
            match method {
                SlateMethod::Greedy => greedy_slate_with(&problem, variant),
                SlateMethod::Exhaustive => exhaustive_slate(&problem, cap),
                SlateMethod::TopN => top_n_slate(&problem),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::new();
    for (inst, res) in instances.iter().zip(&results) {
        let id = user_ids
            .get(inst.user)
            .ok_or_else(|| Error::input(format!("user row {} missing from {USERS}", inst.user)))?;
        let topics: Vec<String> = res.chosen.iter().map(usize::to_string).collect();
        out.push_str(&format!("{id}\t{}\t{}\t{}\n", res.method.as_str(), topics.join(","), res.uplift));
    }
    let mean = results.iter().map(|r| r.uplift).sum::<f64>() / results.len() as f64;
    out.push_str(&format!("#mean_uplift\t{mean}\n"));
    let name = slate_file(model.name());
    ctx.out.write(&name, &out)?;
    let config = format!("method={}\nn={n}\nvariant={variant:?}\ncap={cap}\n", method.as_str());
    ctx.out.record(&format!("optimize-{}", model.name()), &[h_test, h_users, h_model], &config, &[&name])?;
    println!("slates={} n={n} method={} mean_uplift={mean}", results.len(), method.as_str());
    Ok(())
}

pub fn sweep(ctx: &Ctx) -> CmdResult {
    let (train, h_train) = load_dataset(ctx, TRAIN)?;
    let (valid, h_valid) = load_dataset(ctx, VALID)?;
    let s = &ctx.cfg.sweep;
    if s.num_filters.is_empty() || s.batch_size.is_empty() || s.lr.is_empty() {
        return Err(Error::Config("every sweep list needs at least one value".into()).into());
    }
    let mut points = Vec::new();
    for &h in &s.num_filters {
        for &b in &s.batch_size {
            for &lr in &s.lr {
                points.push((h, b, lr));
            }
        }
    }
    let losses = points
        .par_iter()
        .map(|&(h, batch_size, lr)| {
            let mut mc = ctx.cfg.model_config(train.num_topics, train.history_len);
            mc.num_filters = h;
            let hyper = TrainConfig {
                lr,
                batch_size,
                ..ctx.cfg.training
            };
            let (params, _) = train_net(&train.instances, None, &mc, &hyper)?;
            dataset_bce(&params, &valid.instances)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let best = (0..losses.len())
        .min_by(|&a, &b| losses[a].total_cmp(&losses[b]))
        .expect("at least one point");
    let mut table = String::from("num_filters\tbatch_size\tlr\tvalid_bce\tselected\n");
    for (k, (&(h, b, lr), loss)) in points.iter().zip(&losses).enumerate() {
        table.push_str(&format!("{h}\t{b}\t{lr:e}\t{loss}\t{}\n", (k == best) as u8));
    }
    ctx.out.write(SWEEP, &table)?;
    let config = format!("seed={}\n{}{}{}", ctx.cfg.seed, toml_text(&ctx.cfg.model)?, toml_text(&ctx.cfg.training)?, toml_text(s)?);
    ctx.out.record("sweep", &[h_train, h_valid], &config, &[SWEEP])?;
    let (h, b, lr) = points[best];
    println!("selected num_filters={h} batch_size={b} lr={lr:e} valid_bce={}", losses[best]);
    Ok(())
}
