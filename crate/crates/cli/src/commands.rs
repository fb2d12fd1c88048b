//! One function per subcommand. Every command checks its inputs and output
//! directory before doing any work.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tstf::evaluation::{
    op_stability, paper_reference_rows, paper_stability_rows, prediction_timeline, progress_stratified_eval, Assessor,
    PAPER_PARAM_COUNTS, STABILITY_HEADER, STRATIFIED_HEADER, TIMELINE_HEADER,
};
use tstf::baselines::Evaluator;
use tstf::model::{count_params, ModelConfig, Variant, PRESETS};
use tstf::sim::{largest_remainder, run_tournament, schedule, split_dataset, Dataset, MatchRecord, Split, Winner};
use tstf::train::{examples, train, LOG_HEADER};
use tstf::Model64;

use crate::config::{model_name, RunConfig};
use crate::fail::Failure;

pub const VARIANTS: [Variant; 2] = [Variant::Tstf, Variant::SpaceTimeOnly];

pub const EVAL_HEADER: &str = "model,accuracy,precision,recall,f1,op,tp,fp,fn,tn";
pub const PARAMS_HEADER: &str = "preset,group,params";
pub const PARAMS_DELTA_HEADER: &str = "preset,ours,paper,delta,relative";

/// Where each artifact lives under the output directory.
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.out.join("dataset.jsonl")
    }

    pub fn split(&self) -> PathBuf {
        self.out.join("split.json")
    }

    pub fn models(&self) -> PathBuf {
        self.out.join("models")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.models().join(format!("{name}.ckpt"))
    }

    pub fn train_log(&self, name: &str) -> PathBuf {
        self.models().join(format!("train_log_{name}.csv"))
    }

    pub fn eval(&self) -> PathBuf {
        self.out.join("eval").join("metrics.csv")
    }

    pub fn compare(&self) -> PathBuf {
        self.out.join("compare")
    }

    pub fn timeline(&self, id: u32) -> PathBuf {
        self.out.join("timeline").join(format!("timeline_{id}.csv"))
    }

    pub fn params(&self) -> PathBuf {
        self.out.join("params.csv")
    }

    pub fn params_delta(&self) -> PathBuf {
        self.out.join("params_delta.csv")
    }
}

/// Create `dir` if needed and prove a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let probe = dir.join(".tstf-write-probe");
    fs::write(&probe, b"").map_err(|e| Failure::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Failure::io(&probe, e))
}

fn require(path: &Path, hint: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Missing(format!("{} not found; {hint}", path.display())))
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

pub fn cmd_generate(cfg: &RunConfig, plan_only: bool) -> Result<(), Failure> {
    let g = &cfg.generate;
    let specs = schedule(g.roster.len(), g.rounds_per_pair, cfg.seed)?;
    if plan_only {
        let sizes = largest_remainder(specs.len(), &g.split);
        let swapped = specs.iter().filter(|m| m.p1 > m.p2).count();
        println!("matches: {}", specs.len());
        println!("pairs: {}", specs.len() / g.rounds_per_pair as usize);
        println!("swapped sides: {swapped}");
        println!("split (before draw removal): train {}, test {}, validation {}", sizes[0], sizes[1], sizes[2]);
        return Ok(());
    }
    let paths = Layout::new(&cfg.out);
    ensure_writable(&paths.out)?;
    log::info!("playing {} matches", specs.len());
    let ds = run_tournament(&g.roster, g.rounds_per_pair, cfg.seed, &cfg.match_options(), g.label_rule)?;
    let split = split_dataset(&ds.records, g.split, cfg.seed)?;
    ds.save(&paths.dataset())?;
    let json = serde_json::to_string(&split).map_err(|e| Failure::Other(e.to_string()))?;
    write(&paths.split(), &(json + "\n"))?;
    println!("matches: {}", ds.records.len());
    println!("draws: {}", split.draws);
    println!(
        "split: train {}, test {}, validation {}",
        split.train.len(),
        split.test.len(),
        split.validation.len()
    );
    Ok(())
}

fn load_data(paths: &Layout) -> Result<(Dataset, Split), Failure> {
    let hint = "run `tstf generate` first";
    require(&paths.dataset(), hint)?;
    require(&paths.split(), hint)?;
    let ds = Dataset::load(&paths.dataset())?;
    let text = fs::read_to_string(paths.split()).map_err(|e| Failure::io(&paths.split(), e))?;
    let split: Split = serde_json::from_str(&text).map_err(|e| Failure::Other(format!("{}: {e}", paths.split().display())))?;
    let n = ds.records.len();
    if let Some(bad) = split.train.iter().chain(&split.test).chain(&split.validation).find(|&&i| i >= n) {
        return Err(Failure::Other(format!("split index {bad} out of range for {n} records")));
    }
    Ok((ds, split))
}

fn pick<'a>(ds: &'a Dataset, idx: &[usize]) -> Vec<&'a MatchRecord> {
    idx.iter().map(|&i| &ds.records[i]).collect()
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), Failure> {
    let paths = Layout::new(&cfg.out);
    let tcfg = cfg.train_config()?;
    let configs = VARIANTS
        .iter()
        .map(|&v| cfg.model_config(v))
        .collect::<Result<Vec<_>, _>>()?;
    let (ds, split) = load_data(&paths)?;
    ensure_writable(&paths.models())?;
    for mcfg in configs {
        let name = model_name(&mcfg);
        let train_set = examples::<f64>(&pick(&ds, &split.train), mcfg.frames, 1.0)?;
        let val_set = examples::<f64>(&pick(&ds, &split.validation), mcfg.frames, 1.0)?;
        let mut model = Model64::new(mcfg, cfg.seed)?;
        log::info!(
            "training {name}: {} parameters, {} train / {} validation examples",
            model.num_params(),
            train_set.len(),
            val_set.len()
        );
        let outcome = train(&mut model, &train_set, &val_set, &tcfg, |_| {})?;
        model.params = outcome.best;
        model.save(&paths.checkpoint(&name))?;
        write(&paths.train_log(&name), &csv(LOG_HEADER, outcome.log.iter().map(|r| r.csv())))?;
        let best = &outcome.log[outcome.best_epoch];
        println!(
            "{name}: best epoch {} train_acc {:.4} val_acc {:.4}",
            best.epoch, best.train_acc, best.val_acc
        );
    }
    Ok(())
}

fn load_models(cfg: &RunConfig, paths: &Layout) -> Result<Vec<Model64>, Failure> {
    let mut out = Vec::new();
    for v in VARIANTS {
        let name = model_name(&cfg.model_config(v)?);
        let ckpt = paths.checkpoint(&name);
        require(&ckpt, "run `tstf train` first")?;
        require(&Model64::config_path(&ckpt), "run `tstf train` first")?;
        out.push(Model64::load(&ckpt)?);
    }
    Ok(out)
}

fn assessors<'a>(cfg: &'a RunConfig, models: &'a [Model64]) -> Vec<Assessor<'a, f64>> {
    let mut out: Vec<Assessor<'a, f64>> = models
        .iter()
        .map(|m| Assessor::Neural {
            name: model_name(&m.config),
            model: m,
            threshold: cfg.train.threshold,
        })
        .collect();
    out.extend(Evaluator::ALL.iter().map(|&evaluator| Assessor::Classical {
        evaluator,
        weights: &cfg.eval.weights,
    }));
    out
}

fn test_records<'a>(ds: &'a Dataset, split: &Split) -> Result<Vec<&'a MatchRecord>, Failure> {
    if split.test.is_empty() {
        return Err(Failure::Config("empty dataset: the test split has no matches".into()));
    }
    Ok(pick(ds, &split.test))
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<(), Failure> {
    let paths = Layout::new(&cfg.out);
    let (ds, split) = load_data(&paths)?;
    let test = test_records(&ds, &split)?;
    let models = load_models(cfg, &paths)?;
    ensure_writable(paths.eval().parent().unwrap())?;
    let mut rows = Vec::new();
    for a in assessors(cfg, &models) {
        let r = progress_stratified_eval(&a, &test, &[1.0])?.remove(0).report;
        let c = r.confusion;
        let row = format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            a.name(),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.op,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        );
        println!("{row}");
        rows.push(row);
    }
    write(&paths.eval(), &csv(EVAL_HEADER, rows))
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<(), Failure> {
    let paths = Layout::new(&cfg.out);
    let (ds, split) = load_data(&paths)?;
    let test = test_records(&ds, &split)?;
    let models = load_models(cfg, &paths)?;
    let dir = paths.compare();
    ensure_writable(&dir)?;
    let mut tables = Vec::new();
    for a in assessors(cfg, &models) {
        let rows = progress_stratified_eval(&a, &test, &cfg.eval.fractions)?;
        write(&dir.join(format!("{}.csv", a.name())), &csv(STRATIFIED_HEADER, rows.iter().map(|r| r.csv())))?;
        for r in &rows {
            println!("{}", r.csv());
        }
        tables.push(rows);
    }
    write(&dir.join("reference.csv"), &csv(STRATIFIED_HEADER, paper_reference_rows()))?;
    let stability = op_stability(&tables).iter().map(|r| r.csv()).chain(paper_stability_rows()).collect::<Vec<_>>();
    write(&dir.join("stability.csv"), &csv(STABILITY_HEADER, stability))
}

pub fn cmd_timeline(cfg: &RunConfig) -> Result<(), Failure> {
    let paths = Layout::new(&cfg.out);
    let (ds, split) = load_data(&paths)?;
    let id = match cfg.eval.match_id {
        Some(id) => id,
        None => test_records(&ds, &split)?[0].id,
    };
    let rec = ds
        .by_id(id)
        .ok_or_else(|| Failure::Config(format!("no match with id {id} in {}", paths.dataset().display())))?;
    let models = load_models(cfg, &paths)?;
    let out = paths.timeline(id);
    ensure_writable(out.parent().unwrap())?;
    let label = match rec.winner {
        Winner::P1 => "p1",
        Winner::P2 => "p2",
        Winner::Draw => "draw",
    };
    let rows = prediction_timeline(&assessors(cfg, &models), rec)?;
    let mut text = String::from(
        "# neural rows report (p1_score, p2_score) = (y, 1 - y) with y the player-1 win probability; \
         classical rows report each side's evaluator score\n",
    );
    text.push_str(&csv(TIMELINE_HEADER, rows.iter().map(|r| r.csv(label))));
    write(&out, &text)?;
    println!("match {id}: {} rows, label {label}, written to {}", rows.len(), out.display());
    Ok(())
}

pub fn cmd_params(cfg: &RunConfig) -> Result<(), Failure> {
    let paths = Layout::new(&cfg.out);
    ensure_writable(&paths.out)?;
    let mut groups = Vec::new();
    let mut deltas = Vec::new();
    let mut report = String::new();
    for preset in PRESETS {
        let b = count_params(&ModelConfig::preset(preset)?);
        for (g, n) in b.groups() {
            groups.push(format!("{preset},{g},{n}"));
        }
        groups.push(format!("{preset},layer_local,{}", b.layer_local()));
        groups.push(format!("{preset},total,{}", b.total()));
        writeln!(report, "{preset}\n{b}").unwrap();
        if let Some(&(_, paper)) = PAPER_PARAM_COUNTS.iter().find(|(p, _)| *p == preset) {
            let delta = b.total() as i64 - paper as i64;
            let rel = delta as f64 / paper as f64;
            deltas.push(format!("{preset},{},{paper},{delta},{rel:.4}", b.total()));
            writeln!(report, "  paper {paper}, delta {delta} ({:+.1}%)\n", rel * 100.0).unwrap();
        }
    }
    write(&paths.params(), &csv(PARAMS_HEADER, groups))?;
    write(&paths.params_delta(), &csv(PARAMS_DELTA_HEADER, deltas))?;
    print!("{report}");
    Ok(())
}
