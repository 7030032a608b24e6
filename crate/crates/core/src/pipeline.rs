//! Stage graph, staleness stamps and the stage implementations behind the
//! command line.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::Backend;
use crate::catalog;
use crate::config::{Config, ConfigError, CorpusOrigin, Settings};
use crate::corpus::{self, CorpusStore, FetchMode, LiveTracker, MiningReport};
use crate::dataset::{self, DatasetMix, GenerationRecord, ConversionRecord};
use crate::harness::{self, CampaignConfig, Device, ExecutionOutcome, Job, JobKey, Role};
use crate::library::ImportTable;
use crate::metrics::{self, BehaviorSignature, CampaignMetrics, Reproduction};
use crate::oracle::{self, BacktestSpec, SeedJudgement, SourceApiMap};
use crate::pairs::{self, PairSettings};
use crate::prompt::{self, PromptContext, PromptTemplate};
use crate::seeds::{self, SeedCode, SeedContext, SeedKind};
use crate::util::{read_ndrec, sanitize_component, write_atomic, write_ndrec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Mine,
    Catalog,
    Prompts,
    Pairs,
    Mutate,
    Dataset,
    FinetuneConfig,
    Convert,
    Generate,
    Run,
    Oracle,
    Backtest,
    Report,
}

impl Stage {
    /// Every stage, in an order where dependencies come first.
    pub const ALL: [Stage; 13] = [
        Stage::Mine,
        Stage::Catalog,
        Stage::Prompts,
        Stage::Pairs,
        Stage::Mutate,
        Stage::Dataset,
        Stage::FinetuneConfig,
        Stage::Convert,
        Stage::Generate,
        Stage::Run,
        Stage::Oracle,
        Stage::Backtest,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mine => "mine",
            Stage::Catalog => "catalog",
            Stage::Prompts => "prompts",
            Stage::Pairs => "pairs",
            Stage::Mutate => "mutate",
            Stage::Dataset => "dataset",
            Stage::FinetuneConfig => "finetune-config",
            Stage::Convert => "convert",
            Stage::Generate => "generate",
            Stage::Run => "run",
            Stage::Oracle => "oracle",
            Stage::Backtest => "backtest",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Mine | Stage::Catalog => &[],
            Stage::Prompts => &[Stage::Catalog],
            Stage::Pairs => &[Stage::Prompts],
            Stage::Mutate => &[Stage::Pairs],
            Stage::Dataset => &[Stage::Mutate],
            Stage::FinetuneConfig => &[Stage::Dataset],
            Stage::Convert => &[Stage::Mine, Stage::FinetuneConfig],
            Stage::Generate => &[Stage::Catalog, Stage::FinetuneConfig],
            Stage::Run => &[Stage::Convert, Stage::Generate],
            Stage::Oracle => &[Stage::Run],
            Stage::Backtest => &[Stage::Oracle],
            Stage::Report => &[Stage::Oracle, Stage::Backtest],
        }
    }

    /// Config sections whose contents feed this stage.
    fn sections(self) -> &'static [&'static str] {
        match self {
            Stage::Mine => &["corpus"],
            Stage::Catalog => &["catalog"],
            Stage::Prompts => &["prompts"],
            Stage::Pairs => &["pairs", "backend.pairs"],
            Stage::Mutate => &["mutate"],
            Stage::Dataset => &["dataset"],
            Stage::FinetuneConfig => &["finetune", "dataset"],
            Stage::Convert => &["backend.seeds"],
            Stage::Generate => &["generate", "backend.seeds"],
            Stage::Run => &["run"],
            Stage::Oracle => &["oracle"],
            Stage::Backtest => &["backtest", "run"],
            Stage::Report => &["report", "generate"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage `{stage}` needs `{needs}` to run first (try `futur {needs}`)")]
    MissingPrerequisite { stage: Stage, needs: Stage },
    #[error("stage `{stage}` failed: {reason}")]
    Failed { stage: Stage, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Failed { .. } => 2,
            PipelineError::MissingPrerequisite { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageStatus {
    Ran(String),
    UpToDate,
}

type StageResult = Result<String, String>;

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn hash_path(h: &mut Sha256, path: &Path) {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
            .unwrap_or_default();
        entries.sort();
        for e in entries {
            h.update(e.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
            hash_path(h, &e);
        }
    } else if let Ok(bytes) = fs::read(path) {
        h.update(&bytes);
    }
}

pub struct Pipeline {
    pub config: Config,
    pub settings: Settings,
    /// Raised to stop the execution campaign between jobs.
    pub stop: Option<Arc<AtomicBool>>,
}

impl Pipeline {
    pub fn new(config: Config) -> Result<Self, ConfigError> {
        let settings = Settings::from_config(&config)?;
        Ok(Pipeline {
            config,
            settings,
            stop: None,
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut config = Config::load(path)?;
        config.apply_env(std::env::vars());
        for o in overrides {
            config.apply_override(o)?;
        }
        Pipeline::new(config)
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.settings.output.join(rel)
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.out(".stamps").join(format!("{stage}.stamp"))
    }

    fn read_stamp(&self, stage: Stage) -> Option<String> {
        fs::read_to_string(self.stamp_path(stage)).ok().map(|s| s.trim().to_string())
    }

    /// Content hash of everything the stage reads: its config sections,
    /// external input files, and the stamps of its dependencies.
    pub fn fingerprint(&self, stage: Stage) -> String {
        let mut h = Sha256::new();
        h.update(stage.name());
        let mut sections: Vec<&str> = vec!["campaign"];
        sections.extend(self.config.section_names().filter(|s| s.starts_with("library.")));
        sections.extend(stage.sections());
        for s in sections {
            h.update(format!("[{s}]"));
            for (k, v) in self.config.section(s) {
                h.update(format!("{k}={v}\n"));
            }
        }
        let s = &self.settings;
        let mut files: Vec<PathBuf> = Vec::new();
        match stage {
            Stage::Mine => files.extend(s.corpus.values().filter_map(|o| match o {
                CorpusOrigin::Dump(p) => Some(p.clone()),
                CorpusOrigin::Live { .. } => None,
            })),
            Stage::Catalog => files.push(s.docs.clone()),
            Stage::Prompts => files.extend(s.template.clone()),
            Stage::Pairs => files.extend(rulebook(&s.pair_backend)),
            Stage::Convert | Stage::Generate => files.extend(rulebook(&s.seed_backend)),
            Stage::Oracle => files.extend(s.overrides.clone()),
            _ => {}
        }
        for f in files {
            h.update(f.display().to_string());
            hash_path(&mut h, &f);
        }
        for d in stage.deps() {
            h.update(self.read_stamp(*d).unwrap_or_default());
        }
        hex::encode(h.finalize())
    }

    pub fn is_up_to_date(&self, stage: Stage) -> bool {
        self.read_stamp(stage).is_some_and(|s| s == self.fingerprint(stage))
    }

    /// Run one stage if its inputs changed since it last completed.
    pub fn run_stage(&self, stage: Stage) -> Result<StageStatus, PipelineError> {
        if let Some(&needs) = stage.deps().iter().find(|d| self.read_stamp(**d).is_none()) {
            return Err(PipelineError::MissingPrerequisite { stage, needs });
        }
        let fp = self.fingerprint(stage);
        if self.read_stamp(stage).as_deref() == Some(fp.as_str()) {
            return Ok(StageStatus::UpToDate);
        }
        let _ = fs::remove_file(self.stamp_path(stage));
        let result = match stage {
            Stage::Mine => self.mine(),
            Stage::Catalog => self.catalog(),
            Stage::Prompts => self.prompts(),
            Stage::Pairs => self.pairs(),
            Stage::Mutate => self.mutate(),
            Stage::Dataset => self.dataset(),
            Stage::FinetuneConfig => self.finetune_config(),
            Stage::Convert => self.convert(),
            Stage::Generate => self.generate(),
            Stage::Run => self.run(&fp),
            Stage::Oracle => self.oracle(),
            Stage::Backtest => self.backtest(),
            Stage::Report => self.report(),
        };
        let summary = result.map_err(|reason| PipelineError::Failed { stage, reason })?;
        write_atomic(&self.stamp_path(stage), format!("{fp}\n").as_bytes())
            .map_err(|e| PipelineError::Failed { stage, reason: e.to_string() })?;
        Ok(StageStatus::Ran(summary))
    }

    /// Every stage in dependency order; stops at the first failure.
    pub fn run_all(&self, mut progress: impl FnMut(Stage, &StageStatus)) -> Result<(), PipelineError> {
        for stage in Stage::ALL {
            let status = self.run_stage(stage)?;
            progress(stage, &status);
        }
        Ok(())
    }

    fn fresh_dir(&self, rel: &str) -> Result<PathBuf, String> {
        let dir = self.out(rel);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(err)?;
        }
        fs::create_dir_all(&dir).map_err(err)?;
        Ok(dir)
    }

    fn target_display(&self) -> &str {
        &self.settings.target_profile().display_name
    }

    // --- stages -------------------------------------------------------

    fn mine(&self) -> StageResult {
        let s = &self.settings;
        let root = self.fresh_dir("corpus")?;
        let mut store = CorpusStore::create(&root, "py").map_err(err)?;
        let imports = ImportTable::from_profiles(s.sources.iter().map(|id| s.profile(id)));
        let mut rows = String::from("source\tlabel\tissues\textracted\tstored\trejected\tpartial\n");
        let mut total = MiningReport::default();
        for src in &s.sources {
            let mode = match s.corpus.get(src) {
                Some(CorpusOrigin::Dump(p)) => FetchMode::OfflineDump(p.clone()),
                Some(CorpusOrigin::Live { repo }) => FetchMode::Live(LiveTracker::github(
                    repo,
                    s.token_env.as_ref().and_then(|v| std::env::var(v).ok()),
                )),
                None => return Err(format!("no [corpus] dump.{src} or repo.{src} entry")),
            };
            for label in &s.labels {
                let fetched = corpus::fetch_issues(src, label, &mode, s.since.as_deref()).map_err(err)?;
                let r = corpus::mine_issues(&fetched.issues, corpus::DEFAULT_KEYWORDS, &imports, &mut store)
                    .map_err(err)?;
                rows.push_str(&format!(
                    "{src}\t{label}\t{}\t{}\t{}\t{}\t{}\n",
                    r.issues, r.extracted, r.stored, r.rejected, fetched.partial
                ));
                total.issues += r.issues;
                total.extracted += r.extracted;
                total.stored += r.stored;
                total.rejected += r.rejected;
            }
        }
        write_atomic(&root.join("mining.tsv"), rows.as_bytes()).map_err(err)?;
        Ok(format!(
            "{} issues, {} snippets extracted, {} stored, {} rejected",
            total.issues, total.extracted, total.stored, total.rejected
        ))
    }

    fn catalog(&self) -> StageResult {
        let s = &self.settings;
        let dir = self.fresh_dir("catalog")?;
        let apis = catalog::ingest_api_docs(&s.docs, &s.target).map_err(err)?;
        if apis.is_empty() {
            return Err(format!("{}: no API records found", s.docs.display()));
        }
        let apis = catalog::resolve_references(&apis);
        catalog::write_catalog(&dir, &s.target, &apis).map_err(err)?;
        let undocumented = apis.iter().filter(|a| a.undocumented).count();
        Ok(format!("{} APIs ({undocumented} undocumented)", apis.len()))
    }

    fn load_catalog(&self) -> Result<Vec<catalog::ApiInfo>, String> {
        catalog::load_catalog(&self.out("catalog"), &self.settings.target).map_err(err)
    }

    fn prompts(&self) -> StageResult {
        let s = &self.settings;
        let dir = self.fresh_dir("prompts")?;
        let template = match &s.template {
            Some(p) => PromptTemplate::load(p).map_err(err)?,
            None => PromptTemplate::default(),
        };
        let ctx = PromptContext::new(&s.primary_source().display_name, self.target_display());
        let mut all = Vec::new();
        let mut skipped = String::from("api\texample\treason\n");
        for api in self.load_catalog()? {
            let out = prompt::build_prompts(&api, &template, s.token_budget, &ctx);
            all.extend(out.prompts);
            for sk in out.skipped {
                let ex = sk.example_index.map_or("-".to_string(), |i| i.to_string());
                skipped.push_str(&format!("{}\t{ex}\t{:?}\n", sk.api, sk.reason));
            }
        }
        prompt::dump_prompts(&dir, &s.target, &all).map_err(err)?;
        write_atomic(&dir.join("skipped.tsv"), skipped.as_bytes()).map_err(err)?;
        Ok(format!("{} prompts", all.len()))
    }

    fn pairs(&self) -> StageResult {
        let s = &self.settings;
        let prompts = prompt::load_prompts(&self.out("prompts"), &s.target).map_err(err)?;
        let dir = self.fresh_dir("pairs")?;
        let model = Backend::from_descriptor(&s.pair_backend).map_err(err)?;
        let mut settings = PairSettings::with_limit(s.per_api_limit);
        settings.temperature = s.temperature;
        let mut by_api: Vec<(&str, Vec<prompt::Prompt>)> = Vec::new();
        for p in &prompts {
            match by_api.iter_mut().find(|(a, _)| *a == p.api) {
                Some((_, v)) => v.push(p.clone()),
                None => by_api.push((&p.api, vec![p.clone()])),
            }
        }
        let (source, target) = (s.primary_source(), s.target_profile());
        let mut pairs = Vec::new();
        let mut failures = String::from("prompt\tfailure\n");
        let mut partial = 0;
        for (_, ps) in &by_api {
            let g = pairs::generate_pairs(ps, &model, &settings, source, target);
            partial += usize::from(g.is_partial(s.per_api_limit));
            for (id, f) in &g.failures {
                failures.push_str(&format!("{id}\t{f:?}\n"));
            }
            pairs.extend(g.pairs);
        }
        pairs::store_pairs(&dir, &s.target, &pairs).map_err(err)?;
        write_atomic(&dir.join("failures.tsv"), failures.as_bytes()).map_err(err)?;
        Ok(format!("{} pairs over {} APIs ({partial} short of the limit)", pairs.len(), by_api.len()))
    }

    fn mutate(&self) -> StageResult {
        let s = &self.settings;
        let pairs = pairs::load_pairs(&self.out("pairs"), &s.target).map_err(err)?;
        let dir = self.fresh_dir("mutations")?;
        let variants: Vec<_> = pairs
            .iter()
            .enumerate()
            .flat_map(|(i, p)| pairs::mutate_pair(p, s.mutations, pairs::variant_seed(s.mutation_seed, i)))
            .collect();
        pairs::store_mutations(&dir, &s.target, &variants).map_err(err)?;
        Ok(format!("{} variants from {} pairs", variants.len(), pairs.len()))
    }

    fn dataset(&self) -> StageResult {
        let s = &self.settings;
        let pairs = pairs::load_pairs(&self.out("pairs"), &s.target).map_err(err)?;
        let variants = pairs::load_mutations(&self.out("mutations"), &s.target).map_err(err)?;
        let prompts = prompt::load_prompts(&self.out("prompts"), &s.target).map_err(err)?;
        let dir = self.fresh_dir("dataset")?;
        let (gen, skipped) = dataset::build_generation_dataset(&pairs, &variants, &prompts, &s.dataset);
        let conv = dataset::build_conversion_dataset(&pairs, &variants, self.target_display(), &s.dataset);
        dataset::write_dataset(&dir.join("generation.ndrec"), &gen).map_err(err)?;
        dataset::write_dataset(&dir.join("conversion.ndrec"), &conv).map_err(err)?;
        Ok(format!("{} generation records ({skipped} skipped), {} conversion records", gen.len(), conv.len()))
    }

    fn finetune_config(&self) -> StageResult {
        let dir = self.fresh_dir("finetune")?;
        let data = self.out("dataset");
        let mut cfg = self.settings.finetune.clone();
        let (g, c) = (data.join("generation.ndrec"), data.join("conversion.ndrec"));
        cfg.dataset_paths = match cfg.dataset_mix {
            DatasetMix::Generation => vec![g],
            DatasetMix::Conversion => vec![c],
            DatasetMix::Both => vec![g, c],
        };
        dataset::emit_finetune_config(&dir.join("config.txt"), &cfg).map_err(err)?;
        Ok(format!("{} (r={}, {} steps)", cfg.base_model_id, cfg.lora_rank, cfg.max_steps))
    }

    fn load_corpus(&self) -> Result<Vec<corpus::BugCode>, String> {
        read_ndrec(&self.out("corpus").join("bugs.ndrec")).map_err(err)
    }

    fn convert(&self) -> StageResult {
        let s = &self.settings;
        let codes = self.load_corpus()?;
        let apis = self.load_catalog()?;
        let dir = self.fresh_dir("seeds/pot")?;
        let model = Backend::from_descriptor(&s.seed_backend).map_err(err)?;
        let mut all = Vec::new();
        let mut failures: BTreeMap<String, usize> = BTreeMap::new();
        for src in &s.sources {
            let mine: Vec<_> = codes.iter().filter(|c| c.source_library == *src).cloned().collect();
            let mut ctx = SeedContext::new(s.profile(src), s.target_profile(), &apis);
            ctx.temperature = s.temperature;
            let batch = seeds::convert_corpus(&mine, &model, &ctx);
            for (k, v) in batch.failures {
                *failures.entry(k).or_default() += v;
            }
            all.extend(batch.seeds);
        }
        seeds::store_seeds(&dir, &s.target, &all).map_err(err)?;
        Ok(format!("{} of {} bug codes converted; failures {failures:?}", all.len(), codes.len()))
    }

    fn generate(&self) -> StageResult {
        let s = &self.settings;
        let apis = self.load_catalog()?;
        let dir = self.fresh_dir("seeds/gen")?;
        let model = Backend::from_descriptor(&s.seed_backend).map_err(err)?;
        let mut ctx = SeedContext::new(s.primary_source(), s.target_profile(), &apis);
        ctx.temperature = s.temperature;
        let batch = seeds::generate_random(&apis, s.generate_total, &model, &ctx, s.generate_paired);
        seeds::store_seeds(&dir, &s.target, &batch.seeds).map_err(err)?;
        Ok(format!(
            "{} of {} requested snippets in {} attempts{}",
            batch.seeds.len(),
            s.generate_total,
            batch.attempts,
            if batch.partial { " (budget exhausted)" } else { "" }
        ))
    }

    /// Pot and gen seeds after cross-deduplication (pot wins ties), each
    /// with the store root it was loaded from.
    fn kept_seeds(&self) -> Result<(Vec<(SeedCode, PathBuf)>, Vec<(String, String)>), String> {
        let t = &self.settings.target;
        let mut roots = HashMap::new();
        let mut all = Vec::new();
        for kind in ["pot", "gen"] {
            let root = self.out(&format!("seeds/{kind}"));
            for seed in seeds::load_seeds(&root, t).map_err(err)? {
                roots.insert(seed.id.clone(), root.clone());
                all.push(seed);
            }
        }
        let (kept, removed) = seeds::dedupe_seeds(all);
        let kept = kept
            .into_iter()
            .map(|s| {
                let r = roots[&s.id].clone();
                (s, r)
            })
            .collect();
        Ok((kept, removed))
    }

    fn run(&self, fingerprint: &str) -> StageResult {
        let s = &self.settings;
        let dir = self.out("runs");
        // an interrupted run with unchanged inputs resumes from its ledger
        let marker = dir.join("inputs");
        if fs::read_to_string(&marker).ok().as_deref() != Some(fingerprint) {
            self.fresh_dir("runs")?;
            write_atomic(&marker, fingerprint.as_bytes()).map_err(err)?;
        }
        let (kept, removed) = self.kept_seeds()?;
        let mut dedup = String::from("removed\tkept\n");
        for (r, k) in &removed {
            dedup.push_str(&format!("{r}\t{k}\n"));
        }
        write_atomic(&dir.join("dedup.tsv"), dedup.as_bytes()).map_err(err)?;
        let mut jobs = Vec::new();
        for (seed, root) in &kept {
            for device in [Device::Cpu, Device::Gpu] {
                jobs.push(Job {
                    key: JobKey {
                        seed_id: seed.id.clone(),
                        role: Role::Target,
                        device,
                    },
                    seed_path: seeds::seed_path(root, seed),
                    runner: s.target_runner.clone(),
                });
            }
            if let (Some(path), Some(runner)) = (seeds::paired_source_path(root, seed), &s.source_runner) {
                jobs.push(Job {
                    key: JobKey {
                        seed_id: seed.id.clone(),
                        role: Role::Source,
                        device: Device::Cpu,
                    },
                    seed_path: path,
                    runner: runner.clone(),
                });
            }
        }
        let cc = CampaignConfig {
            parallelism: s.parallelism,
            timeout: s.timeout,
            gpu_available: s.gpu_available,
            work_dir: dir.join("work"),
        };
        let stop = self.stop.as_deref();
        let rep = harness::run_campaign(&jobs, &cc, &dir.join("outcomes.ndrec"), stop).map_err(err)?;
        if rep.interrupted {
            return Err(format!(
                "interrupted after {} of {} jobs; rerun to resume",
                rep.executed + rep.skipped_existing,
                jobs.len()
            ));
        }
        let crashes = rep.outcomes.iter().filter(|o| o.status.is_crash()).count();
        Ok(format!(
            "{} jobs for {} seeds ({} resumed), {crashes} crashes, peak concurrency {}",
            jobs.len(),
            kept.len(),
            rep.skipped_existing,
            rep.peak_concurrency
        ))
    }

    fn outcomes(&self) -> Result<Vec<ExecutionOutcome>, String> {
        harness::read_ledger(&self.out("runs").join("outcomes.ndrec")).map_err(err)
    }

    fn oracle(&self) -> StageResult {
        let s = &self.settings;
        let outcomes = self.outcomes()?;
        let (kept, _) = self.kept_seeds()?;
        let seeds: Vec<SeedCode> = kept.into_iter().map(|(s, _)| s).collect();
        let odir = self.fresh_dir("oracle")?;
        let bdir = self.fresh_dir("bugs")?;
        let judgements = oracle::judge_all(&outcomes, &s.oracle);
        write_ndrec(&odir.join("judgements.ndrec"), &judgements).map_err(err)?;
        let overrides = match &s.overrides {
            Some(p) => oracle::read_overrides(p).map_err(err)?,
            None => Vec::new(),
        };
        let records = oracle::build_bug_records(s.target.as_str(), &judgements, &seeds, &overrides).map_err(err)?;
        let found = records.len();
        let bugs = oracle::dedup_bugs(records);
        oracle::write_bug_ledger(&bdir, s.target.as_str(), &bugs).map_err(err)?;

        let by_id: HashMap<&str, &SeedCode> = seeds.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut patterns = Vec::new();
        let mut rejected = String::from("bug\treason\n");
        for b in &bugs {
            let Some(seed) = by_id.get(b.seed_id.as_str()) else { continue };
            match oracle::extract_bug_pattern(b, seed) {
                Ok(p) => patterns.push(p),
                Err(e) => rejected.push_str(&format!("{}\t{e}\n", b.id)),
            }
        }
        oracle::write_patterns(&bdir.join("patterns.ndrec"), &patterns).map_err(err)?;
        write_atomic(&bdir.join("unextractable.tsv"), rejected.as_bytes()).map_err(err)?;
        Ok(format!(
            "{} seeds judged, {found} findings, {} unique bugs, {} input patterns",
            judgements.len(),
            bugs.len(),
            patterns.len()
        ))
    }

    fn backtest(&self) -> StageResult {
        let s = &self.settings;
        let patterns = oracle::read_patterns(&self.out("bugs").join("patterns.ndrec")).map_err(err)?;
        let pairs = pairs::load_pairs(&self.out("pairs"), &s.target).unwrap_or_default();
        let dir = self.fresh_dir("backtest")?;
        let source = s.primary_source();
        let map = SourceApiMap::infer(&pairs, source, &s.source_map);
        let spec = BacktestSpec {
            source,
            array_ctor: s.array_ctor.clone(),
            map: &map,
        };
        let Some(runner) = &s.source_runner else {
            let (probes, _) = oracle::plan_probes(&patterns, &spec);
            write_ndrec(&dir.join("probes.ndrec"), &probes).map_err(err)?;
            return Ok(format!("{} probes planned; no source runner configured", probes.len()));
        };
        let cc = CampaignConfig {
            parallelism: s.parallelism,
            timeout: s.timeout,
            gpu_available: s.gpu_available,
            work_dir: dir.join("work"),
        };
        let rep = oracle::backtest_sources(&patterns, &spec, runner, &cc, &s.oracle, &dir).map_err(err)?;
        write_ndrec(&dir.join("probes.ndrec"), &rep.probes).map_err(err)?;
        write_ndrec(&dir.join("verdicts.ndrec"), &rep.verdicts).map_err(err)?;
        let mut skipped = String::from("api\treason\n");
        for (api, why) in &rep.skipped {
            skipped.push_str(&format!("{api}\t{why}\n"));
        }
        write_atomic(&dir.join("skipped.tsv"), skipped.as_bytes()).map_err(err)?;
        let flagged = rep.verdicts.iter().filter(|v| v.is_bug()).count();
        Ok(format!(
            "{} probes, {flagged} flagged on {}, {} patterns without a counterpart",
            rep.probes.len(),
            source.display_name,
            rep.skipped.len()
        ))
    }

    /// Metrics for the target library from the stage outputs on disk.
    pub fn campaign_metrics(&self) -> Result<CampaignMetrics, String> {
        let s = &self.settings;
        let codes = self.load_corpus()?;
        let (_, removed) = self.kept_seeds()?;
        // a seed dropped as a duplicate shares the outcomes of the one kept
        let runs_as: HashMap<&str, &str> = removed.iter().map(|(r, k)| (r.as_str(), k.as_str())).collect();
        let run_id = |id: &'_ str| -> String { runs_as.get(id).copied().unwrap_or(id).to_string() };
        let mut all = Vec::new();
        for kind in ["pot", "gen"] {
            all.extend(seeds::load_seeds(&self.out(&format!("seeds/{kind}")), &s.target).map_err(err)?);
        }
        let outcomes = self.outcomes()?;
        let judgements: Vec<SeedJudgement> = read_ndrec(&self.out("oracle").join("judgements.ndrec")).map_err(err)?;
        let mut m = CampaignMetrics {
            library: self.target_display().to_string(),
            n_all: s.generate_total as u64,
            tar_api: self.load_catalog()?.into_iter().map(|a| a.name).collect(),
            ..Default::default()
        };
        let target_runs = |id: &str| -> Vec<&ExecutionOutcome> {
            outcomes.iter().filter(|o| o.seed_id == id && o.role == Role::Target).collect()
        };
        for code in &codes {
            let seed = all.iter().find(|s| s.kind == SeedKind::Pot && s.origin == code.id);
            let result = match seed {
                None => Reproduction::Failure,
                Some(seed) => {
                    let id = run_id(&seed.id);
                    let sig = BehaviorSignature::from_issue(&code.issue_title, &code.text);
                    let backends = judgements.iter().find(|j| j.seed_id == id).and_then(|j| j.backends.as_ref());
                    metrics::is_successful_reproduction(sig.as_ref(), &target_runs(&id), backends)
                }
            };
            m.add_conversion(seed, result);
        }
        for seed in all.iter().filter(|s| s.kind == SeedKind::Gen) {
            let id = run_id(&seed.id);
            let cpu = outcomes
                .iter()
                .find(|o| o.seed_id == id && o.role == Role::Target && o.device == Device::Cpu);
            m.add_generated(seed, cpu);
        }
        m.check()?;
        Ok(m)
    }

    fn report(&self) -> StageResult {
        let s = &self.settings;
        let m = self.campaign_metrics()?;
        let bugs = oracle::read_bug_ledger(&self.out("bugs"), s.target.as_str()).map_err(err)?;
        let dir = self.fresh_dir("report")?;
        let files = metrics::emit_report(
            &dir,
            std::slice::from_ref(&m),
            &[(self.target_display().to_string(), bugs.clone())],
            s.decimals,
            s.rounding,
        )
        .map_err(err)?;
        let verdicts: Vec<oracle::Verdict> = read_ndrec(&self.out("backtest").join("verdicts.ndrec")).unwrap_or_default();
        let flagged: Vec<&oracle::Verdict> = verdicts.iter().filter(|v| v.is_bug()).collect();
        let mut md = fs::read_to_string(&files.tables).map_err(err)?;
        md.push_str(&format!(
            "\n### Source-library probes\n\n{} probes run on {}, {} flagged\n",
            verdicts.len(),
            s.primary_source().display_name,
            flagged.len()
        ));
        for v in &flagged {
            md.push_str(&format!("- `{}`: {}\n", v.seed_id, v.details));
        }
        write_atomic(&files.tables, md.as_bytes()).map_err(err)?;
        Ok(format!(
            "{} bugs; success {}, validity {}, coverage {}",
            bugs.len(),
            m.success_rate().render(s.decimals, s.rounding),
            m.validity_rate().render(s.decimals, s.rounding),
            m.api_coverage().render(s.decimals, s.rounding)
        ))
    }
}

fn rulebook(d: &crate::backend::BackendDescriptor) -> Option<PathBuf> {
    match &d.locator {
        crate::backend::BackendLocator::MockRulebook { path } => Some(path.clone()),
        crate::backend::BackendLocator::HttpEndpoint { .. } => None,
    }
}

/// Datasets on disk, for inspection and tests.
pub fn read_datasets(out: &Path) -> Result<(Vec<GenerationRecord>, Vec<ConversionRecord>), String> {
    let dir = out.join("dataset");
    Ok((
        dataset::read_dataset(&dir.join("generation.ndrec")).map_err(err)?,
        dataset::read_dataset(&dir.join("conversion.ndrec")).map_err(err)?,
    ))
}

/// File-system-safe name used for per-library outputs.
pub fn library_dir(id: &str) -> String {
    sanitize_component(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_topologically_ordered() {
        for (i, st) in Stage::ALL.iter().enumerate() {
            for d in st.deps() {
                let j = Stage::ALL.iter().position(|x| x == d).unwrap();
                assert!(j < i, "{st} depends on later stage {d}");
            }
            assert_eq!(Stage::parse(st.name()), Some(*st));
        }
    }

    #[test]
    fn exit_codes() {
        let e = PipelineError::MissingPrerequisite {
            stage: Stage::Pairs,
            needs: Stage::Prompts,
        };
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("`prompts`"));
        assert_eq!(
            PipelineError::Failed {
                stage: Stage::Run,
                reason: String::new()
            }
            .exit_code(),
            2
        );
    }
}
