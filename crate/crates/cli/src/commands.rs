//! Subcommand implementations. Each returns the text printed on stdout and
//! writes its tables into the run's output bundle.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use augdem_core::aggregate::rank_defined;
use augdem_core::augment::{
    evaluate_augmentation, AlwaysFirstFactory, AugmentationPlan, BackendFactory,
    EvaluationSettings, FailurePolicy, NearestNeighborFactory, OracleFactory, RemoteFactory,
};
use augdem_core::data::{
    generate_synthetic, load_dataset_with, load_proposals, load_proposals_with, write_choices,
    write_demographics, write_proposals, DatasetManifest,
};
use augdem_core::predictor::{
    emit_finetune_job_spec, export_finetune_dataset, predict_many, PredictionQuery,
    PredictorBackend, PromptTemplate,
};
use augdem_core::rng::{derive_path, derive_seed, label_stream};
use augdem_core::sampling::{balance_by_attribute, round_half_up, split_train_test};
use augdem_core::stats::{
    adequacy_curve, fit_rational, subgroup_accuracy_analysis, AccuracyReport, ScoredPrediction,
};
use augdem_core::{tally, win_rates, PairwiseChoice, PreferenceDataset, ProposalId};

use crate::config::{parse_attribute, BackendKind, LoadedConfig};
use crate::error::CliError;
use crate::plot::{line_chart, Series};
use crate::report::{num, Provenance, ReportBundle, Table};

/// Status of a proposal that never appeared in a choice.
pub const UNDEFINED_STATUS: &str = "no appearances";

pub struct Run {
    pub cfg: LoadedConfig,
}

/// Predictions for every choice of a test set.
struct Predictions {
    scored: Vec<ScoredPrediction>,
    consistent: usize,
    skipped: usize,
}

impl Run {
    pub fn new(cfg: LoadedConfig) -> Self {
        Self { cfg }
    }

    /// Seed of one command, derived from the master seed and the command name.
    pub fn command_seed(&self, command: &str) -> u64 {
        derive_seed(self.cfg.seed, label_stream(command))
    }

    fn provenance(
        &self,
        command: &str,
        backend: Option<String>,
        template: Option<String>,
    ) -> Provenance {
        Provenance {
            config_hash: self.cfg.hash.clone(),
            seed: self.cfg.seed,
            command: command.to_owned(),
            backend,
            template_hash: template,
        }
    }

    fn bundle(&self) -> Result<ReportBundle, CliError> {
        ReportBundle::open(&self.cfg.out, &self.cfg.hash, self.cfg.seed)
    }

    fn open(&self, p: &Path) -> Result<File, CliError> {
        let full = self.cfg.resolve(p);
        File::open(&full)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", full.display())))
    }

    /// Loads or generates the configured dataset.
    pub fn dataset(&self) -> Result<(PreferenceDataset, DatasetManifest), CliError> {
        if let Some(d) = &self.cfg.config.data {
            let proposals = load_proposals_with(self.open(&d.proposals)?, &d.columns)?;
            let (ds, manifest) = load_dataset_with(
                proposals,
                self.open(&d.choices)?,
                self.open(&d.demographics)?,
                &d.columns,
            )?;
            return Ok((ds, manifest));
        }
        let s = self
            .cfg
            .config
            .synthetic
            .as_ref()
            .ok_or_else(|| CliError::Config("no data source".into()))?;
        let mut ds =
            generate_synthetic(&s.spec(derive_seed(self.cfg.seed, label_stream("synthetic"))))?;
        if let Some(path) = &s.proposal_texts {
            let texts = load_proposals(self.open(path)?)?;
            if texts.len() != ds.proposals().len() {
                return Err(CliError::Config(format!(
                    "{} lists {} proposals but the population has {}",
                    path.display(),
                    texts.len(),
                    ds.proposals().len()
                )));
            }
            let remap: HashMap<ProposalId, ProposalId> = ds
                .proposals()
                .iter()
                .zip(&texts)
                .map(|(g, t)| (g.id, t.id))
                .collect();
            let choices = ds
                .choices()
                .iter()
                .map(|c| PairwiseChoice {
                    first: remap[&c.first],
                    second: remap[&c.second],
                    ..c.clone()
                })
                .collect();
            ds = PreferenceDataset::new(texts, ds.participants().to_vec(), choices)?;
        }
        if let Some(max) = s.max_choices {
            if max < ds.choices().len() {
                let kept = ds.choices()[..max].to_vec();
                ds = PreferenceDataset::new(
                    ds.proposals().to_vec(),
                    ds.participants().to_vec(),
                    kept,
                )?;
            }
        }
        let manifest = DatasetManifest::from_dataset(&ds);
        Ok((ds, manifest))
    }

    fn template(&self) -> Result<PromptTemplate, CliError> {
        let language = self.cfg.language();
        match &self.cfg.config.prompt.template {
            None => Ok(PromptTemplate::default_for(language)),
            Some(p) => {
                let full = self.cfg.resolve(p);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", full.display()))
                })?;
                Ok(PromptTemplate::new(language, text)?)
            }
        }
    }

    fn factory(&self) -> Result<(Box<dyn BackendFactory>, Option<String>), CliError> {
        let b = &self.cfg.config.backend;
        Ok(match b.kind {
            BackendKind::NearestNeighbor => (Box::new(NearestNeighborFactory { k: b.k }), None),
            BackendKind::Oracle => (Box::new(OracleFactory), None),
            BackendKind::AlwaysFirst => (Box::new(AlwaysFirstFactory), None),
            BackendKind::Remote => {
                let template = self.template()?;
                let hash = template.content_hash();
                let config = b
                    .remote
                    .clone()
                    .ok_or_else(|| CliError::Config("missing [backend.remote]".into()))?;
                (Box::new(RemoteFactory { config, template }), Some(hash))
            }
        })
    }

    fn predict(
        &self,
        backend: &dyn PredictorBackend,
        test: &PreferenceDataset,
        seed: u64,
    ) -> Result<Predictions, CliError> {
        let mut queries = Vec::with_capacity(test.choices().len());
        for c in test.choices() {
            let person = test.participant(&c.participant).expect("validated dataset");
            queries.push(PredictionQuery::new(
                Some(person.id.clone()),
                person.demographics.clone(),
                test.proposal(c.first).expect("validated dataset").clone(),
                test.proposal(c.second).expect("validated dataset").clone(),
            )?);
        }
        let results = predict_many(backend, &queries, self.cfg.config.backend.order, seed);
        let mut out = Predictions {
            scored: Vec::new(),
            consistent: 0,
            skipped: 0,
        };
        for ((c, q), r) in test.choices().iter().zip(&queries).zip(results) {
            match r {
                Ok(p) => {
                    out.consistent += usize::from(p.consistent_across_orders);
                    out.scored.push(ScoredPrediction {
                        participant: c.participant.clone(),
                        predicted: p.proposal(q),
                        truth: c.winner(),
                    });
                }
                Err(e) => match self.cfg.config.backend.failure_policy {
                    FailurePolicy::FailFast => return Err(e.into()),
                    FailurePolicy::SkipAndLog => {
                        log::warn!("skipping query for {}: {e}", c.participant);
                        out.skipped += 1;
                    }
                },
            }
        }
        Ok(out)
    }

    pub fn ingest(&self) -> Result<String, CliError> {
        let (_, manifest) = self.dataset()?;
        let p = self.provenance("ingest", None, None);
        let mut t = Table::new(&["key", "value"]);
        t.push(vec![
            "participants".into(),
            manifest.participant_count.to_string(),
        ]);
        t.push(vec![
            "proposals".into(),
            manifest.proposal_count.to_string(),
        ]);
        t.push(vec!["choices".into(), manifest.choice_count.to_string()]);
        for (k, v) in &manifest.category_counts {
            t.push(vec![k.clone(), v.to_string()]);
        }
        let mut bundle = self.bundle()?;
        bundle.write_table("manifest.csv", &t, &p)?;
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(manifest.to_string())
    }

    pub fn winrates(&self) -> Result<String, CliError> {
        let (ds, _) = self.dataset()?;
        let table = win_rates(&tally(&ds));
        let text = |id: ProposalId| ds.proposal(id).map_or("", |p| p.text.as_str()).to_owned();
        let mut t = Table::new(&[
            "rank",
            "proposal_id",
            "wins",
            "appearances",
            "win_rate",
            "status",
            "text",
        ]);
        let ranked = rank_defined(&table);
        for (i, &id) in ranked.iter().enumerate() {
            let e = table.get(id).expect("ranked ids come from the table");
            t.push(vec![
                (i + 1).to_string(),
                id.0.to_string(),
                e.wins.to_string(),
                e.appearances.to_string(),
                num(e.win_rate().unwrap_or(f64::NAN)),
                "ok".into(),
                text(id),
            ]);
        }
        let undefined: Vec<ProposalId> = table.undefined().collect();
        for &id in &undefined {
            t.push(vec![
                String::new(),
                id.0.to_string(),
                "0".into(),
                "0".into(),
                String::new(),
                UNDEFINED_STATUS.into(),
                text(id),
            ]);
        }
        let mut bundle = self.bundle()?;
        bundle.write_table("winrates.csv", &t, &self.provenance("winrates", None, None))?;
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(format!(
            "{} proposals ranked, {} without appearances",
            ranked.len(),
            undefined.len()
        ))
    }

    pub fn adequacy(&self) -> Result<String, CliError> {
        let (ds, _) = self.dataset()?;
        let e = &self.cfg.config.experiment;
        let n = ds.participants().len();
        let mut sizes: Vec<usize> = e
            .adequacy_fractions
            .iter()
            .map(|f| round_half_up(f * n as f64).clamp(1, (n / 2).max(1)))
            .collect();
        sizes.dedup();
        let seed = self.command_seed("adequacy");
        let points = adequacy_curve(&ds, &sizes, e.adequacy_repetitions, seed)?;
        let fit = fit_rational(&points)?;
        let p = self.provenance("adequacy", None, None);
        let mut curve = Table::new(&[
            "sample_size",
            "fraction",
            "mean_r2",
            "std_dev",
            "repetitions",
            "skipped",
            "fitted_r2",
        ]);
        for pt in &points {
            curve.push(vec![
                pt.sample_size.to_string(),
                num(pt.fraction),
                num(pt.r_squared),
                num(pt.std_dev),
                pt.repetitions.to_string(),
                pt.skipped.to_string(),
                num(fit.predict(pt.fraction)),
            ]);
        }
        let mut params = Table::new(&["model", "a", "b", "residual_sum_of_squares"]);
        params.push(vec![
            "a*x/(b+x)".into(),
            num(fit.a),
            num(fit.b),
            num(fit.residual_sum_of_squares),
        ]);
        let mut bundle = self.bundle()?;
        bundle.write_table("adequacy.csv", &curve, &p)?;
        bundle.write_table("adequacy_fit.csv", &params, &p)?;
        if e.plots {
            let svg = line_chart(
                "Win-rate agreement of disjoint samples",
                "sample fraction",
                "mean R²",
                &[
                    Series {
                        name: "observed".into(),
                        points: points.iter().map(|q| (q.fraction, q.r_squared)).collect(),
                    },
                    Series {
                        name: "a·x/(b+x)".into(),
                        points: points
                            .iter()
                            .map(|q| (q.fraction, fit.predict(q.fraction)))
                            .collect(),
                    },
                ],
            );
            bundle.write_svg("adequacy.svg", &svg, &p)?;
        }
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(format!(
            "{} sample sizes, fit a = {}, b = {}",
            points.len(),
            num(fit.a),
            num(fit.b)
        ))
    }

    pub fn accuracy(&self) -> Result<String, CliError> {
        let level = self.cfg.ci_level()?;
        let (ds, _) = self.dataset()?;
        let (factory, template) = self.factory()?;
        let e = &self.cfg.config.experiment;
        let seed = self.command_seed("accuracy");
        let mut t = Table::new(&[
            "backend",
            "test_fraction",
            "train_participants",
            "test_participants",
            "n_predictions",
            "skipped",
            "accuracy",
            "ci_low",
            "ci_high",
            "ci_half_width",
            "ci_level",
            "consistency_rate",
        ]);
        let mut lines = Vec::new();
        for (i, &fraction) in e.test_fractions.iter().enumerate() {
            let s = derive_path(seed, &[i as u64]);
            let (train, test) = split_train_test(&ds, 1.0 - fraction, derive_seed(s, 0))?;
            let backend = factory.build(&train, &ds)?;
            let preds = self.predict(backend.as_ref(), &test, derive_seed(s, 1))?;
            let report = AccuracyReport::new(
                format!("test {fraction}"),
                &preds.scored,
                level,
                e.bootstrap_iterations,
                derive_seed(s, 2),
            )?;
            let consistency = preds.consistent as f64 / preds.scored.len() as f64;
            t.push(vec![
                factory.name(),
                num(fraction),
                train.participants().len().to_string(),
                test.participants().len().to_string(),
                report.n_predictions.to_string(),
                preds.skipped.to_string(),
                num(report.accuracy),
                num(report.interval.low),
                num(report.interval.high),
                num(report.interval.half_width()),
                num(level),
                num(consistency),
            ]);
            lines.push(format!(
                "test {:.0}%: accuracy {:.2}% ± {:.4} ({:.0}% CI), consistent {:.2}%",
                fraction * 100.0,
                report.accuracy * 100.0,
                report.interval.half_width(),
                level * 100.0,
                consistency * 100.0
            ));
        }
        let mut bundle = self.bundle()?;
        bundle.write_table(
            "accuracy.csv",
            &t,
            &self.provenance("accuracy", Some(factory.name()), template),
        )?;
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(lines.join("\n"))
    }

    pub fn bias(&self) -> Result<String, CliError> {
        let level = self.cfg.ci_level()?;
        let attribute = self.cfg.attribute()?;
        let (ds, _) = self.dataset()?;
        let (factory, template) = self.factory()?;
        let e = &self.cfg.config.experiment;
        let seed = self.command_seed("bias");
        let (train, mut test) = split_train_test(&ds, 1.0 - e.test_fraction, derive_seed(seed, 0))?;
        if e.balance {
            test = balance_by_attribute(&test, attribute, derive_seed(seed, 1))?;
        }
        let backend = factory.build(&train, &ds)?;
        let preds = self.predict(backend.as_ref(), &test, derive_seed(seed, 2))?;
        let analysis = subgroup_accuracy_analysis(
            &test,
            &preds.scored,
            attribute,
            level,
            e.bootstrap_iterations,
            derive_seed(seed, 3),
        )?;
        let name = factory.name();
        let mut groups = Table::new(&[
            "backend",
            "attribute",
            "subgroup",
            "n_participants",
            "n_predictions",
            "accuracy",
            "ci_low",
            "ci_high",
            "ci_level",
        ]);
        for r in &analysis.reports {
            groups.push(vec![
                name.clone(),
                attribute.name().into(),
                r.subgroup.clone(),
                r.n_participants.to_string(),
                r.n_predictions.to_string(),
                num(r.accuracy),
                num(r.interval.low),
                num(r.interval.high),
                num(level),
            ]);
        }
        let mut tests = Table::new(&[
            "backend",
            "comparison",
            "t_statistic",
            "p_value",
            "significance",
            "df",
        ]);
        let mut lines = Vec::new();
        for c in &analysis.comparisons {
            tests.push(vec![
                name.clone(),
                c.label(),
                format!("{:.4}", c.t_statistic),
                format!("{:.4}", c.p_value),
                c.stars().into(),
                format!("{:.2}", c.degrees_of_freedom),
            ]);
            lines.push(format!(
                "{}: t = {:.4}, p = {:.4}{}",
                c.label(),
                c.t_statistic,
                c.p_value,
                c.stars()
            ));
        }
        let p = self.provenance("bias", Some(name), template);
        let mut bundle = self.bundle()?;
        let stem = format!("bias_{}", attribute.name());
        bundle.write_table(&format!("{stem}_groups.csv"), &groups, &p)?;
        bundle.write_table(&format!("{stem}_tests.csv"), &tests, &p)?;
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(lines.join("\n"))
    }

    pub fn augment_eval(&self) -> Result<String, CliError> {
        let level = self.cfg.ci_level()?;
        let (ds, _) = self.dataset()?;
        let (factory, template) = self.factory()?;
        let e = &self.cfg.config.experiment;
        let seed = self.command_seed("augment-eval");
        let mut plan =
            AugmentationPlan::new(e.augmentation, e.extra_fraction, derive_seed(seed, 0))?;
        plan.stratify_by = e.stratify_by.as_deref().map(parse_attribute).transpose()?;
        let settings = EvaluationSettings {
            fractions: e.augment_fractions.clone(),
            repetitions: e.augment_repetitions,
            schedule: e.schedule,
            policy: self.cfg.config.backend.failure_policy,
            ci_level: level,
            bootstrap_iterations: e.bootstrap_iterations,
        };
        let eval = evaluate_augmentation(
            &ds,
            &plan,
            factory.as_ref(),
            &settings,
            derive_seed(seed, 1),
        )?;
        let mut curve = Table::new(&[
            "fraction",
            "repetition",
            "plain_r2",
            "augmented_r2",
            "synthetic_choice_count",
        ]);
        for r in &eval.records {
            curve.push(vec![
                num(r.fraction),
                r.repetition.to_string(),
                num(r.plain_r2),
                num(r.augmented_r2),
                r.synthetic_choice_count.to_string(),
            ]);
        }
        let mut summary = Table::new(&[
            "backend",
            "fraction",
            "repetitions",
            "plain_mean",
            "plain_ci_low",
            "plain_ci_high",
            "augmented_mean",
            "augmented_ci_low",
            "augmented_ci_high",
            "ci_level",
            "augmented_wins",
        ]);
        let mut lines = Vec::new();
        for s in &eval.summaries {
            summary.push(vec![
                eval.backend.clone(),
                num(s.fraction),
                s.repetitions.to_string(),
                num(s.plain.point_estimate),
                num(s.plain.low),
                num(s.plain.high),
                num(s.augmented.point_estimate),
                num(s.augmented.low),
                num(s.augmented.high),
                num(level),
                s.augmented_wins.to_string(),
            ]);
            lines.push(format!(
                "fraction {:.0}%: plain R² {:.4}, augmented R² {:.4}, augmented better in {}/{}",
                s.fraction * 100.0,
                s.plain.point_estimate,
                s.augmented.point_estimate,
                s.augmented_wins,
                s.repetitions
            ));
        }
        let p = self.provenance("augment-eval", Some(eval.backend.clone()), template);
        let mut bundle = self.bundle()?;
        bundle.write_table("augment_curve.csv", &curve, &p)?;
        bundle.write_table("augment_summary.csv", &summary, &p)?;
        if e.plots {
            let svg = line_chart(
                &format!("Sample vs. augmented sample ({})", e.augmentation),
                "sample fraction",
                "mean R²",
                &[
                    Series {
                        name: "sample".into(),
                        points: eval
                            .summaries
                            .iter()
                            .map(|s| (s.fraction, s.plain.point_estimate))
                            .collect(),
                    },
                    Series {
                        name: "augmented".into(),
                        points: eval
                            .summaries
                            .iter()
                            .map(|s| (s.fraction, s.augmented.point_estimate))
                            .collect(),
                    },
                ],
            );
            bundle.write_svg("augment.svg", &svg, &p)?;
        }
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(lines.join("\n"))
    }

    pub fn export_finetune(&self) -> Result<String, CliError> {
        let (ds, _) = self.dataset()?;
        let template = self.template()?;
        let f = &self.cfg.config.finetune;
        let seed = self.command_seed("export-finetune");
        let (train, test) = split_train_test(
            &ds,
            1.0 - self.cfg.config.experiment.test_fraction,
            derive_seed(seed, 0),
        )?;
        let records = export_finetune_dataset(&train, &template)?;
        let files = emit_finetune_job_spec(&f.backend, &records, f.system_prompt.as_deref())?;
        let p = self.provenance(
            "export-finetune",
            Some(f.backend.clone()),
            Some(template.content_hash()),
        );
        let mut held_out = Table::new(&["participant_id"]);
        for person in test.participants() {
            held_out.push(vec![person.id.as_str().to_owned()]);
        }
        let mut bundle = self.bundle()?;
        bundle.write_raw("finetune_train.jsonl", &files.training, &p)?;
        bundle.write_text("finetune_index.csv", &files.index, &p)?;
        bundle.write_text("finetune_hyperparameters.toml", &files.hyperparameters, &p)?;
        bundle.write_table("finetune_test_participants.csv", &held_out, &p)?;
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(format!(
            "{} records from {} training choices for {}",
            records.len(),
            train.choices().len(),
            files.profile.name
        ))
    }

    pub fn synth(&self) -> Result<String, CliError> {
        if self.cfg.config.synthetic.is_none() {
            return Err(CliError::Config("synth needs a [synthetic] table".into()));
        }
        let (ds, manifest) = self.dataset()?;
        let p = self.provenance("synth", None, None);
        let mut proposals = Vec::new();
        write_proposals(ds.proposals(), &mut proposals)?;
        let mut choices = Vec::new();
        write_choices(ds.choices(), &mut choices)?;
        let mut demographics = Vec::new();
        write_demographics(ds.participants(), &mut demographics)?;
        let mut bundle = self.bundle()?;
        for (name, bytes) in [
            ("proposals.csv", proposals),
            ("choices.csv", choices),
            ("demographics.csv", demographics),
        ] {
            let text = String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))?;
            bundle.write_text(name, &text, &p)?;
        }
        self.echo_config(&mut bundle)?;
        bundle.finish()?;
        Ok(manifest.to_string())
    }

    /// Writes the resolved configuration next to the outputs.
    fn echo_config(&self, bundle: &mut ReportBundle) -> Result<(), CliError> {
        let mut echoed = self.cfg.config.clone();
        echoed.out = None;
        echoed.seed = Some(self.cfg.seed);
        let text = toml::to_string(&echoed).map_err(|e| CliError::Output(e.to_string()))?;
        bundle.write_text(
            "run_config.toml",
            &text,
            &self.provenance("config", None, None),
        )?;
        Ok(())
    }
}
