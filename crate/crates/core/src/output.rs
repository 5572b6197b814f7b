//! On-disk result bundle.
//!
//! Layout of a bundle directory:
//!
//! | file                 | contents                                            |
//! |----------------------|-----------------------------------------------------|
//! | `config.toml`        | the resolved configuration                          |
//! | `trace.csv`          | every chain state of every round                    |
//! | `sensors.csv`        | sensor pair, window and proposed next pair per round |
//! | `flux_variance.csv`  | ensemble flux variance per boundary node and round  |
//! | `shape_samples.csv`  | thinned post-burn-in shapes                         |
//! | `summary.json`       | per-round posterior summaries and run status        |
//!
//! Rows are appended and flushed as each round completes, so a failed run
//! still leaves the finished rounds behind. Wall-clock timings go to
//! `timing.json`, kept apart so the bundle itself is reproducible byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::assimilation::{ExperimentResult, RoundRecord, RoundSummary, SyntheticData};
use crate::config::ExperimentConfig;
use crate::geometry::{circle_from_unconstrained, star_radius, SourceKind};
use crate::heat::{FluxRing, PolarGrid};
use crate::sensors::SensorPair;
use crate::{Error, Result};

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(path: PathBuf, header: &str) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut csv = Self {
            path,
            out: BufWriter::new(file),
        };
        csv.line(header)?;
        Ok(csv)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct RoundEntry<'a> {
    round: usize,
    t_start: f64,
    t_end: f64,
    sensors: SensorPair,
    next_sensors: SensorPair,
    stop: bool,
    #[serde(flatten)]
    summary: &'a RoundSummary,
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    seed: u64,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    stopped_early: bool,
    itinerary: Vec<SensorPair>,
    rounds: &'a [RoundEntry<'a>],
}

/// Streams an experiment into a bundle directory.
pub struct BundleWriter {
    dir: PathBuf,
    name: String,
    seed: u64,
    kind: SourceKind,
    grid: PolarGrid,
    burn_in: f64,
    thin: usize,
    trace: Csv,
    sensors: Csv,
    variance: Csv,
    shapes: Csv,
    rounds: Vec<(usize, f64, f64, SensorPair, SensorPair, bool, RoundSummary)>,
}

impl BundleWriter {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let kind = config.source_kind()?;
        let grid = config.polar_grid()?;
        write_file(&dir.join("config.toml"), &config.to_toml_string())?;

        let p = kind.dim();
        let xi_cols: Vec<String> = (0..p).map(|i| format!("xi{i}")).collect();
        let trace = Csv::create(
            dir.join("trace.csv"),
            &format!("round,iter,{},potential,accepted", xi_cols.join(",")),
        )?;
        let sensors = Csv::create(
            dir.join("sensors.csv"),
            "round,t_start,t_end,sensor_a,sensor_b,angle_a,angle_b,next_a,next_b,stop",
        )?;
        let variance = Csv::create(dir.join("flux_variance.csv"), "round,node,angle,variance")?;
        let shape_header = match kind {
            SourceKind::Circle => "round,iter,center_x,center_y,radius".to_string(),
            SourceKind::Star { .. } => {
                let cols: Vec<String> = (0..grid.n_theta()).map(|k| format!("q{k}")).collect();
                format!("round,iter,{}", cols.join(","))
            }
        };
        let shapes = Csv::create(dir.join("shape_samples.csv"), &shape_header)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            name: config.name.clone(),
            seed: config.seed,
            kind,
            grid,
            burn_in: config.sampler.burn_in,
            thin: config.sampler.field_thin.max(1),
            trace,
            sensors,
            variance,
            shapes,
            rounds: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_round(&mut self, rec: &RoundRecord) -> Result<()> {
        let ens = &rec.ensemble;
        for (i, xi) in ens.samples.iter().enumerate() {
            let line = format!(
                "{},{},{},{},{}",
                rec.round,
                i,
                join(xi.iter().copied()),
                ens.potentials[i],
                u8::from(ens.accepted[i])
            );
            self.trace.line(&line)?;
        }

        let [a, b] = rec.sensors.angles(&self.grid);
        let line = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            rec.round,
            rec.t_start,
            rec.t_end,
            rec.sensors.0,
            rec.sensors.1,
            a,
            b,
            rec.next_sensors.0,
            rec.next_sensors.1,
            u8::from(rec.stop)
        );
        self.sensors.line(&line)?;

        if let Some(map) = &rec.variance_map {
            for (k, v) in map.variances().iter().enumerate() {
                let line = format!("{},{},{},{}", rec.round, k, self.grid.angle(k), v);
                self.variance.line(&line)?;
            }
        }

        let start = ens.burn_in_start(self.burn_in);
        for i in (start..ens.samples.len()).step_by(self.thin) {
            let xi = &ens.samples[i];
            let body = match self.kind {
                SourceKind::Circle => {
                    let c = circle_from_unconstrained(xi)?;
                    join([c.eta[0], c.eta[1], c.radius])
                }
                SourceKind::Star { .. } => {
                    join((0..self.grid.n_theta()).map(|k| star_radius(self.grid.angle(k), xi)))
                }
            };
            self.shapes.line(&format!("{},{},{}", rec.round, i, body))?;
        }

        for csv in [
            &mut self.trace,
            &mut self.sensors,
            &mut self.variance,
            &mut self.shapes,
        ] {
            csv.flush()?;
        }
        self.rounds.push((
            rec.round,
            rec.t_start,
            rec.t_end,
            rec.sensors,
            rec.next_sensors,
            rec.stop,
            rec.summary.clone(),
        ));
        self.write_summary("running", None, false)
    }

    fn write_summary(&self, status: &str, error: Option<String>, stopped_early: bool) -> Result<()> {
        let entries: Vec<RoundEntry<'_>> = self
            .rounds
            .iter()
            .map(
                |(round, t_start, t_end, sensors, next_sensors, stop, summary)| RoundEntry {
                    round: *round,
                    t_start: *t_start,
                    t_end: *t_end,
                    sensors: *sensors,
                    next_sensors: *next_sensors,
                    stop: *stop,
                    summary,
                },
            )
            .collect();
        let summary = Summary {
            name: &self.name,
            seed: self.seed,
            status,
            error,
            stopped_early,
            itinerary: self.rounds.iter().map(|r| r.3).collect(),
            rounds: &entries,
        };
        let text = serde_json::to_string_pretty(&summary).expect("summary always serializes");
        write_file(&self.dir.join("summary.json"), &(text + "\n"))
    }

    pub fn finish(self, result: &ExperimentResult) -> Result<()> {
        self.write_summary("ok", None, result.stopped_early)
    }

    /// Marks the bundle as failed, keeping rows of completed rounds.
    pub fn fail(self, error: &Error) -> Result<()> {
        self.write_summary("failed", Some(error.to_string()), false)
    }
}

/// Runs an experiment and streams it into `dir`.
pub fn run_to_bundle(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    let mut writer = BundleWriter::create(dir, config)?;
    let result = crate::assimilation::run_experiment_with(config, |rec| writer.write_round(rec));
    match result {
        Ok(r) => {
            writer.finish(&r)?;
            Ok(r)
        }
        Err(e) => {
            writer.fail(&e)?;
            Err(e)
        }
    }
}

#[derive(Serialize)]
pub struct Timing {
    pub seconds: f64,
    pub rounds: usize,
    pub parallel: bool,
}

pub fn write_timing(dir: &Path, timing: &Timing) -> Result<()> {
    let text = serde_json::to_string_pretty(timing).expect("timing always serializes");
    write_file(&dir.join("timing.json"), &(text + "\n"))
}

/// Writes `time,flux_0,...` rows, one per ring.
pub fn write_flux_series<W: Write>(rings: &[FluxRing], mut out: W) -> std::io::Result<()> {
    let n = rings.first().map_or(0, FluxRing::len);
    let cols: Vec<String> = (0..n).map(|k| format!("flux_{k}")).collect();
    writeln!(out, "time,{}", cols.join(","))?;
    for ring in rings {
        writeln!(out, "{},{}", ring.t(), join(ring.values().iter().copied()))?;
    }
    out.flush()
}

/// Exact boundary flux of the configured true source at each schedule time.
pub fn forward_series(config: &ExperimentConfig) -> Result<SyntheticData> {
    config.validate()?;
    let grid = config.polar_grid()?;
    let kind = config.source_kind()?;
    let truth = crate::assimilation::TruthSpec {
        kind,
        params: config.source.truth.clone(),
        b: config.solver.b,
        sigma: 0.0,
        seed: config.seed,
    };
    crate::assimilation::synthesize_observations(
        &truth,
        &config.schedule.times,
        &grid,
        config.solver.steps_per_window,
    )
}

pub fn write_forward(config: &ExperimentConfig, dir: &Path, dump_field: bool) -> Result<SyntheticData> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = forward_series(config)?;
    let rings: Vec<FluxRing> = (0..data.times().len())
        .map(|i| data.exact_ring(i).clone())
        .collect();
    let path = dir.join("flux.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_flux_series(&rings, BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
    if dump_field {
        let path = dir.join("field.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        data.final_field()
            .write_csv(BufWriter::new(file))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::sensors::StrategyKind;

    fn tiny() -> ExperimentConfig {
        let mut c = preset("circle-desk").unwrap();
        c.grid.n_r = 9;
        c.grid.n_theta = 12;
        c.schedule.initial_sensors = [7, 10];
        c.sampler.n_total = 200;
        c.sampler.k0 = 50;
        c.schedule.strategy = StrategyKind::PosteriorAngle;
        c
    }

    fn lines(path: &Path) -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect()
    }

    #[test]
    fn bundle_has_expected_rows() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny();
        let r = run_to_bundle(&c, dir.path()).unwrap();
        let n_rounds = r.rounds.len();
        assert_eq!(lines(&dir.path().join("trace.csv")).len(), 1 + n_rounds * 200);
        assert_eq!(lines(&dir.path().join("sensors.csv")).len(), 1 + n_rounds);
        assert_eq!(
            lines(&dir.path().join("flux_variance.csv")).len(),
            1 + n_rounds * 12
        );
        let shapes = lines(&dir.path().join("shape_samples.csv"));
        assert_eq!(shapes[0], "round,iter,center_x,center_y,radius");
        assert_eq!(shapes.len(), 1 + n_rounds * 16);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["status"], "ok");
        assert_eq!(summary["rounds"].as_array().unwrap().len(), n_rounds);
        let back = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn trace_floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_to_bundle(&tiny(), dir.path()).unwrap();
        let row = &lines(&dir.path().join("trace.csv"))[5];
        let cells: Vec<&str> = row.split(',').collect();
        let xi0: f64 = cells[2].parse().unwrap();
        assert_eq!(xi0.to_bits(), r.rounds[0].ensemble.samples[4][0].to_bits());
    }

    #[test]
    fn failure_keeps_finished_rounds() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny();
        let mut writer = BundleWriter::create(dir.path(), &c).unwrap();
        let err = crate::assimilation::run_experiment_with(&c, |rec| {
            writer.write_round(rec)?;
            if rec.round == 2 {
                return Err(Error::InvalidParameter("injected".into()));
            }
            Ok(())
        })
        .unwrap_err();
        writer.fail(&err).unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["status"], "failed");
        assert!(summary["error"].as_str().unwrap().contains("injected"));
        assert_eq!(lines(&dir.path().join("sensors.csv")).len(), 3);
    }

    #[test]
    fn star_shapes_have_one_column_per_angle() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = preset("peanut-desk").unwrap();
        c.grid.n_r = 9;
        c.grid.n_theta = 12;
        c.schedule.initial_sensors = [5, 11];
        c.schedule.times.truncate(1);
        c.sampler.n_warm = 50;
        c.sampler.n_total = 100;
        c.sampler.k0 = 25;
        run_to_bundle(&c, dir.path()).unwrap();
        let shapes = lines(&dir.path().join("shape_samples.csv"));
        assert_eq!(shapes[0].split(',').count(), 2 + 12);
        for row in &shapes[1..] {
            for cell in row.split(',').skip(2) {
                let q: f64 = cell.parse().unwrap();
                assert!((0.01..=0.99).contains(&q));
            }
        }
    }

    #[test]
    fn flux_series_layout() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny();
        write_forward(&c, dir.path(), true).unwrap();
        let rows = lines(&dir.path().join("flux.csv"));
        assert_eq!(rows.len(), 1 + c.schedule.times.len());
        assert_eq!(rows[0].split(',').count(), 13);
        assert_eq!(lines(&dir.path().join("field.csv")).len(), 1 + 9 * 12);
    }
}
