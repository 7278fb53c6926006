use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StudySpec;
use crate::error::{Error, Result};
use crate::metrics::Goal;
use crate::preprocess::percentile;
use crate::seed;
use crate::stats::{self, ComparisonVerdict, SampleSet, WinTieLoss};

/// Test-set outcome of one optimizer on one dataset in one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub dataset: String,
    pub optimizer: String,
    pub repeat: usize,
    pub goal: Goal,
    pub score: f64,
    pub evaluations: usize,
    pub best_config: String,
    pub error: Option<String>,
    /// Ids of the test rows; filled only by audited runs.
    #[serde(skip)]
    pub test_rows: Vec<usize>,
    /// Ids of every row the optimizer's objective touched; audited runs only.
    #[serde(skip)]
    pub objective_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub samples: SampleSet,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetVerdict {
    pub dataset: String,
    pub verdict: ComparisonVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub focal: String,
    pub rival: String,
    pub counts: WinTieLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    /// Ordered by dataset, optimizer and repeat, as listed in the spec.
    pub records: Vec<RepeatRecord>,
    pub cells: Vec<CellSummary>,
    pub verdicts: Vec<DatasetVerdict>,
    pub summary: Vec<PairSummary>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl StudyResult {
    pub(crate) fn from_records(spec: &StudySpec, records: Vec<RepeatRecord>) -> Result<Self> {
        let datasets = spec.datasets.iter().map(|d| (d.name.clone(), d.goal)).collect();
        let labels = spec.optimizers.iter().map(|o| o.label()).collect();
        Self::assemble(records, datasets, labels, spec.seed)
    }

    /// Rebuilds cells, verdicts and counts from bare records, keeping
    /// datasets and optimizers in order of first appearance.
    pub fn from_saved_records(records: Vec<RepeatRecord>, seed: u64) -> Result<Self> {
        let mut datasets: Vec<(String, Goal)> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for r in &records {
            match datasets.iter().find(|(name, _)| *name == r.dataset) {
                Some((_, goal)) if *goal != r.goal => {
                    return Err(Error::GoalMismatch(format!(
                        "dataset {:?} mixes {} and {}",
                        r.dataset, goal, r.goal
                    )))
                }
                Some(_) => {}
                None => datasets.push((r.dataset.clone(), r.goal)),
            }
            if !labels.contains(&r.optimizer) {
                labels.push(r.optimizer.clone());
            }
        }
        if records.is_empty() {
            return Err(Error::Empty("records"));
        }
        Self::assemble(records, datasets, labels, seed)
    }

    fn assemble(
        mut records: Vec<RepeatRecord>,
        datasets: Vec<(String, Goal)>,
        labels: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        let ds_pos = |name: &str| datasets.iter().position(|d| d.0 == name);
        let opt_pos = |name: &str| labels.iter().position(|l| l == name);
        records.sort_by_key(|r| (ds_pos(&r.dataset), opt_pos(&r.optimizer), r.repeat));

        let mut cells = Vec::new();
        let mut verdicts = Vec::new();
        for (d, (ds_name, goal)) in datasets.iter().enumerate() {
            let start = cells.len();
            for label in &labels {
                let rows: Vec<&RepeatRecord> = records
                    .iter()
                    .filter(|r| &r.dataset == ds_name && &r.optimizer == label)
                    .collect();
                cells.push(CellSummary {
                    dataset: ds_name.clone(),
                    samples: SampleSet::new(
                        label.clone(),
                        rows.iter().map(|r| r.score).collect(),
                        goal.polarity(),
                    )?,
                    failures: rows.iter().filter(|r| r.error.is_some()).count(),
                });
            }
            let here = &cells[start..];
            for i in 0..here.len() {
                for j in i + 1..here.len() {
                    let s = seed::derive(seed, &[0x5747, d as u64, i as u64, j as u64]);
                    verdicts.push(DatasetVerdict {
                        dataset: ds_name.clone(),
                        verdict: stats::verdict(&here[i].samples, &here[j].samples, s)?,
                    });
                }
            }
        }

        let mut summary = Vec::new();
        for focal in &labels {
            for rival in labels.iter().filter(|l| *l != focal) {
                let relevant: Vec<ComparisonVerdict> = verdicts
                    .iter()
                    .map(|v| &v.verdict)
                    .filter(|v| (&v.a == focal && &v.b == rival) || (&v.a == rival && &v.b == focal))
                    .cloned()
                    .collect();
                summary.push(PairSummary {
                    focal: focal.clone(),
                    rival: rival.clone(),
                    counts: stats::win_tie_loss(&relevant, focal),
                });
            }
        }
        Ok(StudyResult {
            records,
            cells,
            verdicts,
            summary,
        })
    }

    /// One CSV row per dataset, optimizer and repeat.
    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(io_err(path))
    }

    /// Plain-text tables: per-cell score summaries, pairwise verdicts and
    /// win/tie/loss counts.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str("# test scores over repeats\n");
        out.push_str("dataset\toptimizer\tmedian\tiqr\tmean\tfailed\n");
        for c in &self.cells {
            let mut s = c.samples.scores.clone();
            s.sort_by(f64::total_cmp);
            let iqr = percentile(&s, 75.0) - percentile(&s, 25.0);
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                c.dataset,
                c.samples.name,
                c.samples.median(),
                iqr,
                c.samples.mean(),
                c.failures
            );
        }
        out.push_str("\n# pairwise verdicts\n");
        out.push_str("dataset\ta\tb\tsignificant\ta12\twinner\n");
        for v in &self.verdicts {
            let x = &v.verdict;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.4}\t{}",
                v.dataset, x.a, x.b, x.significant, x.a12, x.winner
            );
        }
        out.push_str("\n# win/tie/loss\n");
        out.push_str("focal\trival\twin\ttie\tloss\twin+tie|all\n");
        for p in &self.summary {
            let c = p.counts;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}|{}",
                p.focal,
                p.rival,
                c.wins,
                c.ties,
                c.losses,
                c.wins + c.ties,
                c.total()
            );
        }
        out
    }

    /// Writes `results.csv` and `summary.tsv` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.write_records_csv(dir.join("results.csv"))?;
        let summary = dir.join("summary.tsv");
        std::fs::write(&summary, self.summary_table()).map_err(io_err(&summary))
    }
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<RepeatRecord>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
