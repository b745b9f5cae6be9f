//! Comparison tables across archives.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use groundlab_core::harness::Metric;

use crate::archive::{self, Manifest};
use crate::error::{Error, Result};
use crate::stats::{summarize, SummaryRow};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveSummary {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub rows: Vec<SummaryRow>,
}

/// Loads one archive and recomputes its summary from `epochs.csv`.
pub fn load(dir: &Path) -> Result<ArchiveSummary> {
    let manifest = archive::read_manifest(dir)?;
    if !manifest.complete {
        return Err(Error::archive(
            dir,
            format!(
                "incomplete: {} of {} trials finished",
                manifest.completed_trials.len(),
                manifest.trials
            ),
        ));
    }
    let best = archive::best_epochs(dir)?;
    if best.len() != manifest.trials {
        return Err(Error::archive(
            dir,
            format!(
                "epochs.csv holds {} trials, manifest says {}",
                best.len(),
                manifest.trials
            ),
        ));
    }
    let rows = summarize(&manifest.method, &best);
    Ok(ArchiveSummary {
        path: dir.to_path_buf(),
        manifest,
        rows,
    })
}

/// Loads every archive and checks that they share an environment.
pub fn load_all(dirs: &[PathBuf]) -> Result<Vec<ArchiveSummary>> {
    if dirs.is_empty() {
        return Err(Error::Config("report needs at least one archive".into()));
    }
    let all = dirs.iter().map(|d| load(d)).collect::<Result<Vec<_>>>()?;
    let env = &all[0].manifest.environment_hash;
    for a in &all[1..] {
        if &a.manifest.environment_hash != env {
            return Err(Error::archive(
                &a.path,
                format!(
                    "environment differs from {} (grid, flow, dynamics or horizon changed)",
                    all[0].path.display()
                ),
            ));
        }
    }
    Ok(all)
}

fn cell(row: &SummaryRow) -> String {
    let mut s = format!("{:.2}({:+.2})", row.mean_real, row.mean_gap);
    if let Some(sd) = row.std_real {
        let _ = write!(s, "±{sd:.2}");
    }
    s
}

/// Text table, one row per archive: `mean(gap)±std` for every metric.
pub fn table(archives: &[ArchiveSummary]) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    let mut lines = vec![header];
    for a in archives {
        let mut line = vec![a.manifest.method.clone()];
        line.extend(a.rows.iter().map(cell));
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| {
            lines
                .iter()
                .map(|l| l[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// All summary rows of all archives, in `summary.csv` layout.
pub fn write_csv(path: &Path, archives: &[ArchiveSummary]) -> Result<()> {
    let rows: Vec<SummaryRow> = archives
        .iter()
        .flat_map(|a| a.rows.iter().cloned())
        .collect();
    archive::write_summary(path, &rows)
}
