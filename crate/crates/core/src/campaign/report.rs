//! Markdown and CSV reports computed purely from persisted results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{io_err, read_records, results_files, CampaignError, EpisodeRecord, Preset};
use crate::metrics::{diff_metric, mut_over_def, trajectory_coverage, transfer_rate, AggregateTable, StepCounts};
use crate::scene::{SceneHash, TaskKind};
use crate::stats::{mann_whitney_u, paired_t};

/// Grid used for trajectory coverage.
pub const COVERAGE_GRID: (usize, usize) = (10, 10);
pub const REPORT_MARKDOWN: &str = "report.md";

const UNDEFINED: &str = "---";

pub fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{:.1}%", 100.0 * x))
}

pub fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.3}"))
}

fn fmt_p(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x:.4}"))
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn markdown(&self) -> String {
        let mut out = format!("| {} |\n", self.headers.join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(self.headers.len())));
        for r in &self.rows {
            out.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        out
    }

    fn csv(&self) -> String {
        let field = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let line = |cells: &mut dyn Iterator<Item = &str>| cells.map(field).collect::<Vec<_>>().join(",") + "\n";
        let mut out = line(&mut self.headers.iter().copied());
        for r in &self.rows {
            out.push_str(&line(&mut r.iter().map(String::as_str)));
        }
        out
    }
}

/// Rendered report: one Markdown document and CSV tables keyed by file name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub markdown: String,
    pub csv: BTreeMap<String, String>,
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<(), CampaignError> {
        let path = dir.join(REPORT_MARKDOWN);
        fs::write(&path, &self.markdown).map_err(io_err(&path))?;
        for (name, text) in &self.csv {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

fn step_counts(records: &[&EpisodeRecord]) -> Result<BTreeMap<(String, TaskKind), StepCounts>, CampaignError> {
    Ok(AggregateTable::from_results(records.iter().map(|r| (r.policy.as_str(), &r.result)))?.rows)
}

fn rates(c: Option<&StepCounts>) -> Option<[f64; 3]> {
    c.and_then(StepCounts::rates)
}

fn step_table(records: &[EpisodeRecord]) -> Result<(Table, BTreeMap<(Preset, String), BTreeMap<(String, TaskKind), StepCounts>>), CampaignError> {
    let mut groups: BTreeMap<(Preset, String), Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.preset, r.group.clone())).or_default().push(r);
    }
    let mut table = Table::new(&[
        "Preset", "Group", "Policy", "Task", "N", "Grasp", "Lift/Move", "Success", "Tr1", "Tr2", "Tr3", "Contacts",
    ]);
    let mut all = BTreeMap::new();
    for ((preset, group), recs) in groups {
        let counts = step_counts(&recs)?;
        let policies: BTreeSet<&str> = recs.iter().map(|r| r.policy.as_str()).collect();
        for policy in policies {
            for task in TaskKind::ALL {
                let c = counts.get(&(policy.to_string(), task)).copied().unwrap_or_default();
                let r = c.rates::<f64>();
                let tr = r.map_or_else(|| vec![None; 3], |r| transfer_rate(&r));
                let contacts: u64 = recs
                    .iter()
                    .filter(|x| x.policy == policy && x.task == task)
                    .map(|x| u64::from(x.result.confounder_contacts))
                    .sum();
                let mut row = vec![preset.to_string(), group.clone(), policy.to_string(), task.to_string(), c.n.to_string()];
                row.extend((0..3).map(|i| fmt_pct(r.map(|r| r[i]))));
                row.extend(tr.iter().map(|&t| fmt_ratio(t)));
                row.push(contacts.to_string());
                table.push(row);
            }
        }
        all.insert((preset, group), counts);
    }
    Ok((table, all))
}

fn coverage_table(records: &[EpisodeRecord]) -> Result<Table, CampaignError> {
    let mut points: BTreeMap<(Preset, &str, TaskKind), (BTreeMap<SceneHash, (f64, f64)>, [f64; 2])> = BTreeMap::new();
    for r in records {
        let e = points.entry((r.preset, &r.group, r.task)).or_insert_with(|| (BTreeMap::new(), r.table_half_extents));
        e.0.insert(r.source_hash, (r.target_xy[0], r.target_xy[1]));
    }
    let mut table = Table::new(&["Preset", "Group", "Task", "Scenes", "Covered", "Cells", "Coverage"]);
    for ((preset, group, task), (pts, half)) in points {
        let pts: Vec<(f64, f64)> = pts.into_values().collect();
        let c = trajectory_coverage(&pts, COVERAGE_GRID, half)?;
        table.push(vec![
            preset.to_string(),
            group.to_string(),
            task.to_string(),
            pts.len().to_string(),
            c.covered.to_string(),
            c.total().to_string(),
            fmt_ratio(Some(c.ratio)),
        ]);
    }
    Ok(table)
}

/// Default versus mutated pass counts for presets that re-execute scenes.
fn mutation_table(records: &[EpisodeRecord]) -> Table {
    struct Acc {
        scenes: BTreeSet<SceneHash>,
        def: BTreeSet<SceneHash>,
        per_repeat: BTreeMap<u32, usize>,
    }
    let mut acc: BTreeMap<(Preset, &str, TaskKind), Acc> = BTreeMap::new();
    for r in records.iter().filter(|r| r.preset.needs_source()) {
        let a = acc.entry((r.preset, &r.policy, r.task)).or_insert_with(|| Acc {
            scenes: BTreeSet::new(),
            def: BTreeSet::new(),
            per_repeat: BTreeMap::new(),
        });
        a.scenes.insert(r.source_hash);
        if r.source_success == Some(true) {
            a.def.insert(r.source_hash);
        }
        *a.per_repeat.entry(r.repeat).or_default() += r.result.success as usize;
    }
    let mut table =
        Table::new(&["Preset", "Policy", "Task", "Scenes", "Def.", "Mut. (mean)", "Def. rate", "Mut. rate", "Mut./Def.", "Diff."]);
    for ((preset, policy, task), a) in acc {
        let def = a.def.len() as f64;
        let muts: Vec<f64> = a.per_repeat.values().map(|&c| c as f64).collect();
        let mean = muts.iter().sum::<f64>() / muts.len() as f64;
        let n = a.scenes.len() as f64;
        table.push(vec![
            preset.to_string(),
            policy.to_string(),
            task.to_string(),
            a.scenes.len().to_string(),
            a.def.len().to_string(),
            format!("{mean:.1}"),
            fmt_pct(Some(def / n)),
            fmt_pct(Some(mean / n)),
            fmt_pct(mut_over_def(def, &muts)),
            fmt_pct(diff_metric(def, mean)),
        ]);
    }
    table
}

type Counts = BTreeMap<(Preset, String), BTreeMap<(String, TaskKind), StepCounts>>;

fn seen_unseen(counts: &Counts) -> Option<(&BTreeMap<(String, TaskKind), StepCounts>, &BTreeMap<(String, TaskKind), StepCounts>)> {
    let seen = counts.get(&(Preset::Baseline, super::DEFAULT_GROUP.to_string()))?;
    let unseen = counts.get(&(Preset::Unseen, super::DEFAULT_GROUP.to_string()))?;
    Some((seen, unseen))
}

fn common_policies<'a>(
    a: &'a BTreeMap<(String, TaskKind), StepCounts>,
    b: &BTreeMap<(String, TaskKind), StepCounts>,
) -> BTreeSet<&'a str> {
    let pb: BTreeSet<&str> = b.keys().map(|k| k.0.as_str()).collect();
    a.keys().map(|k| k.0.as_str()).filter(|p| pb.contains(p)).collect()
}

fn unseen_table(counts: &Counts) -> Table {
    let mut table = Table::new(&[
        "Policy", "Task", "Seen N", "Unseen N", "Grasp seen", "Grasp unseen", "Grasp diff", "Lift/Move seen",
        "Lift/Move unseen", "Lift/Move diff", "Success seen", "Success unseen", "Success diff",
    ]);
    let Some((seen, unseen)) = seen_unseen(counts) else { return table };
    for policy in common_policies(seen, unseen) {
        for task in TaskKind::ALL {
            let key = (policy.to_string(), task);
            let (s, u) = (seen.get(&key), unseen.get(&key));
            let (rs, ru) = (rates(s), rates(u));
            let mut row = vec![
                policy.to_string(),
                task.to_string(),
                s.map_or(0, |c| c.n).to_string(),
                u.map_or(0, |c| c.n).to_string(),
            ];
            for i in 0..3 {
                let (a, b) = (rs.map(|r| r[i]), ru.map(|r| r[i]));
                row.push(fmt_pct(a));
                row.push(fmt_pct(b));
                row.push(fmt_pct(a.zip(b).and_then(|(a, b)| diff_metric(a, b))));
            }
            table.push(row);
        }
    }
    table
}

fn stats_table(records: &[EpisodeRecord], counts: &Counts) -> Result<Table, CampaignError> {
    let mut table = Table::new(&["Test", "Policy", "Task", "Comparison", "N a", "N b", "Statistic", "p", "Effect"]);

    // Similar versus dissimilar confounders: success rate per confounder count.
    let mut sweep: BTreeMap<(&str, TaskKind), BTreeMap<&str, [(usize, usize); 2]>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.preset == Preset::ConfoundSweep) {
        let cell = sweep.entry((&r.policy, r.task)).or_default().entry(&r.group).or_default();
        let slot = &mut cell[usize::from(!r.similar_confound)];
        slot.0 += r.result.success as usize;
        slot.1 += 1;
    }
    for ((policy, task), by_n) in sweep {
        let sample = |i: usize| -> Vec<f64> {
            by_n.values().filter(|c| c[i].1 > 0).map(|c| c[i].0 as f64 / c[i].1 as f64).collect()
        };
        let (a, b) = (sample(0), sample(1));
        let mw = mann_whitney_u(&a, &b).ok();
        table.push(vec![
            "mann_whitney_u".into(),
            policy.to_string(),
            task.to_string(),
            "similar vs dissimilar confounders (success rate per n)".into(),
            a.len().to_string(),
            b.len().to_string(),
            mw.map_or_else(|| UNDEFINED.to_string(), |m| format!("{:.1}", m.u)),
            fmt_p(mw.and_then(|m| m.p)),
            fmt_ratio(mw.map(|m| m.effect)),
        ]);
    }

    // Seen versus unseen transfer rates, paired by policy.
    if let Some((seen, unseen)) = seen_unseen(counts) {
        let policies = common_policies(seen, unseen);
        for task in TaskKind::ALL {
            for k in 0..3 {
                let tr = |m: &BTreeMap<(String, TaskKind), StepCounts>, p: &str| {
                    rates(m.get(&(p.to_string(), task))).and_then(|r| transfer_rate(&r)[k])
                };
                let (a, b): (Vec<f64>, Vec<f64>) =
                    policies.iter().filter_map(|p| tr(seen, p).zip(tr(unseen, p))).unzip();
                let t = paired_t(&a, &b).ok();
                table.push(vec![
                    "paired_t".into(),
                    "(paired by policy)".into(),
                    task.to_string(),
                    format!("Tr{} seen vs unseen", k + 1),
                    a.len().to_string(),
                    b.len().to_string(),
                    fmt_ratio(t.and_then(|t| t.t)),
                    fmt_p(t.and_then(|t| t.p)),
                    fmt_ratio(t.and_then(|t| t.cohen_d)),
                ]);
            }
        }
    }
    Ok(table)
}

const NOTES: &str = "\
Step columns: Grasp = the correct target was held. Lift (pick_up) = the held target's bottom stayed above the \
lift height for the required consecutive frames. Move (move_near) = the target came within the near distance \
(AABB surface gap) of the reference object; success additionally requires the target to be released there. \
Move (put_on / put_in) = the held target's centre entered the reference's top footprint / cavity. \
Tr_n = rate_n / rate_(n-1) with rate_0 = 100%. Effect sizes of rank tests are rank-biserial correlations. \
Undefined values are shown as ---.";

/// Builds the report from records; fails on mixed protocol versions or
/// non-monotone step counts.
pub fn build_report(records: &[EpisodeRecord]) -> Result<Report, CampaignError> {
    let versions: BTreeSet<u32> = records.iter().map(|r| r.protocol_version).collect();
    if versions.len() > 1 {
        return Err(CampaignError::MixedProtocol(versions.into_iter().collect()));
    }
    let mut sorted: Vec<EpisodeRecord> = records.to_vec();
    sorted.sort_by(|a, b| (a.preset, a.sort_key()).cmp(&(b.preset, b.sort_key())));

    let (steps, counts) = step_table(&sorted)?;
    let sections = [
        ("Step success rates", "steps.csv", steps),
        ("Trajectory coverage (10x10 grid)", "coverage.csv", coverage_table(&sorted)?),
        ("Default vs mutated passes", "mutation.csv", mutation_table(&sorted)),
        ("Seen vs unseen objects", "unseen.csv", unseen_table(&counts)),
        ("Statistical comparisons", "stats.csv", stats_table(&sorted, &counts)?),
    ];
    let mut report = Report { markdown: format!("# Campaign report\n\n{NOTES}\n"), csv: BTreeMap::new() };
    for (title, file, table) in sections {
        if table.rows.is_empty() {
            continue;
        }
        report.markdown.push_str(&format!("\n## {title}\n\n{}", table.markdown()));
        report.csv.insert(file.to_string(), table.csv());
    }
    Ok(report)
}

/// Reads every results file under `root` and writes the report next to them.
pub fn emit_report(root: &Path) -> Result<Report, CampaignError> {
    let mut records = Vec::new();
    for path in results_files(root) {
        records.extend(read_records(&path)?);
    }
    let report = build_report(&records)?;
    report.write(root)?;
    Ok(report)
}
