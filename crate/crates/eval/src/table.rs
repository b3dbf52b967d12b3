//! Result tables: tasks as rows, one column per (group, robot), each cell
//! showing mean reward and success percentage, plus an average-success row.

use std::fmt;
use std::str::FromStr;

use assistlab_core::envs::{HumanSource, Task};
use assistlab_core::robot::RobotProfileId;
use serde::{Deserialize, Serialize};

use crate::evaluate::{MetricsRow, PolicyMode};
use crate::EvalError;

pub const AVG_LABEL: &str = "Avg. Success";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Original policies against static sampled humans and against live humans.
    OriginalVsSim,
    /// Original policies against revised policies.
    OriginalVsRevised,
    /// One cell per task and robot, whatever the policy.
    Single,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::OriginalVsSim => "original-vs-sim",
            Layout::OriginalVsRevised => "original-vs-revised",
            Layout::Single => "single",
        }
    }

    fn groups(self) -> Vec<Group> {
        match self {
            Layout::OriginalVsSim => vec![
                Group { label: "Simulation", mode: Some(PolicyMode::Original), source: Some(HumanSource::StaticSampled) },
                Group { label: "Virtual Reality", mode: Some(PolicyMode::Original), source: Some(HumanSource::Live) },
            ],
            Layout::OriginalVsRevised => vec![
                Group { label: "Original", mode: Some(PolicyMode::Original), source: None },
                Group { label: "Revised", mode: Some(PolicyMode::Revised), source: None },
            ],
            Layout::Single => vec![Group { label: "Policy", mode: None, source: None }],
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Layout::OriginalVsSim, Layout::OriginalVsRevised, Layout::Single]
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown layout '{s}' (expected original-vs-sim, original-vs-revised or single)"))
    }
}

struct Group {
    label: &'static str,
    mode: Option<PolicyMode>,
    source: Option<HumanSource>,
}

impl Group {
    fn matches(&self, row: &MetricsRow) -> bool {
        self.mode.is_none_or(|m| m == row.policy_mode) && self.source.is_none_or(|s| s == row.human_source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub group: String,
    pub robot: RobotProfileId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean_reward: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<(Task, Vec<Cell>)>,
    /// Mean success rate of each column over the tasks.
    pub avg_success: Vec<f64>,
}

/// Arranges metrics into the layout's grid. Every task, robot and group
/// combination must be covered by exactly one row.
pub fn make_table(rows: &[MetricsRow], layout: Layout) -> Result<Table, EvalError> {
    let groups = layout.groups();
    let columns: Vec<Column> = groups
        .iter()
        .flat_map(|g| RobotProfileId::ALL.map(|robot| Column { group: g.label.to_owned(), robot }))
        .collect();
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for task in Task::ALL {
        let mut cells = Vec::new();
        for g in &groups {
            for robot in RobotProfileId::ALL {
                let hits: Vec<&MetricsRow> =
                    rows.iter().filter(|r| r.task == task && r.robot == robot && g.matches(r)).collect();
                let name = format!("{task}/{robot}/{}", g.label);
                match hits.as_slice() {
                    [] => missing.push(name),
                    [r] => cells.push(Cell { mean_reward: r.mean_reward, success_rate: r.success_rate }),
                    _ => return Err(EvalError::DuplicateCell(name)),
                }
            }
        }
        out.push((task, cells));
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingCell(missing));
    }
    let avg_success = (0..columns.len())
        .map(|c| out.iter().map(|(_, cells)| cells[c].success_rate).sum::<f64>() / out.len() as f64)
        .collect();
    Ok(Table { columns, rows: out, avg_success })
}

fn cell_text(c: &Cell) -> String {
    format!("{:.1} ({:.0}%)", c.mean_reward, 100.0 * c.success_rate)
}

impl Table {
    /// Wide CSV: a reward and a success column per table column, then the
    /// average-success row with empty reward fields. Floats use their
    /// shortest round-trip form.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), EvalError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["task".to_owned()];
        for c in &self.columns {
            header.push(format!("{}/{} reward", c.group, c.robot));
            header.push(format!("{}/{} success", c.group, c.robot));
        }
        wr.write_record(&header)?;
        for (task, cells) in &self.rows {
            let mut rec = vec![task.to_string()];
            for c in cells {
                rec.push(c.mean_reward.to_string());
                rec.push(c.success_rate.to_string());
            }
            wr.write_record(&rec)?;
        }
        let mut rec = vec![AVG_LABEL.to_owned()];
        for a in &self.avg_success {
            rec.push(String::new());
            rec.push(a.to_string());
        }
        wr.write_record(&rec)?;
        wr.flush().map_err(|e| EvalError::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Table, EvalError> {
        let bad = |m: String| EvalError::Schema { line: 0, message: m };
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("task") || header.len() % 2 != 1 {
            return Err(bad("table header must be task followed by reward/success pairs".into()));
        }
        let mut columns = Vec::new();
        for k in (1..header.len()).step_by(2) {
            let name = header[k]
                .strip_suffix(" reward")
                .ok_or_else(|| bad(format!("column {k} is not a reward column")))?;
            let (group, robot) = name.rsplit_once('/').ok_or_else(|| bad(format!("column {name:?} lacks a robot")))?;
            columns.push(Column { group: group.to_owned(), robot: robot.parse().map_err(bad)? });
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let mut rows = Vec::new();
        let mut avg_success = None;
        for rec in rd.records() {
            let rec = rec?;
            if &rec[0] == AVG_LABEL {
                avg_success = Some((0..columns.len()).map(|c| num(&rec[2 + 2 * c])).collect::<Result<Vec<_>, _>>()?);
                continue;
            }
            let task: Task = rec[0].parse().map_err(bad)?;
            let cells = (0..columns.len())
                .map(|c| Ok(Cell { mean_reward: num(&rec[1 + 2 * c])?, success_rate: num(&rec[2 + 2 * c])? }))
                .collect::<Result<Vec<_>, EvalError>>()?;
            rows.push((task, cells));
        }
        let avg_success = avg_success.ok_or_else(|| bad("missing average-success row".into()))?;
        Ok(Table { columns, rows, avg_success })
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut groups = vec![String::new()];
        let mut robots = vec!["Task".to_owned()];
        for (i, c) in self.columns.iter().enumerate() {
            let first = i == 0 || self.columns[i - 1].group != c.group;
            groups.push(if first { c.group.clone() } else { String::new() });
            robots.push(c.robot.to_string());
        }
        grid.push(groups);
        grid.push(robots);
        for (task, cells) in &self.rows {
            let mut line = vec![task.to_string()];
            line.extend(cells.iter().map(cell_text));
            grid.push(line);
        }
        let mut avg = vec![AVG_LABEL.to_owned()];
        avg.extend(self.avg_success.iter().map(|a| format!("{:.0}%", 100.0 * a)));
        grid.push(avg);

        let widths: Vec<usize> =
            (0..grid[0].len()).map(|c| grid.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for line in &grid {
            let padded: Vec<String> = line.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            s.push_str(padded.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
