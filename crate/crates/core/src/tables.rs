//! Plain-text table detection and flattening.
//!
//! Office exporters and plain-text writers emit three table shapes:
//!
//! * **dash-ruled**: dash rules acting as header / splitter / footer,
//!   e.g. a full-width top rule, header lines, a column rule, body rows and
//!   a footer rule;
//! * **top/bottom delimited**: body rows between exactly two column rules;
//! * **grid**: `+---+---+` borders with `|` separated cells.
//!
//! Column boundaries come from the rule lines and are measured in display
//! columns, so cells holding East Asian wide characters slice correctly.
//! Each detected table is replaced by one line per row with its cells
//! joined by a single space, and the pass repeats until nothing is left.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_width::UnicodeWidthChar;

pub const DEFAULT_MAX_PASSES: usize = 16;

/// Share of non-space characters that must be `-` for a dash rule.
const DASH_RULE_RATIO: f64 = 0.8;
const DASH_RULE_MIN_DASHES: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("not a table: {0}")]
    NotATable(String),
    #[error("table flattening did not reach a fixpoint within {passes} passes")]
    FlattenDiverged { passes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableKind {
    DashRuled,
    TopBottomDelimited,
    Grid,
}

/// A detected table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableBlock {
    pub kind: TableKind,
    /// Half-open range of line indices covered by the table.
    pub line_span: Range<usize>,
    /// Column start offsets in display columns, strictly increasing.
    pub col_bounds: Vec<usize>,
    /// Every row holds exactly `col_bounds.len()` cells.
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    /// `true` when the candidate was rejected and left as prose.
    pub skipped: bool,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Detection {
    pub blocks: Vec<TableBlock>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Display width of one character: 0 for combining marks, 2 for East Asian
/// wide and fullwidth characters, 1 otherwise.
pub fn char_width(c: char) -> usize {
    match get_general_category(c) {
        GeneralCategory::NonspacingMark | GeneralCategory::EnclosingMark => 0,
        _ if c.width() == Some(2) => 2,
        _ => 1,
    }
}

pub fn display_width(s: &str) -> usize {
    s.chars().map(char_width).sum()
}

/// `(display column, char)` for every character of `line`.
fn columns(line: &str) -> impl Iterator<Item = (usize, char)> + '_ {
    line.chars().scan(0usize, |col, c| {
        let at = *col;
        *col += char_width(c);
        Some((at, c))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Blank,
    GridBorder,
    DashRule,
    Text,
}

fn content(line: &str) -> &str {
    line.trim_end_matches(['\r', '\n'])
}

pub fn is_grid_border(line: &str) -> bool {
    let t = line.trim();
    let b = t.as_bytes();
    if b.len() < 3 || b[0] != b'+' || b[b.len() - 1] != b'+' {
        return false;
    }
    // every segment between '+' must be a non-empty run of -, = or :
    t[1..t.len() - 1].split('+').all(|seg| {
        !seg.is_empty() && seg.bytes().all(|c| matches!(c, b'-' | b'=' | b':'))
    }) && t.bytes().any(|c| c == b'-' || c == b'=')
}

pub fn is_dash_rule(line: &str) -> bool {
    if is_grid_border(line) {
        return false;
    }
    let (mut dashes, mut other) = (0usize, 0usize);
    for c in line.chars().filter(|c| !c.is_whitespace()) {
        if c == '-' {
            dashes += 1;
        } else {
            other += 1;
        }
    }
    dashes >= DASH_RULE_MIN_DASHES && dashes as f64 >= DASH_RULE_RATIO * (dashes + other) as f64
}

fn classify(line: &str) -> LineKind {
    let line = content(line);
    if line.trim().is_empty() {
        LineKind::Blank
    } else if is_grid_border(line) {
        LineKind::GridBorder
    } else if is_dash_rule(line) {
        LineKind::DashRule
    } else {
        LineKind::Text
    }
}

/// Column geometry of a rule line: start and (exclusive) end of each run.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Runs {
    starts: Vec<usize>,
    ends: Vec<usize>,
}

fn dash_runs(line: &str) -> Runs {
    let mut runs = Runs {
        starts: Vec::new(),
        ends: Vec::new(),
    };
    let mut in_run = false;
    let mut last = 0;
    for (col, c) in columns(content(line)) {
        let w = char_width(c);
        if c.is_whitespace() {
            if in_run {
                runs.ends.push(col);
                in_run = false;
            }
        } else if !in_run {
            runs.starts.push(col);
            in_run = true;
        }
        last = col + w;
    }
    if in_run {
        runs.ends.push(last);
    }
    runs
}

/// Positions of every `+` in a grid border.
fn plus_positions(line: &str) -> Vec<usize> {
    columns(content(line))
        .filter(|&(_, c)| c == '+')
        .map(|(col, _)| col)
        .collect()
}

/// Column start offsets of a rule line: the start of every dash run for
/// dash rules, every `+` but the last for grid borders.
pub fn parse_columns(rule_line: &str) -> Result<Vec<usize>, TableError> {
    let bounds = if is_grid_border(rule_line) {
        let mut plus = plus_positions(rule_line);
        plus.pop();
        plus
    } else if is_dash_rule(rule_line) {
        dash_runs(rule_line).starts
    } else {
        return Err(TableError::NotATable(format!(
            "not a rule line: {:?}",
            content(rule_line)
        )));
    };
    if bounds.len() < 2 {
        return Err(TableError::NotATable(format!(
            "fewer than two columns in {:?}",
            content(rule_line)
        )));
    }
    Ok(bounds)
}

/// Index of the column owning display column `col`. Anything left of the
/// first boundary belongs to the first column.
fn owning_column(bounds: &[usize], col: usize) -> usize {
    bounds.partition_point(|&b| b <= col).saturating_sub(1)
}

/// Accumulates the cells of one logical row across its physical lines.
struct RowBuilder {
    cells: Vec<Vec<String>>,
    touched: bool,
}

impl RowBuilder {
    fn new(ncols: usize) -> Self {
        RowBuilder {
            cells: vec![Vec::new(); ncols],
            touched: false,
        }
    }

    fn add_line(&mut self, pieces: Vec<String>) {
        for (cell, piece) in self.cells.iter_mut().zip(pieces) {
            let piece = piece.trim();
            if !piece.is_empty() {
                cell.push(piece.to_string());
            }
        }
        self.touched = true;
    }

    fn finish(self) -> Option<Vec<String>> {
        self.touched
            .then(|| self.cells.into_iter().map(|parts| parts.join(" ")).collect())
    }
}

/// Slices a dash-table line into cells. Returns the pieces and whether some
/// character fell into the gap between two column runs.
fn slice_dash_line(line: &str, bounds: &[usize], ends: &[usize]) -> (Vec<String>, bool) {
    let mut pieces = vec![String::new(); bounds.len()];
    let mut straddles = false;
    for (col, c) in columns(content(line)) {
        let k = owning_column(bounds, col);
        if !c.is_whitespace() && col >= ends[k] && k + 1 < bounds.len() {
            straddles = true;
        }
        pieces[k].push(c);
    }
    (pieces, straddles)
}

/// Slices a grid content line, dropping the `|` separators that sit on the
/// border columns. Returns the pieces and whether a border column held
/// something other than `|`.
fn slice_grid_line(line: &str, bounds: &[usize], right_edge: usize) -> (Vec<String>, bool) {
    let mut pieces = vec![String::new(); bounds.len()];
    let mut seen_border = vec![false; bounds.len() + 1];
    for (col, c) in columns(content(line)) {
        let border = bounds
            .binary_search(&col)
            .ok()
            .or((col == right_edge).then_some(bounds.len()));
        if let Some(b) = border {
            if c == '|' {
                seen_border[b] = true;
                continue;
            }
        }
        pieces[owning_column(bounds, col)].push(c);
    }
    let irregular = seen_border.iter().any(|&s| !s);
    (pieces, irregular)
}

fn is_grid_content(line: &str) -> bool {
    let t = content(line).trim();
    t.len() >= 2 && t.starts_with('|') && t.ends_with('|')
}

struct Detector<'a> {
    lines: &'a [&'a str],
    kinds: Vec<LineKind>,
    out: Detection,
}

impl<'a> Detector<'a> {
    fn skip(&mut self, line: usize, message: String) {
        log::debug!("table candidate at line {line} skipped: {message}");
        self.out.diagnostics.push(Diagnostic {
            line,
            skipped: true,
            message,
        });
    }

    fn note(&mut self, line: usize, message: String) {
        log::debug!("table at line {line}: {message}");
        self.out.diagnostics.push(Diagnostic {
            line,
            skipped: false,
            message,
        });
    }

    fn run(mut self) -> Detection {
        let n = self.lines.len();
        let mut i = 0;
        let mut prev_end = 0;
        while i < n {
            let block = match self.kinds[i] {
                LineKind::GridBorder => self.try_grid(i),
                LineKind::DashRule => self.try_dash(i, prev_end),
                _ => None,
            };
            match block {
                Some(block) => {
                    i = block.line_span.end;
                    prev_end = i;
                    self.out.blocks.push(block);
                }
                None => i += 1,
            }
        }
        self.out
    }

    fn try_grid(&mut self, start: usize) -> Option<TableBlock> {
        let mut borders = vec![start];
        let mut k = start + 1;
        while k < self.lines.len() {
            match self.kinds[k] {
                LineKind::GridBorder => borders.push(k),
                _ if is_grid_content(self.lines[k]) => {}
                _ => break,
            }
            k += 1;
        }
        if borders.len() < 2 {
            self.skip(start, "grid border without a closing border".into());
            return None;
        }
        let last = *borders.last().unwrap();
        let mut plus = plus_positions(self.lines[start]);
        if borders
            .iter()
            .any(|&b| plus_positions(self.lines[b]) != plus)
        {
            self.skip(start, "inconsistent grid borders".into());
            return None;
        }
        let right_edge = plus.pop().unwrap();
        let bounds = plus;
        if bounds.len() < 2 {
            self.skip(start, "grid with a single column".into());
            return None;
        }

        let mut rows = Vec::new();
        let mut irregular_rows = Vec::new();
        for pair in borders.windows(2) {
            let mut row = RowBuilder::new(bounds.len());
            for line_no in pair[0] + 1..pair[1] {
                let (pieces, irregular) = slice_grid_line(self.lines[line_no], &bounds, right_edge);
                if irregular {
                    irregular_rows.push(line_no);
                }
                row.add_line(pieces);
            }
            rows.extend(row.finish());
        }
        for line_no in irregular_rows {
            self.note(line_no, "grid row does not follow the border columns".into());
        }
        Some(TableBlock {
            kind: TableKind::Grid,
            line_span: start..last + 1,
            col_bounds: bounds,
            rows,
        })
    }

    fn try_dash(&mut self, start: usize, prev_end: usize) -> Option<TableBlock> {
        let n = self.lines.len();
        if start + 1 >= n || self.kinds[start + 1] == LineKind::Blank {
            self.skip(start, "dash rule not followed by content".into());
            return None;
        }

        let mut rules = vec![start];
        let mut closed = false;
        let mut k = start + 1;
        while k < n {
            match self.kinds[k] {
                LineKind::Blank if k + 1 >= n || self.kinds[k + 1] == LineKind::Blank => break,
                LineKind::DashRule => {
                    rules.push(k);
                    if k + 1 >= n || self.kinds[k + 1] == LineKind::Blank {
                        closed = true;
                        break;
                    }
                }
                _ => {}
            }
            k += 1;
        }
        if rules.len() < 2 {
            self.skip(start, "no closing dash rule".into());
            return None;
        }
        if !closed {
            self.note(start, "table closed by a rule followed by text".into());
        }

        let geometry: Vec<Runs> = rules.iter().map(|&r| dash_runs(self.lines[r])).collect();
        let widest = (0..geometry.len())
            .max_by_key(|&g| (geometry[g].starts.len(), std::cmp::Reverse(g)))
            .unwrap();
        let Runs {
            starts: bounds,
            ends,
        } = geometry[widest].clone();
        if bounds.len() < 2 {
            self.skip(start, "dash rules define fewer than two columns".into());
            return None;
        }
        let full_end = *ends.last().unwrap();
        for g in &geometry {
            let consistent = if g.starts.len() >= 2 {
                g.starts == bounds
            } else {
                g.starts[0] <= bounds[0] && g.ends[0] >= full_end
            };
            if !consistent {
                self.skip(start, "inconsistent rule widths".into());
                return None;
            }
        }

        let last_rule = *rules.last().unwrap();
        let mut header_start = start;
        while header_start > prev_end && self.kinds[header_start - 1] == LineKind::Text {
            header_start -= 1;
        }

        let (kind, span_start, segments): (TableKind, usize, Vec<(Range<usize>, bool)>) =
            if rules.len() >= 3 {
                let mut segs = vec![(rules[0] + 1..rules[1], true)];
                segs.extend(rules[1..].windows(2).map(|w| (w[0] + 1..w[1], false)));
                (TableKind::DashRuled, start, segs)
            } else if header_start < start {
                (
                    TableKind::DashRuled,
                    header_start,
                    vec![(header_start..start, true), (start + 1..last_rule, false)],
                )
            } else {
                (
                    TableKind::TopBottomDelimited,
                    start,
                    vec![(start + 1..last_rule, false)],
                )
            };

        let mut rows = Vec::new();
        let mut straddled = Vec::new();
        for (segment, is_header) in segments {
            let has_blank = segment.clone().any(|l| self.kinds[l] == LineKind::Blank);
            let mut row = RowBuilder::new(bounds.len());
            for line_no in segment {
                if self.kinds[line_no] == LineKind::Blank {
                    rows.extend(std::mem::replace(&mut row, RowBuilder::new(bounds.len())).finish());
                    continue;
                }
                let (pieces, straddles) = slice_dash_line(self.lines[line_no], &bounds, &ends);
                if straddles {
                    straddled.push(line_no);
                }
                row.add_line(pieces);
                if !is_header && !has_blank {
                    rows.extend(std::mem::replace(&mut row, RowBuilder::new(bounds.len())).finish());
                }
            }
            rows.extend(row.finish());
        }
        for line_no in straddled {
            self.note(line_no, "cell text crosses a column gap".into());
        }

        Some(TableBlock {
            kind,
            line_span: span_start..last_rule + 1,
            col_bounds: bounds,
            rows,
        })
    }
}

/// Finds tables in document order, with diagnostics for rejected candidates
/// and irregular rows.
pub fn detect_tables_with_diagnostics(lines: &[&str]) -> Detection {
    Detector {
        lines,
        kinds: lines.iter().map(|l| classify(l)).collect(),
        out: Detection::default(),
    }
    .run()
}

pub fn detect_tables(lines: &[&str]) -> Vec<TableBlock> {
    detect_tables_with_diagnostics(lines).blocks
}

/// One line per row, non-empty cells joined by a single space. Rows without
/// content produce nothing.
pub fn flatten_table(block: &TableBlock) -> Vec<String> {
    block
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| c.trim())
                .filter(|c| !c.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .filter(|line| !line.is_empty())
        .collect()
}

/// Replaces every table found in one detection pass. Returns the new text
/// and the number of tables replaced.
pub fn flatten_once(text: &str) -> (String, usize) {
    let lines: Vec<&str> = text.split('\n').collect();
    let blocks = detect_tables(&lines);
    if blocks.is_empty() {
        return (text.to_string(), 0);
    }
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    let mut cursor = 0;
    for block in &blocks {
        out.extend(lines[cursor..block.line_span.start].iter().map(|s| s.to_string()));
        out.extend(flatten_table(block));
        cursor = block.line_span.end;
    }
    out.extend(lines[cursor..].iter().map(|s| s.to_string()));
    (out.join("\n"), blocks.len())
}

pub fn flatten_recursive(text: &str) -> Result<String, TableError> {
    flatten_recursive_with_cap(text, DEFAULT_MAX_PASSES)
}

/// Applies [`flatten_once`] until no table is detected. Fails if more than
/// `max_passes` passes replaced something.
pub fn flatten_recursive_with_cap(text: &str, max_passes: usize) -> Result<String, TableError> {
    let mut current = text.to_string();
    let mut passes = 0;
    loop {
        let (next, replaced) = flatten_once(&current);
        if replaced == 0 {
            return Ok(current);
        }
        passes += 1;
        if passes > max_passes {
            return Err(TableError::FlattenDiverged { passes: max_passes });
        }
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(s: &str) -> Vec<&str> {
        s.split('\n').collect()
    }

    #[test]
    fn widths() {
        assert_eq!(display_width("abc"), 3);
        assert_eq!(display_width("中文"), 4);
        assert_eq!(display_width(""), 0);
        assert_eq!(display_width("e\u{0301}"), 1);
        assert_eq!(display_width("ＡＢ"), 4);
    }

    #[test]
    fn columns_from_rules() {
        assert_eq!(parse_columns("---  -----  --").unwrap(), vec![0, 5, 12]);
        assert_eq!(parse_columns("+---+---+").unwrap(), vec![0, 4]);
        assert!(matches!(parse_columns("----"), Err(TableError::NotATable(_))));
        assert!(matches!(parse_columns("+----+"), Err(TableError::NotATable(_))));
        assert!(matches!(parse_columns("hello"), Err(TableError::NotATable(_))));
    }

    #[test]
    fn rule_threshold() {
        assert!(is_dash_rule("---"));
        assert!(!is_dash_rule("--"));
        assert!(is_dash_rule("--------:"));
        assert!(!is_dash_rule("--- Original ---"));
        assert!(!is_dash_rule("+---+---+"));
        assert!(is_grid_border("  +===+---+"));
        assert!(!is_grid_border("+ a +"));
    }

    #[test]
    fn small_grid() {
        let text = "+--+--+\n|a |b |\n+--+--+";
        let blocks = detect_tables(&lines(text));
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, TableKind::Grid);
        assert_eq!(blocks[0].rows, vec![vec!["a".to_string(), "b".to_string()]]);
        assert_eq!(blocks[0].line_span, 0..3);
    }

    #[test]
    fn prose_has_no_tables() {
        let text = "The Council met today.\n\nIt adopted - without a vote - the text.";
        assert!(detect_tables(&lines(text)).is_empty());
    }

    #[test]
    fn dash_ruled_three_rows() {
        let text = "\
---------------
Name    Total
------  -------
UNDP    42
UNFPA   7
---------------";
        let blocks = detect_tables(&lines(text));
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.kind, TableKind::DashRuled);
        assert_eq!(b.col_bounds, vec![0, 8]);
        assert_eq!(
            b.rows,
            vec![
                vec!["Name".to_string(), "Total".to_string()],
                vec!["UNDP".to_string(), "42".to_string()],
                vec!["UNFPA".to_string(), "7".to_string()],
            ]
        );
    }

    #[test]
    fn top_bottom_table() {
        let text = "Intro.\n\n------  -----\nA       1\nB       2\n------  -----\n\nAfter.";
        let blocks = detect_tables(&lines(text));
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, TableKind::TopBottomDelimited);
        assert_eq!(blocks[0].line_span, 2..6);
        assert_eq!(blocks[0].rows.len(), 2);
    }

    #[test]
    fn header_above_two_rules_is_dash_ruled() {
        let text = "\nName    Total\n------  -----\nUNDP    42\n------  -----\n";
        let blocks = detect_tables(&lines(text));
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, TableKind::DashRuled);
        assert_eq!(blocks[0].line_span, 1..5);
        assert_eq!(flatten_table(&blocks[0]), vec!["Name Total", "UNDP 42"]);
    }

    #[test]
    fn multiline_rows_join_vertically() {
        let text = "\
--------------------
Body      Count
--------  ----------
United    12
Nations

World     3
Bank
--------------------";
        let blocks = detect_tables(&lines(text));
        assert_eq!(blocks.len(), 1);
        assert_eq!(
            flatten_table(&blocks[0]),
            vec!["Body Count", "United Nations 12", "World Bank 3"]
        );
    }

    #[test]
    fn flatten_examples() {
        let block = TableBlock {
            kind: TableKind::Grid,
            line_span: 0..3,
            col_bounds: vec![0, 5],
            rows: vec![
                vec!["Name".into(), "Total".into()],
                vec!["UNDP".into(), "42".into()],
            ],
        };
        assert_eq!(flatten_table(&block), vec!["Name Total", "UNDP 42"]);
        let empty = TableBlock {
            rows: vec![vec![]],
            ..block
        };
        assert!(flatten_table(&empty).is_empty());
    }

    #[test]
    fn inconsistent_rules_are_prose() {
        let text = "---  ----\na    b\n-----  --\n";
        let d = detect_tables_with_diagnostics(&lines(text));
        assert!(d.blocks.is_empty());
        assert!(d.diagnostics.iter().any(|x| x.skipped && x.message.contains("inconsistent")));
    }

    #[test]
    fn single_column_rules_are_prose() {
        let text = "-----\nsome text\n-----\n";
        assert!(detect_tables(&lines(text)).is_empty());
    }

    #[test]
    fn cjk_grid_cells() {
        let text = "+------+----+\n|联合国|UN  |\n|大会  |GA  |\n+------+----+";
        let b = &detect_tables(&lines(text))[0];
        assert_eq!(b.col_bounds, vec![0, 7]);
        assert_eq!(b.rows, vec![vec!["联合国 大会".to_string(), "UN GA".to_string()]]);
    }

    #[test]
    fn grid_with_header_separator() {
        let text = "+-----+-----+\n| Key | Val |\n+=====+=====+\n| a   | 1   |\n+-----+-----+\n| b   | 2   |\n+-----+-----+";
        let b = &detect_tables(&lines(text))[0];
        assert_eq!(flatten_table(b), vec!["Key Val", "a 1", "b 2"]);
    }

    #[test]
    fn irregular_grid_row_is_noted() {
        let text = "+---+---+\n| spanning |\n+---+---+";
        let d = detect_tables_with_diagnostics(&lines(text));
        assert_eq!(d.blocks.len(), 1);
        assert!(d.diagnostics.iter().any(|x| !x.skipped));
        let flat = flatten_table(&d.blocks[0]);
        assert_eq!(flat.len(), 1);
        assert!(flat[0].replace(' ', "").starts_with("spanning"));
    }

    #[test]
    fn recursive_replaces_grid_in_place() {
        let text = "Before.\n\n+--+--+\n|a |b |\n+--+--+\n\nAfter.";
        assert_eq!(flatten_recursive(text).unwrap(), "Before.\n\na b\n\nAfter.");
    }

    #[test]
    fn recursive_prose_is_identity() {
        let text = "Just prose.\r\n\r\nMore prose — with dashes -- here.\n";
        assert_eq!(flatten_recursive(text).unwrap(), text);
    }

    #[test]
    fn nested_table_needs_two_passes() {
        let text = "\
--------------------
Key     Value
------  ------------
        +---+---+
        |x  |y  |
        +---+---+
--------------------";
        let (once, n) = flatten_once(text);
        assert_eq!(n, 1);
        assert_eq!(detect_tables(&lines(&once)).len(), 1);
        let full = flatten_recursive(text).unwrap();
        assert_eq!(full, "Key Value\nx y");
        assert!(detect_tables(&lines(&full)).is_empty());
        assert!(matches!(
            flatten_recursive_with_cap(text, 1),
            Err(TableError::FlattenDiverged { passes: 1 })
        ));
    }
}
