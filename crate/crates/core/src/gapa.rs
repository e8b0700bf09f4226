//! Graph-aided paragraph alignment.
//!
//! Every word of the LCS between the translated source document and the
//! English document links the source paragraph holding it to the target
//! paragraph holding it. Paragraphs whose share of LCS letters (the hit
//! rate) is below the drop threshold lose their links. Connected components
//! of the remaining bipartite graph, widened to contiguous non-crossing
//! index intervals, are the M-N alignment groups.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lcs::{flatten_tokens, lcs_hunt_szymanski, FlatToken, LcsStats, MatchPair};
use crate::normalize::{Document, Paragraph};
use crate::union_find::UnionFind;

/// Default hit-rate cutoff (`DROP_THRESHOLD`).
pub const DEFAULT_DROP_THRESHOLD: f64 = 0.3;

/// Separator placed between paragraphs merged into one group.
pub const MERGE_SEPARATOR: &str = "\n";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("{side} document has no paragraphs")]
    EmptyDocument { side: Side },
    #[error("drop threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("original source has {original} paragraphs, translation has {translated}")]
    SourceLengthMismatch { original: usize, translated: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Source => "source",
            Side::Target => "target",
        })
    }
}

/// An edge of the paragraph graph, weighted by the letters of the LCS
/// words that induced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParaLink {
    pub src_para: usize,
    pub tgt_para: usize,
    pub letter_weight: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HitRates {
    pub src: Vec<f64>,
    pub tgt: Vec<f64>,
}

impl HitRates {
    pub fn get(&self, side: Side) -> &[f64] {
        match side {
            Side::Source => &self.src,
            Side::Target => &self.tgt,
        }
    }
}

/// One M-N correspondence between contiguous paragraph ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentGroup {
    pub src_range: Range<usize>,
    pub tgt_range: Range<usize>,
    pub min_hit_rate_src: f64,
    pub min_hit_rate_tgt: f64,
    pub merged_src_text: String,
    pub merged_tgt_text: String,
}

impl AlignmentGroup {
    /// Smallest hit rate of any member paragraph on either side.
    pub fn min_hit_rate(&self) -> f64 {
        self.min_hit_rate_src.min(self.min_hit_rate_tgt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub groups: Vec<AlignmentGroup>,
    pub dropped_src: Vec<usize>,
    pub dropped_tgt: Vec<usize>,
    pub hit_rates: HitRates,
    pub h_c: f64,
    pub lcs: LcsStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl AlignmentResult {
    /// Replaces the merged source texts with the paragraphs of `original`,
    /// the untranslated document the alignment was computed for.
    pub fn with_source_texts(mut self, original: &Document) -> Result<Self, AlignError> {
        if original.len() != self.hit_rates.src.len() {
            return Err(AlignError::SourceLengthMismatch {
                original: original.len(),
                translated: self.hit_rates.src.len(),
            });
        }
        for g in &mut self.groups {
            g.merged_src_text = merge_text(&original.paragraphs[g.src_range.clone()]);
        }
        Ok(self)
    }

    pub fn mean_hit_rate(&self, side: Side) -> f64 {
        let rates = self.hit_rates.get(side);
        if rates.is_empty() {
            0.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        }
    }
}

/// Aggregates LCS matches into paragraph links, summing the letters of the
/// matched word into its `(src_para, tgt_para)` link.
pub fn build_links(
    matches: &[MatchPair],
    src_tokens: &[FlatToken<'_>],
    tgt_tokens: &[FlatToken<'_>],
) -> Vec<ParaLink> {
    let mut weights: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for m in matches {
        let s = &src_tokens[m.src_pos];
        let t = &tgt_tokens[m.tgt_pos];
        *weights.entry((s.para_index, t.para_index)).or_default() += s.letters as u64;
    }
    weights
        .into_iter()
        .map(|((src_para, tgt_para), letter_weight)| ParaLink {
            src_para,
            tgt_para,
            letter_weight,
        })
        .collect()
}

/// Letters of LCS words located in `para` over all letters of `para`.
/// Paragraphs without letters have rate 0.
pub fn hit_rate(para: &Paragraph, lcs_letters: u64) -> f64 {
    let total = para.letters();
    if total == 0 {
        0.0
    } else {
        lcs_letters as f64 / total as f64
    }
}

pub fn hit_rates(
    src_doc: &Document,
    tgt_doc: &Document,
    matches: &[MatchPair],
    src_tokens: &[FlatToken<'_>],
    tgt_tokens: &[FlatToken<'_>],
) -> HitRates {
    let mut src_letters = vec![0u64; src_doc.len()];
    let mut tgt_letters = vec![0u64; tgt_doc.len()];
    for m in matches {
        let s = &src_tokens[m.src_pos];
        let t = &tgt_tokens[m.tgt_pos];
        src_letters[s.para_index] += s.letters as u64;
        tgt_letters[t.para_index] += t.letters as u64;
    }
    let rates = |doc: &Document, letters: &[u64]| -> Vec<f64> {
        doc.paragraphs
            .iter()
            .zip(letters)
            .map(|(p, &l)| hit_rate(p, l))
            .collect()
    };
    HitRates {
        src: rates(src_doc, &src_letters),
        tgt: rates(tgt_doc, &tgt_letters),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredLinks {
    pub links: Vec<ParaLink>,
    pub dropped_src: Vec<usize>,
    pub dropped_tgt: Vec<usize>,
}

/// Removes every link touching a paragraph whose hit rate is strictly
/// below `h_c`; those paragraphs are reported as dropped.
pub fn filter_nodes(links: &[ParaLink], rates: &HitRates, h_c: f64) -> FilteredLinks {
    let below = |rates: &[f64]| -> Vec<usize> {
        rates
            .iter()
            .enumerate()
            .filter(|(_, &h)| h < h_c)
            .map(|(i, _)| i)
            .collect()
    };
    FilteredLinks {
        links: links
            .iter()
            .filter(|l| rates.src[l.src_para] >= h_c && rates.tgt[l.tgt_para] >= h_c)
            .copied()
            .collect(),
        dropped_src: below(&rates.src),
        dropped_tgt: below(&rates.tgt),
    }
}

/// Paragraph indices of one connected subgraph, each side sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Component {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// Connected components of the bipartite graph over `m` source and `n`
/// target nodes. Nodes without links belong to no component. Components
/// are ordered by their smallest source index.
pub fn connected_components(links: &[ParaLink], m: usize, n: usize) -> Vec<Component> {
    let mut uf = UnionFind::new(m + n);
    let mut linked = vec![false; m + n];
    for l in links {
        uf.union(l.src_para, m + l.tgt_para);
        linked[l.src_para] = true;
        linked[m + l.tgt_para] = true;
    }
    let mut by_root: BTreeMap<usize, Component> = BTreeMap::new();
    for node in (0..m + n).filter(|&v| linked[v]) {
        let c = by_root.entry(uf.find(node)).or_insert_with(|| Component {
            src: Vec::new(),
            tgt: Vec::new(),
        });
        if node < m {
            c.src.push(node);
        } else {
            c.tgt.push(node - m);
        }
    }
    let mut comps: Vec<Component> = by_root.into_values().collect();
    comps.sort();
    comps
}

/// Contiguous source and target ranges of one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpan {
    pub src: Range<usize>,
    pub tgt: Range<usize>,
}

/// Maps components to index intervals and unions any that overlap or cross
/// until the groups are pairwise disjoint and strictly ordered on both
/// sides. Unlinked paragraphs inside a resulting interval are absorbed.
pub fn canonicalize_groups(components: &[Component], m: usize, n: usize) -> Vec<GroupSpan> {
    let mut spans: Vec<GroupSpan> = components
        .iter()
        .filter(|c| !c.src.is_empty() && !c.tgt.is_empty())
        .map(|c| GroupSpan {
            src: c.src[0]..c.src[c.src.len() - 1] + 1,
            tgt: c.tgt[0]..c.tgt[c.tgt.len() - 1] + 1,
        })
        .collect();
    spans.sort_by_key(|s| (s.src.start, s.tgt.start));

    let mut stack: Vec<GroupSpan> = Vec::with_capacity(spans.len());
    for mut span in spans {
        while let Some(top) = stack.last() {
            let ordered = top.src.end <= span.src.start && top.tgt.end <= span.tgt.start;
            if ordered {
                break;
            }
            let top = stack.pop().unwrap();
            span = GroupSpan {
                src: top.src.start.min(span.src.start)..top.src.end.max(span.src.end),
                tgt: top.tgt.start.min(span.tgt.start)..top.tgt.end.max(span.tgt.end),
            };
        }
        stack.push(span);
    }
    debug_assert!(stack.iter().all(|s| s.src.end <= m && s.tgt.end <= n));
    stack
}

fn merge_text(paragraphs: &[Paragraph]) -> String {
    paragraphs
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join(MERGE_SEPARATOR)
}

fn uncovered(len: usize, ranges: impl Iterator<Item = Range<usize>>) -> Vec<usize> {
    let mut covered = vec![false; len];
    for r in ranges {
        covered[r].iter_mut().for_each(|c| *c = true);
    }
    (0..len).filter(|&i| !covered[i]).collect()
}

fn min_rate(rates: &[f64], range: Range<usize>) -> f64 {
    rates[range].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Runs the whole alignment: LCS, links, hit rates, filtering, components
/// and interval repair. `src` is the source document already translated
/// into the target language, paragraph for paragraph.
pub fn align_documents(src: &Document, tgt: &Document, h_c: f64) -> Result<AlignmentResult, AlignError> {
    if !(0.0..=1.0).contains(&h_c) {
        return Err(AlignError::InvalidThreshold(h_c));
    }
    if src.is_empty() {
        return Err(AlignError::EmptyDocument { side: Side::Source });
    }
    if tgt.is_empty() {
        return Err(AlignError::EmptyDocument { side: Side::Target });
    }
    let (m, n) = (src.len(), tgt.len());

    let src_tokens = flatten_tokens(src);
    let tgt_tokens = flatten_tokens(tgt);
    let lcs = lcs_hunt_szymanski(&src_tokens, &tgt_tokens);

    let links = build_links(&lcs.pairs, &src_tokens, &tgt_tokens);
    let rates = hit_rates(src, tgt, &lcs.pairs, &src_tokens, &tgt_tokens);
    let filtered = filter_nodes(&links, &rates, h_c);
    let components = connected_components(&filtered.links, m, n);
    let spans = canonicalize_groups(&components, m, n);

    let mut diagnostics = Vec::new();
    for span in &spans {
        for (side, range, len) in [(Side::Source, &span.src, m), (Side::Target, &span.tgt, n)] {
            if len >= 2 && range.len() * 2 > len {
                let msg = format!(
                    "{}: one group covers {} of {} {side} paragraphs",
                    src.symbol,
                    range.len(),
                    len
                );
                log::warn!("{msg}");
                diagnostics.push(msg);
            }
        }
    }

    let groups = spans
        .iter()
        .map(|span| AlignmentGroup {
            src_range: span.src.clone(),
            tgt_range: span.tgt.clone(),
            min_hit_rate_src: min_rate(&rates.src, span.src.clone()),
            min_hit_rate_tgt: min_rate(&rates.tgt, span.tgt.clone()),
            merged_src_text: merge_text(&src.paragraphs[span.src.clone()]),
            merged_tgt_text: merge_text(&tgt.paragraphs[span.tgt.clone()]),
        })
        .collect();

    Ok(AlignmentResult {
        dropped_src: uncovered(m, spans.iter().map(|s| s.src.clone())),
        dropped_tgt: uncovered(n, spans.iter().map(|s| s.tgt.clone())),
        groups,
        hit_rates: rates,
        h_c,
        lcs: lcs.stats,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::Token;

    fn link(s: usize, t: usize) -> ParaLink {
        ParaLink {
            src_para: s,
            tgt_para: t,
            letter_weight: 1,
        }
    }

    fn comp(src: &[usize], tgt: &[usize]) -> Component {
        Component {
            src: src.to_vec(),
            tgt: tgt.to_vec(),
        }
    }

    fn span(s: Range<usize>, t: Range<usize>) -> GroupSpan {
        GroupSpan { src: s, tgt: t }
    }

    fn doc(paras: &[&str]) -> Document {
        Document::from_paragraphs("S/1", "en", paras)
    }

    #[test]
    fn links_single_paragraph() {
        let d = doc(&["the council met"]);
        let tokens = flatten_tokens(&d);
        let matches: Vec<MatchPair> = (0..3).map(|i| MatchPair::new(i, i)).collect();
        let links = build_links(&matches, &tokens, &tokens);
        assert_eq!(
            links,
            vec![ParaLink {
                src_para: 0,
                tgt_para: 0,
                letter_weight: 3 + 7 + 3
            }]
        );
    }

    #[test]
    fn links_aggregate_by_pair() {
        let src = doc(&["alpha", "beta gamma"]);
        let tgt = doc(&["alpha beta gamma"]);
        let (st, tt) = (flatten_tokens(&src), flatten_tokens(&tgt));
        let matches = vec![MatchPair::new(0, 0), MatchPair::new(1, 1), MatchPair::new(2, 2)];
        let links = build_links(&matches, &st, &tt);
        assert_eq!(links.iter().map(|l| (l.src_para, l.tgt_para)).collect::<Vec<_>>(), vec![(0, 0), (1, 0)]);
        assert_eq!(links[1].letter_weight, 4 + 5);
        assert!(build_links(&[], &st, &tt).is_empty());
    }

    #[test]
    fn hit_rate_examples() {
        let para = Paragraph {
            index: 0,
            text: String::new(),
            tokens: vec![
                Token { surface: "abc".into(), letters: 3 },
                Token { surface: "abcdefg".into(), letters: 7 },
                Token { surface: "abcd".into(), letters: 4 },
            ],
        };
        assert_eq!(hit_rate(&para, 14), 1.0);
        assert_eq!(hit_rate(&para, 3 + 4), 0.5);
        assert_eq!(hit_rate(&para, 0), 0.0);
        assert_eq!(hit_rate(&Paragraph::new(0, "—"), 0), 0.0);
    }

    #[test]
    fn filter_examples() {
        let links = vec![link(0, 0), link(1, 1)];
        let rates = HitRates {
            src: vec![1.0, 0.2],
            tgt: vec![1.0, 0.9],
        };
        let none = filter_nodes(&links, &rates, 0.0);
        assert_eq!(none.links, links);
        assert!(none.dropped_src.is_empty() && none.dropped_tgt.is_empty());

        let f = filter_nodes(&links, &rates, 0.3);
        assert_eq!(f.links, vec![link(0, 0)]);
        assert_eq!(f.dropped_src, vec![1]);
        assert!(f.dropped_tgt.is_empty());

        let strict = filter_nodes(&links, &rates, 1.0);
        assert_eq!(strict.links, vec![link(0, 0)]);
        assert_eq!(strict.dropped_src, vec![1]);
        assert_eq!(strict.dropped_tgt, vec![1]);
    }

    #[test]
    fn threshold_equal_to_rate_survives() {
        let rates = HitRates {
            src: vec![0.3],
            tgt: vec![0.3],
        };
        assert_eq!(filter_nodes(&[link(0, 0)], &rates, 0.3).links.len(), 1);
    }

    #[test]
    fn component_examples() {
        assert_eq!(connected_components(&[link(0, 0), link(0, 1)], 1, 2), vec![comp(&[0], &[0, 1])]);
        assert_eq!(
            connected_components(&[link(0, 0), link(1, 1)], 2, 2),
            vec![comp(&[0], &[0]), comp(&[1], &[1])]
        );
        assert!(connected_components(&[], 3, 3).is_empty());
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(
            canonicalize_groups(&[comp(&[0], &[0, 1]), comp(&[1], &[2])], 2, 3),
            vec![span(0..1, 0..2), span(1..2, 2..3)]
        );
        assert_eq!(
            canonicalize_groups(&[comp(&[0], &[1]), comp(&[1], &[0])], 2, 2),
            vec![span(0..2, 0..2)]
        );
        // x1 has no link but sits between x0 and x2 of the same component.
        assert_eq!(canonicalize_groups(&[comp(&[0, 2], &[0])], 3, 1), vec![span(0..3, 0..1)]);
    }

    #[test]
    fn canonical_merges_chains() {
        // a overlaps b on the target side, b crosses c.
        let comps = [comp(&[0], &[0, 1]), comp(&[1], &[1]), comp(&[2], &[3]), comp(&[3], &[2]), comp(&[4], &[4])];
        assert_eq!(
            canonicalize_groups(&comps, 5, 5),
            vec![span(0..2, 0..2), span(2..4, 2..4), span(4..5, 4..5)]
        );
    }

    #[test]
    fn identity_alignment() {
        let d = doc(&["The Council met.", "It adopted the agenda.", "The meeting rose."]);
        let r = align_documents(&d, &d, DEFAULT_DROP_THRESHOLD).unwrap();
        assert_eq!(r.groups.len(), 3);
        for (i, g) in r.groups.iter().enumerate() {
            assert_eq!(g.src_range, i..i + 1);
            assert_eq!(g.tgt_range, i..i + 1);
            assert_eq!(g.min_hit_rate(), 1.0);
        }
        assert!(r.dropped_src.is_empty() && r.dropped_tgt.is_empty());
    }

    #[test]
    fn split_paragraph_groups() {
        let src = doc(&[
            "Opening of the session.",
            "Election of officers.",
            "The Committee considered the report and adopted the draft resolution without a vote.",
            "Closing of the session.",
        ]);
        let tgt = doc(&[
            "Opening of the session.",
            "Election of officers.",
            "The Committee considered the report",
            "and adopted the draft resolution without a vote.",
            "Closing of the session.",
        ]);
        let r = align_documents(&src, &tgt, DEFAULT_DROP_THRESHOLD).unwrap();
        let shapes: Vec<_> = r.groups.iter().map(|g| (g.src_range.clone(), g.tgt_range.clone())).collect();
        assert_eq!(shapes, vec![(0..1, 0..1), (1..2, 1..2), (2..3, 2..4), (3..4, 4..5)]);
        assert_eq!(
            r.groups[2].merged_tgt_text,
            "The Committee considered the report\nand adopted the draft resolution without a vote."
        );
    }

    #[test]
    fn gibberish_paragraph_dropped() {
        let src = doc(&[
            "Opening of the session.",
            "xqzvy blorft the wuggle snarp plimtrox vandok",
            "Election of officers.",
        ]);
        let tgt = doc(&["Opening of the session.", "Election of officers."]);
        let r = align_documents(&src, &tgt, DEFAULT_DROP_THRESHOLD).unwrap();
        assert_eq!(r.dropped_src, vec![1]);
        assert!(r.hit_rates.src[1] < 0.3);
        assert_eq!(r.groups.len(), 2);
    }

    #[test]
    fn empty_document_rejected() {
        let d = doc(&["Text."]);
        let empty = doc(&[]);
        assert_eq!(
            align_documents(&empty, &d, 0.3),
            Err(AlignError::EmptyDocument { side: Side::Source })
        );
        assert_eq!(
            align_documents(&d, &empty, 0.3),
            Err(AlignError::EmptyDocument { side: Side::Target })
        );
        assert!(matches!(align_documents(&d, &d, 1.5), Err(AlignError::InvalidThreshold(_))));
    }

    #[test]
    fn zero_letter_paragraph_dropped_when_threshold_positive() {
        let src = doc(&["Opening of the session.", "12 345", "Closing."]);
        let tgt = doc(&["Opening of the session.", "Closing."]);
        let r = align_documents(&src, &tgt, 0.1).unwrap();
        assert_eq!(r.hit_rates.src[1], 0.0);
        assert_eq!(r.dropped_src, vec![1]);
    }

    #[test]
    fn source_texts_replaced_by_original() {
        let original = Document::from_paragraphs("S/1", "fr", &["Ouverture.", "Clôture."]);
        let translated = doc(&["Opening.", "Closing."]);
        let r = align_documents(&translated, &translated, 0.3)
            .unwrap()
            .with_source_texts(&original)
            .unwrap();
        assert_eq!(r.groups[1].merged_src_text, "Clôture.");
        assert_eq!(r.groups[1].merged_tgt_text, "Closing.");
    }

    #[test]
    fn serialization_is_deterministic() {
        let src = doc(&["The Council met.", "It adopted the agenda and the report."]);
        let tgt = doc(&["The Council met and adopted", "the agenda and the report."]);
        let a = serde_json::to_string(&align_documents(&src, &tgt, 0.3).unwrap()).unwrap();
        let b = serde_json::to_string(&align_documents(&src, &tgt, 0.3).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
