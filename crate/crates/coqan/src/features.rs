//! Writing-characteristic features and per-block layout vectors.
//!
//! The 48 writing features cover picture metadata, character/word counts,
//! part-of-speech tallies, title statistics, block-type counts, and the
//! article category. Indices follow the fixed 1-based catalog order, with
//! [`FeatureRecord::get`] taking the 1-based index. Ratios whose
//! denominator is zero are 0 by convention. Counts are order-free: any
//! permutation of the block sequence yields the same record, which is what
//! the order-disturbance experiment relies on.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::article::{ArticleDocument, BlockKind, ContentBlock, MAX_BLOCKS};
use crate::lexicon::{self, Pos, Token};

pub const FEATURE_COUNT: usize = 48;
pub const LAYOUT_DIM: usize = 13;
/// Reference viewport height used to scale block heights.
pub const VIEWPORT_PX: f64 = 800.0;
pub const KEYWORD_COUNT: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature fit: empty record list")]
    EmptyRecords,
    #[error("feature fit: empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    values: [f64; FEATURE_COUNT],
}

impl FeatureRecord {
    pub fn from_values(values: [f64; FEATURE_COUNT]) -> Self {
        FeatureRecord { values }
    }

    /// Value of a 1-based feature index.
    pub fn get(&self, index: usize) -> f64 {
        assert!(
            (1..=FEATURE_COUNT).contains(&index),
            "feature index {} outside 1..={}",
            index,
            FEATURE_COUNT
        );
        self.values[index - 1]
    }

    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.values
    }
}

fn ratio(num: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        0.0
    } else {
        num / denom
    }
}

fn char_count(text: &str) -> usize {
    text.chars().filter(|c| !c.is_whitespace()).count()
}

#[derive(Default)]
struct TextStats {
    chars: usize,
    unique_chars: BTreeSet<char>,
    words: Vec<(String, Pos)>,
    puncts: usize,
    stopword_words: usize,
    stopword_chars: usize,
}

impl TextStats {
    fn absorb(&mut self, text: &str) {
        self.chars += char_count(text);
        self.unique_chars
            .extend(text.chars().filter(|c| !c.is_whitespace()));
        for token in lexicon::segment(text) {
            match token {
                Token::Word { text, pos } => {
                    if lexicon::is_stopword(&text) {
                        self.stopword_words += 1;
                        self.stopword_chars += text.chars().count();
                    }
                    self.words.push((text, pos));
                }
                Token::Punct(_) => self.puncts += 1,
            }
        }
    }

    fn pos_count(&self, pos: Pos) -> usize {
        self.words.iter().filter(|(_, p)| *p == pos).count()
    }

    fn unique_words(&self) -> usize {
        self.words
            .iter()
            .map(|(w, _)| w.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Computes writing features; holds the corpus keyword list that title
/// features 28 and 29 count against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    keywords: BTreeSet<String>,
}

impl FeatureExtractor {
    pub fn with_keywords(keywords: Vec<String>) -> Self {
        FeatureExtractor {
            keywords: keywords.into_iter().collect(),
        }
    }

    /// Pick the [`KEYWORD_COUNT`] highest-scoring non-stopword terms over
    /// the corpus, scoring each term by total count times ln(N / doc
    /// frequency); ties break lexicographically.
    pub fn fit(docs: &[ArticleDocument]) -> Result<Self, FeatureError> {
        if docs.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut term_count: BTreeMap<String, usize> = BTreeMap::new();
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let mut in_doc: BTreeSet<String> = BTreeSet::new();
            let mut texts = vec![doc.title.as_str()];
            texts.extend(
                doc.blocks
                    .iter()
                    .filter(|b| b.kind.is_text())
                    .map(|b| b.text.as_str()),
            );
            for text in texts {
                for word in lexicon::words(text) {
                    if lexicon::is_stopword(&word) {
                        continue;
                    }
                    *term_count.entry(word.clone()).or_insert(0) += 1;
                    in_doc.insert(word);
                }
            }
            for word in in_doc {
                *doc_freq.entry(word).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let mut scored: Vec<(f64, String)> = term_count
            .into_iter()
            .map(|(term, count)| {
                let df = doc_freq[&term] as f64;
                (count as f64 * (n / df).ln(), term)
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        Ok(FeatureExtractor {
            keywords: scored
                .into_iter()
                .take(KEYWORD_COUNT)
                .map(|(_, term)| term)
                .collect(),
        })
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|s| s.as_str())
    }

    /// All 48 writing features of a parsed document.
    pub fn extract(&self, doc: &ArticleDocument) -> FeatureRecord {
        let images: Vec<&ContentBlock> = doc
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Image)
            .collect();
        let videos = doc
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Video)
            .count();
        let paragraphs = doc
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Paragraph)
            .count();

        let mut body = TextStats::default();
        for block in doc.blocks.iter().filter(|b| b.kind.is_text()) {
            body.absorb(&block.text);
        }
        let mut title = TextStats::default();
        title.absorb(&doc.title);

        let max_ocr = images.iter().map(|b| b.ocr_char_count).max().unwrap_or(0);
        let max_text_area = images
            .iter()
            .map(|b| b.text_area_frac)
            .fold(0.0, f64::max);
        let valid_pictures = images
            .iter()
            .filter(|b| !b.is_template_image && b.text_area_frac < 0.5)
            .count();
        let pictures_with_text = images.iter().filter(|b| b.ocr_char_count > 0).count();
        let template_pictures = images.iter().filter(|b| b.is_template_image).count();
        let ocr_total: u32 = images.iter().map(|b| b.ocr_char_count).sum();

        let body_words = body.words.len() as f64;
        let body_chars = body.chars as f64;
        let title_chars = title.chars as f64;
        let title_words = title.words.len() as f64;
        let title_keywords = title
            .words
            .iter()
            .filter(|(w, _)| self.keywords.contains(w))
            .count() as f64;
        let pictures = images.len() as f64;
        let gif_count = 0.0;

        let mut v = [0.0; FEATURE_COUNT];
        v[0] = max_ocr as f64;
        v[1] = max_text_area;
        v[2] = valid_pictures as f64;
        v[3] = ratio(pictures_with_text as f64, pictures);
        v[4] = template_pictures as f64;
        v[5] = body_chars + ocr_total as f64;
        v[6] = pictures_with_text as f64;
        v[7] = body_words;
        v[8] = body_chars - body.stopword_chars as f64;
        v[9] = body_chars;
        v[10] = body.unique_chars.len() as f64;
        v[11] = body_words - body.stopword_words as f64;
        v[12] = body.unique_words() as f64;
        v[13] = ratio(v[10], body_chars);
        v[14] = ratio(v[12], body_words);
        v[15] = body.puncts as f64;
        v[16] = body.pos_count(Pos::Noun) as f64;
        v[17] = body.pos_count(Pos::Verb) as f64;
        v[18] = body.pos_count(Pos::Adjective) as f64;
        v[19] = ratio(v[15], body_chars);
        v[20] = ratio(v[16], body_words);
        v[21] = ratio(v[17], body_words);
        v[22] = ratio(v[18], body_words);
        v[23] = title_chars;
        v[24] = title_chars - title.stopword_chars as f64;
        v[25] = ratio(v[24], title_chars);
        v[26] = title_words;
        v[27] = title_keywords;
        v[28] = ratio(title_keywords, title_words);
        v[29] = ratio(pictures, body_words);
        v[30] = gif_count;
        v[31] = pictures - gif_count;
        v[32] = pictures;
        v[33] = videos as f64;
        v[34] = paragraphs as f64;
        v[35] = body.pos_count(Pos::Conjunction) as f64;
        v[36] = body.pos_count(Pos::Pronoun) as f64;
        v[37] = body.pos_count(Pos::Adverb) as f64;
        v[38] = body.pos_count(Pos::Numeral) as f64;
        v[39] = body.pos_count(Pos::Auxiliary) as f64;
        v[40] = body.pos_count(Pos::Idiom) as f64;
        v[41] = ratio(paragraphs as f64, pictures);
        v[42] = ratio(v[35], body_words);
        v[43] = ratio(v[37], body_words);
        v[44] = ratio(v[38], body_words);
        v[45] = ratio(v[39], body_words);
        v[46] = ratio(v[40], body_words);
        v[47] = doc.category as f64;
        FeatureRecord { values: v }
    }
}

/// One 13-dimensional vector per block, in ordinal order, truncated to
/// [`MAX_BLOCKS`]. Heights scale by the viewport, offsets by the page
/// height, and text/character counts enter as log1p.
pub fn extract_layout_vectors(doc: &ArticleDocument) -> Vec<Vec<f64>> {
    let count = doc.blocks.len().min(MAX_BLOCKS);
    let blocks = &doc.blocks[..count];
    let page_height = blocks
        .iter()
        .map(|b| b.top_offset_px + b.height_px)
        .fold(0.0, f64::max)
        .max(1.0);
    blocks
        .iter()
        .map(|b| {
            let mut v = vec![0.0; LAYOUT_DIM];
            v[b.kind.index()] = 1.0;
            v[4] = b.ordinal as f64 / count as f64;
            v[5] = b.height_px / VIEWPORT_PX;
            v[6] = b.top_offset_px / page_height;
            v[7] = (char_count(&b.text) as f64).ln_1p();
            v[8] = b.aspect_ratio;
            v[9] = if b.is_template_image { 1.0 } else { 0.0 };
            v[10] = (b.ocr_char_count as f64).ln_1p();
            v[11] = b.text_area_frac;
            v[12] = b.width_frac;
            v
        })
        .collect()
}

/// Per-feature z-score statistics, fit on the training split only. The
/// categorical feature 48 passes through untouched, as does any feature
/// whose standard deviation is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

pub fn fit_norm_stats(records: &[FeatureRecord]) -> Result<NormStats, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::EmptyRecords);
    }
    let n = records.len() as f64;
    let mut mean = vec![0.0; FEATURE_COUNT];
    let mut std = vec![0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        let m = records.iter().map(|r| r.values[i]).sum::<f64>() / n;
        let var = records
            .iter()
            .map(|r| (r.values[i] - m) * (r.values[i] - m))
            .sum::<f64>()
            / n;
        mean[i] = m;
        std[i] = var.sqrt();
    }
    Ok(NormStats { mean, std })
}

pub fn apply_norm(record: &FeatureRecord, stats: &NormStats) -> FeatureRecord {
    let mut values = record.values;
    for i in 0..FEATURE_COUNT - 1 {
        if stats.std[i] > 0.0 {
            values[i] = (values[i] - stats.mean[i]) / stats.std[i];
        }
    }
    FeatureRecord { values }
}

pub fn csv_header() -> String {
    let mut cols = vec!["id".to_string(), "label".to_string()];
    cols.extend((1..=FEATURE_COUNT).map(|i| format!("feat_{:02}", i)));
    cols.join(",")
}

pub fn csv_row(doc: &ArticleDocument, record: &FeatureRecord) -> String {
    let label = doc.label.map(|l| l.to_string()).unwrap_or_default();
    let mut cols = vec![doc.id.clone(), label];
    cols.extend(record.values.iter().map(|v| format!("{}", v)));
    cols.join(",")
}
