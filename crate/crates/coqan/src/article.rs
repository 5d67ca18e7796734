//! Article data model: ingestion, validation, sentence splitting,
//! tokenization, and the corpus vocabulary.
//!
//! The on-disk format is one JSON object per line. Parsing validates the
//! block invariants (dense ordinals, non-decreasing vertical offsets,
//! text/media field conventions) and re-sorts blocks by ordinal; derived
//! fields (sentences, token ids) never appear in the serialized form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const HEAD_ID: usize = 2;
pub const RESERVED_TOKENS: usize = 3;

pub const MAX_BLOCKS: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum ArticleError {
    #[error("article parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("article {id}: {problem}")]
    Validation { id: String, problem: String },
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<ArticleError>,
    },
    #[error("tokenize: vocabulary is empty")]
    EmptyVocabulary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Paragraph,
    Subtitle,
    Image,
    Video,
}

impl BlockKind {
    pub fn is_media(self) -> bool {
        matches!(self, BlockKind::Image | BlockKind::Video)
    }

    pub fn is_text(self) -> bool {
        !self.is_media()
    }

    /// Slot in the one-hot layout encoding.
    pub fn index(self) -> usize {
        match self {
            BlockKind::Paragraph => 0,
            BlockKind::Subtitle => 1,
            BlockKind::Image => 2,
            BlockKind::Video => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub kind: BlockKind,
    pub ordinal: usize,
    pub height_px: f64,
    pub width_frac: f64,
    pub top_offset_px: f64,
    pub text: String,
    pub ocr_char_count: u32,
    pub text_area_frac: f64,
    pub is_template_image: bool,
    pub aspect_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub ids: Vec<usize>,
    /// Count of non-padding positions, including the head marker.
    pub real_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleDocument {
    pub id: String,
    pub title: String,
    pub category: u32,
    pub label: Option<u8>,
    pub blocks: Vec<ContentBlock>,
    #[serde(skip)]
    pub sentences: Vec<String>,
    #[serde(skip)]
    pub tokens: Vec<TokenizedSentence>,
}

impl ArticleDocument {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    fn fail(&self, problem: String) -> ArticleError {
        ArticleError::Validation {
            id: self.id.clone(),
            problem,
        }
    }

    fn validate(&self) -> Result<(), ArticleError> {
        if let Some(l) = self.label {
            if l > 1 {
                return Err(self.fail(format!("label {} outside {{0,1}}", l)));
            }
        }
        let mut seen = vec![false; self.blocks.len()];
        for b in &self.blocks {
            if b.ordinal >= self.blocks.len() {
                return Err(self.fail(format!(
                    "ordinal {} outside 0..{}",
                    b.ordinal,
                    self.blocks.len()
                )));
            }
            if seen[b.ordinal] {
                return Err(self.fail(format!("duplicate ordinal {}", b.ordinal)));
            }
            seen[b.ordinal] = true;
        }
        for b in &self.blocks {
            let at = |field: &str, ok: bool, detail: String| -> Result<(), ArticleError> {
                if ok {
                    Ok(())
                } else {
                    Err(self.fail(format!("block {} field {}: {}", b.ordinal, field, detail)))
                }
            };
            at("height_px", b.height_px >= 0.0, format!("{} < 0", b.height_px))?;
            at("top_offset_px", b.top_offset_px >= 0.0, format!("{} < 0", b.top_offset_px))?;
            at(
                "width_frac",
                (0.0..=1.0).contains(&b.width_frac),
                format!("{} outside [0,1]", b.width_frac),
            )?;
            at(
                "text_area_frac",
                (0.0..=1.0).contains(&b.text_area_frac),
                format!("{} outside [0,1]", b.text_area_frac),
            )?;
            at("aspect_ratio", b.aspect_ratio >= 0.0, format!("{} < 0", b.aspect_ratio))?;
            if b.kind.is_text() {
                at("ocr_char_count", b.ocr_char_count == 0, "nonzero for a text block".into())?;
                at("text_area_frac", b.text_area_frac == 0.0, "nonzero for a text block".into())?;
                at("aspect_ratio", b.aspect_ratio == 0.0, "nonzero for a text block".into())?;
                at(
                    "is_template_image",
                    !b.is_template_image,
                    "set for a text block".into(),
                )?;
            } else {
                at("text", b.text.is_empty(), "non-empty for a media block".into())?;
            }
        }
        Ok(())
    }
}

/// Parse and validate one article record. Blocks come back sorted by
/// ordinal and truncated to [`MAX_BLOCKS`]; unknown JSON fields are
/// ignored.
pub fn parse_article(raw: &str) -> Result<ArticleDocument, ArticleError> {
    let mut doc: ArticleDocument = serde_json::from_str(raw)?;
    doc.validate()?;
    doc.blocks.sort_by_key(|b| b.ordinal);
    for pair in doc.blocks.windows(2) {
        if pair[1].top_offset_px < pair[0].top_offset_px {
            return Err(doc.fail(format!(
                "top_offset_px decreases from block {} to block {}",
                pair[0].ordinal, pair[1].ordinal
            )));
        }
    }
    if doc.blocks.len() > MAX_BLOCKS {
        doc.blocks.truncate(MAX_BLOCKS);
    }
    Ok(doc)
}

/// One-line JSON form of the persistent fields.
pub fn serialize_article(doc: &ArticleDocument) -> String {
    serde_json::to_string(doc).expect("article serializes")
}

pub fn read_corpus(path: &Path) -> Result<Vec<ArticleDocument>, ArticleError> {
    let text = fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_article(line).map_err(|e| ArticleError::Line {
            line: i + 1,
            source: Box::new(e),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: &Path, docs: &[ArticleDocument]) -> Result<(), ArticleError> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serialize_article(doc));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sentence terminators; a newline also ends a sentence but is dropped.
const TERMINATORS: [char; 6] = ['。', '！', '？', '!', '?', '.'];

fn flush_sentence(out: &mut Vec<String>, cur: &mut String) {
    let trimmed = cur.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    cur.clear();
}

/// Rewrite ordinals and top offsets so the blocks form a consistent page
/// in their current sequence order: dense ordinals from zero, cumulative
/// top offsets with a fixed inter-block gap.
pub fn reflow_blocks(blocks: &mut [ContentBlock]) {
    const BLOCK_GAP: f64 = 12.0;
    let mut top = 0.0;
    for (i, b) in blocks.iter_mut().enumerate() {
        b.ordinal = i;
        b.top_offset_px = top;
        top += b.height_px + BLOCK_GAP;
    }
}

pub fn split_body_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch == '\n' {
            flush_sentence(&mut out, &mut cur);
        } else {
            cur.push(ch);
            if TERMINATORS.contains(&ch) {
                flush_sentence(&mut out, &mut cur);
            }
        }
    }
    flush_sentence(&mut out, &mut cur);
    out
}

/// Populate `doc.sentences`: the title first, then the body text of
/// paragraph and subtitle blocks in block order, truncated to
/// `max_sentences`.
pub fn split_sentences(doc: &mut ArticleDocument, max_sentences: usize) {
    assert!(max_sentences >= 1, "need room for the title sentence");
    let mut sentences = vec![doc.title.trim().to_string()];
    for block in &doc.blocks {
        if block.kind.is_text() {
            sentences.extend(split_body_sentences(&block.text));
        }
    }
    sentences.truncate(max_sentences);
    doc.sentences = sentences;
}

/// Break text into tokens: runs of ASCII alphanumerics form one token,
/// every other non-whitespace character is its own token.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            run.push(ch);
        } else {
            if !run.is_empty() {
                tokens.push(std::mem::take(&mut run));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

/// Token table with dense ids and reserved slots for padding, unknown
/// tokens, and the sentence-head marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Build from already-split sentences, keeping tokens that occur at
    /// least `min_freq` times. Ids are assigned in lexicographic token
    /// order, so identical corpora produce identical tables.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Vocabulary {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for sentence in sentences {
            for token in tokenize_text(sentence) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let mut id_to_token = vec!["<pad>".to_string(), "<unk>".to_string(), "<head>".to_string()];
        let mut token_to_id = BTreeMap::new();
        for (token, count) in counts {
            if count >= min_freq {
                token_to_id.insert(token.clone(), id_to_token.len());
                id_to_token.push(token);
            }
        }
        Vocabulary {
            id_to_token,
            token_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() <= RESERVED_TOKENS
    }

    pub fn id_of(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize_text(text).iter().map(|t| self.id_of(t)).collect()
    }
}

/// Populate `doc.tokens`: each sentence becomes the head marker followed
/// by token ids, truncated then padded to exactly `max_tokens` positions.
pub fn tokenize(
    doc: &mut ArticleDocument,
    vocab: &Vocabulary,
    max_tokens: usize,
) -> Result<(), ArticleError> {
    assert!(max_tokens >= 1, "need room for the head marker");
    if vocab.is_empty() {
        return Err(ArticleError::EmptyVocabulary);
    }
    doc.tokens = doc
        .sentences
        .iter()
        .map(|sentence| {
            let mut ids = vec![HEAD_ID];
            ids.extend(vocab.encode(sentence));
            ids.truncate(max_tokens);
            let real_len = ids.len();
            ids.resize(max_tokens, PAD_ID);
            TokenizedSentence { ids, real_len }
        })
        .collect();
    Ok(())
}
