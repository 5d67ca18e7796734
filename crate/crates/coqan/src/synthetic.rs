//! Seeded synthetic corpora with controllable, channel-specific signals.
//!
//! Each corpus kind plants its label in exactly one input channel (or, for
//! the mixed kind, noisy copies in all three), so a model family can be
//! probed for whether it reads that channel at all:
//!
//! - `layout-signal`: positives interleave paragraphs, images, and template
//!   section markers; negatives hold the same blocks with media clumped at
//!   the end. Each positive/negative pair shares one block multiset and one
//!   paragraph order, so writing features and the sentence sequence are
//!   identical within a pair and only the block arrangement separates the
//!   classes.
//! - `feature-signal`: positives are long, paragraph-rich articles with
//!   clean pictures; negatives are thin articles whose pictures are mostly
//!   embedded text. The contrast lives in order-free writing features.
//! - `text-signal`: positives open with a fixed greeting sentence and close
//!   with a fixed sign-off; negatives scramble the same sentences so both
//!   cues leave their positions. All sentences have equal character length
//!   and uniform block geometry, so each pair has identical writing
//!   features, identical per-block layout vectors, and identical unigram
//!   histograms; only sentence order separates the classes.
//! - `mixed`: every document carries all three cues, each flipped
//!   independently with its own noise rate, for fusion and ablation
//!   studies. Section arrangement (paragraph-image-marker vs
//!   paragraph-marker-image) encodes the layout cue, the category field the
//!   feature cue, and greeting/sign-off placement the text cue.
//!
//! Generation is a pure function of (kind, size, seed): the same arguments
//! reproduce the same corpus byte for byte.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::article::{reflow_blocks, ArticleDocument, BlockKind, ContentBlock};

/// Greeting sentence that opens every text-signal positive.
pub const OPENER: &str = "欢迎阅读本期专栏。";
/// Sign-off sentence that closes every text-signal positive.
pub const CLOSER: &str = "感谢收看下期再见。";

const PARAGRAPH_HEIGHT: f64 = 120.0;
const IMAGE_HEIGHT: f64 = 300.0;
const MARKER_HEIGHT: f64 = 30.0;
const CATEGORY_POOL: u32 = 4;

/// Sections per mixed-corpus document; the layout cue is the count of
/// sections in canonical order.
pub const MIXED_SECTIONS: usize = 4;
/// Chance that one mixed-corpus section keeps canonical order when the
/// label says it should (and breaks it when the label says it should not).
pub const MIXED_LAYOUT_FIDELITY: f64 = 0.85;
/// Chance that the mixed-corpus category field agrees with the label.
pub const MIXED_CATEGORY_FIDELITY: f64 = 0.8;
/// Chance that each of the two mixed-corpus text cues (greeting first,
/// sign-off last) agrees with the label.
pub const MIXED_TEXT_FIDELITY: f64 = 0.8;

/// Two-character dictionary words used to assemble body sentences.
const WORD_POOL: &[&str] = &[
    "文章", "标题", "内容", "图片", "视频", "作者", "读者", "时间", "地方", "世界",
    "中国", "问题", "方法", "质量", "新闻", "故事", "知识", "生活", "工作", "城市",
    "孩子", "朋友", "老师", "学生", "公司", "手机", "电脑", "音乐", "电影", "健康",
    "历史", "文化", "经济", "科技", "知道", "喜欢", "觉得", "发现", "使用", "需要",
    "提供", "介绍", "分享", "阅读", "读书", "开始", "结束", "成为", "变得", "希望",
    "相信", "研究", "讨论", "展示", "描述", "记录", "优秀", "重要", "简单", "复杂",
    "漂亮", "聪明", "有趣", "精彩", "丰富", "清晰", "深刻", "独特", "完整", "真实",
    "生动", "严谨",
];

const IDIOM_POOL: &[&str] = &[
    "画龙点睛", "栩栩如生", "引人入胜", "深入浅出", "一目了然", "言简意赅",
    "旁征博引", "字字珠玑", "精益求精", "温故知新", "举一反三", "融会贯通",
];

const FILLER_POOL: &[&str] = &["的", "了", "是", "和", "都", "也", "就", "这", "那", "有"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    LayoutSignal,
    FeatureSignal,
    TextSignal,
    Mixed,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 4] = [
        CorpusKind::LayoutSignal,
        CorpusKind::FeatureSignal,
        CorpusKind::TextSignal,
        CorpusKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorpusKind::LayoutSignal => "layout-signal",
            CorpusKind::FeatureSignal => "feature-signal",
            CorpusKind::TextSignal => "text-signal",
            CorpusKind::Mixed => "mixed",
        }
    }

    pub fn parse(name: &str) -> Result<CorpusKind, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown corpus kind {:?}; known kinds: {}", name, known.join(", "))
            })
    }
}

/// Build a corpus of `size` labeled articles. Labels are balanced: paired
/// kinds emit positive/negative pairs adjacently, unpaired kinds alternate
/// labels, so any even `size` splits size/2 per class.
pub fn generate(kind: CorpusKind, size: usize, seed: u64) -> Vec<ArticleDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(size);
    match kind {
        CorpusKind::LayoutSignal => {
            while docs.len() < size {
                let (pos, neg) = layout_pair(docs.len(), &mut rng);
                docs.push(pos);
                docs.push(neg);
            }
        }
        CorpusKind::TextSignal => {
            while docs.len() < size {
                let (pos, neg) = text_pair(docs.len(), &mut rng);
                docs.push(pos);
                docs.push(neg);
            }
        }
        CorpusKind::FeatureSignal => {
            for i in 0..size {
                let label = (i % 2 == 0) as u8;
                docs.push(feature_doc(i, label, &mut rng));
            }
        }
        CorpusKind::Mixed => {
            for i in 0..size {
                let label = (i % 2 == 0) as u8;
                docs.push(mixed_doc(i, label, &mut rng));
            }
        }
    }
    docs.truncate(size);
    docs
}

fn doc_id(kind: CorpusKind, index: usize) -> String {
    format!("{}-{:05}", kind.name(), index)
}

fn paragraph_block(text: &str, height: f64) -> ContentBlock {
    ContentBlock {
        kind: BlockKind::Paragraph,
        ordinal: 0,
        height_px: height,
        width_frac: 1.0,
        top_offset_px: 0.0,
        text: text.to_string(),
        ocr_char_count: 0,
        text_area_frac: 0.0,
        is_template_image: false,
        aspect_ratio: 0.0,
    }
}

fn image_block(height: f64, ocr: u32, area: f64) -> ContentBlock {
    ContentBlock {
        kind: BlockKind::Image,
        ordinal: 0,
        height_px: height,
        width_frac: 1.0,
        top_offset_px: 0.0,
        text: String::new(),
        ocr_char_count: ocr,
        text_area_frac: area,
        is_template_image: false,
        aspect_ratio: 1.5,
    }
}

fn marker_block() -> ContentBlock {
    ContentBlock {
        kind: BlockKind::Image,
        ordinal: 0,
        height_px: MARKER_HEIGHT,
        width_frac: 1.0,
        top_offset_px: 0.0,
        text: String::new(),
        ocr_char_count: 0,
        text_area_frac: 0.0,
        is_template_image: true,
        aspect_ratio: 8.0,
    }
}

fn assemble(id: String, title: String, category: u32, label: u8, mut blocks: Vec<ContentBlock>) -> ArticleDocument {
    reflow_blocks(&mut blocks);
    ArticleDocument {
        id,
        title,
        category,
        label: Some(label),
        blocks,
        sentences: vec![],
        tokens: vec![],
    }
}

fn pick<'a>(pool: &[&'a str], rng: &mut ChaCha8Rng) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// A sentence of `words` dictionary words plus a terminator.
fn sentence(words: usize, rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for _ in 0..words {
        s.push_str(pick(WORD_POOL, rng));
    }
    s.push('。');
    s
}

/// Fixed-width sentence: four two-character words, nine characters total,
/// the same length as [`OPENER`] and [`CLOSER`].
fn sentence_fixed(rng: &mut ChaCha8Rng) -> String {
    sentence(4, rng)
}

fn title(words: usize, rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    for _ in 0..words {
        s.push_str(pick(WORD_POOL, rng));
    }
    s
}

/// Block-kind fingerprint of an arrangement: the visual pattern a reader
/// sees, ignoring texts and sizes.
fn kind_pattern(blocks: &[ContentBlock]) -> Vec<(BlockKind, bool)> {
    blocks.iter().map(|b| (b.kind, b.is_template_image)).collect()
}

/// One positive/negative pair sharing blocks, texts, title, and category;
/// the positive interleaves sections as paragraph-image-marker, the
/// negative arranges the same blocks in a uniformly random non-canonical
/// order. A random block shuffle of a positive therefore lands squarely in
/// the negative class's arrangement distribution.
fn layout_pair(first_index: usize, rng: &mut ChaCha8Rng) -> (ArticleDocument, ArticleDocument) {
    let kind = CorpusKind::LayoutSignal;
    let sections = rng.gen_range(2..=4usize);
    let shared_title = title(3, rng);
    let category = rng.gen_range(0..CATEGORY_POOL);

    let mut pos_blocks = Vec::with_capacity(3 * sections);
    for _ in 0..sections {
        let words = rng.gen_range(3..=6usize);
        let height = rng.gen_range(100.0..160.0);
        pos_blocks.push(paragraph_block(&sentence(words, rng), height));
        pos_blocks.push(image_block(rng.gen_range(240.0..360.0), 0, 0.0));
        pos_blocks.push(marker_block());
    }

    let canonical = kind_pattern(&pos_blocks);
    let neg_blocks = loop {
        let mut p = pos_blocks.clone();
        p.shuffle(rng);
        if kind_pattern(&p) != canonical {
            break p;
        }
    };

    let pos = assemble(doc_id(kind, first_index), shared_title.clone(), category, 1, pos_blocks);
    let neg = assemble(doc_id(kind, first_index + 1), shared_title, category, 0, neg_blocks);
    (pos, neg)
}

/// One positive/negative pair over the same sentence multiset: the positive
/// keeps the greeting first and the sign-off last, the negative permutes
/// the sentences until both cues have left their positions.
fn text_pair(first_index: usize, rng: &mut ChaCha8Rng) -> (ArticleDocument, ArticleDocument) {
    let kind = CorpusKind::TextSignal;
    let body_count = rng.gen_range(3..=5usize);
    let shared_title = title(3, rng);
    let category = rng.gen_range(0..CATEGORY_POOL);

    let mut ordered = Vec::with_capacity(body_count + 2);
    ordered.push(OPENER.to_string());
    for _ in 0..body_count {
        ordered.push(sentence_fixed(rng));
    }
    ordered.push(CLOSER.to_string());

    let scrambled = loop {
        let mut p = ordered.clone();
        p.shuffle(rng);
        if p[0] != OPENER && p[p.len() - 1] != CLOSER {
            break p;
        }
    };

    let blocks_of = |sentences: &[String]| -> Vec<ContentBlock> {
        sentences
            .iter()
            .map(|s| paragraph_block(s, PARAGRAPH_HEIGHT))
            .collect()
    };

    let pos = assemble(
        doc_id(kind, first_index),
        shared_title.clone(),
        category,
        1,
        blocks_of(&ordered),
    );
    let neg = assemble(
        doc_id(kind, first_index + 1),
        shared_title,
        category,
        0,
        blocks_of(&scrambled),
    );
    (pos, neg)
}

/// Positives: many paragraphs of idiom-seasoned prose and a couple of clean
/// pictures. Negatives: one or two filler-heavy lines and a stack of
/// pictures that are mostly embedded text.
fn feature_doc(index: usize, label: u8, rng: &mut ChaCha8Rng) -> ArticleDocument {
    let kind = CorpusKind::FeatureSignal;
    let doc_title = title(rng.gen_range(2..=4usize), rng);
    let category = rng.gen_range(0..CATEGORY_POOL);
    let mut blocks = Vec::new();
    if label == 1 {
        let paragraphs = rng.gen_range(6..=8usize);
        for _ in 0..paragraphs {
            let mut text = String::new();
            for _ in 0..rng.gen_range(2..=3usize) {
                let mut s = String::new();
                for _ in 0..rng.gen_range(4..=6usize) {
                    s.push_str(pick(WORD_POOL, rng));
                }
                if rng.gen_bool(0.5) {
                    s.push_str(pick(IDIOM_POOL, rng));
                }
                s.push('。');
                text.push_str(&s);
            }
            blocks.push(paragraph_block(&text, rng.gen_range(100.0..160.0)));
        }
        for _ in 0..rng.gen_range(1..=2usize) {
            blocks.push(image_block(rng.gen_range(240.0..360.0), 0, rng.gen_range(0.0..0.1)));
        }
    } else {
        let paragraphs = rng.gen_range(1..=2usize);
        for _ in 0..paragraphs {
            let mut s = String::new();
            for _ in 0..rng.gen_range(2..=3usize) {
                s.push_str(pick(WORD_POOL, rng));
                s.push_str(pick(FILLER_POOL, rng));
            }
            s.push('。');
            blocks.push(paragraph_block(&s, rng.gen_range(100.0..160.0)));
        }
        for _ in 0..rng.gen_range(4..=6usize) {
            let ocr = rng.gen_range(60..=160u32);
            let area = rng.gen_range(0.55..0.85);
            blocks.push(image_block(rng.gen_range(240.0..360.0), ocr, area));
        }
    }
    assemble(doc_id(kind, index), doc_title, category, label, blocks)
}

/// Pick slots for the greeting and sign-off among `n` paragraph positions,
/// honoring each cue bit, never putting both in one slot.
fn place_cues(n: usize, opener_first: bool, closer_last: bool, rng: &mut ChaCha8Rng) -> (usize, usize) {
    loop {
        let opener_at = if opener_first { 0 } else { rng.gen_range(1..n) };
        let closer_at = if closer_last { n - 1 } else { rng.gen_range(0..n - 1) };
        if opener_at != closer_at {
            return (opener_at, closer_at);
        }
    }
}

/// One document carrying all three signal channels, each agreeing with the
/// label only at its fidelity rate. Block multiset, geometry, sentence
/// lengths, and paragraph count are constant across the corpus, so each
/// channel is visible to exactly one subnetwork.
fn mixed_doc(index: usize, label: u8, rng: &mut ChaCha8Rng) -> ArticleDocument {
    let kind = CorpusKind::Mixed;
    let doc_title = title(3, rng);
    let truthy = label == 1;

    let category_cue = rng.gen_bool(MIXED_CATEGORY_FIDELITY);
    let category = u32::from(truthy == category_cue);

    let opener_first = rng.gen_bool(if truthy { MIXED_TEXT_FIDELITY } else { 1.0 - MIXED_TEXT_FIDELITY });
    let closer_last = rng.gen_bool(if truthy { MIXED_TEXT_FIDELITY } else { 1.0 - MIXED_TEXT_FIDELITY });
    let (opener_at, closer_at) = place_cues(MIXED_SECTIONS, opener_first, closer_last, rng);
    let mut sentences = vec![String::new(); MIXED_SECTIONS];
    sentences[opener_at] = OPENER.to_string();
    sentences[closer_at] = CLOSER.to_string();
    for slot in sentences.iter_mut() {
        if slot.is_empty() {
            *slot = sentence_fixed(rng);
        }
    }

    let mut blocks = Vec::with_capacity(3 * MIXED_SECTIONS);
    for text in &sentences {
        let canonical = rng.gen_bool(if truthy {
            MIXED_LAYOUT_FIDELITY
        } else {
            1.0 - MIXED_LAYOUT_FIDELITY
        });
        let p = paragraph_block(text, PARAGRAPH_HEIGHT);
        let i = image_block(IMAGE_HEIGHT, 0, 0.0);
        let m = marker_block();
        if canonical {
            blocks.extend([p, i, m]);
        } else {
            blocks.extend([p, m, i]);
        }
    }
    assemble(doc_id(kind, index), doc_title, category, label, blocks)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::article::{parse_article, serialize_article, split_sentences, tokenize_text};
    use crate::features::{extract_layout_vectors, FeatureExtractor};

    fn label_counts(docs: &[ArticleDocument]) -> (usize, usize) {
        let pos = docs.iter().filter(|d| d.label == Some(1)).count();
        (pos, docs.len() - pos)
    }

    fn unigram_histogram(doc: &ArticleDocument) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for token in tokenize_text(&doc.title) {
            *hist.entry(token).or_insert(0) += 1;
        }
        for block in &doc.blocks {
            for token in tokenize_text(&block.text) {
                *hist.entry(token).or_insert(0) += 1;
            }
        }
        hist
    }

    #[test]
    fn all_kinds_emit_balanced_labels() {
        for kind in CorpusKind::ALL {
            let docs = generate(kind, 100, 3);
            assert_eq!(docs.len(), 100);
            assert_eq!(label_counts(&docs), (50, 50), "{}", kind.name());
        }
        let big = generate(CorpusKind::LayoutSignal, 1000, 3);
        assert_eq!(label_counts(&big), (500, 500));
    }

    #[test]
    fn same_seed_reproduces_identical_bytes() {
        for kind in CorpusKind::ALL {
            let a: Vec<String> = generate(kind, 40, 9).iter().map(serialize_article).collect();
            let b: Vec<String> = generate(kind, 40, 9).iter().map(serialize_article).collect();
            assert_eq!(a, b, "{}", kind.name());
            let c: Vec<String> = generate(kind, 40, 10).iter().map(serialize_article).collect();
            assert_ne!(a, c, "{}", kind.name());
        }
    }

    #[test]
    fn generated_documents_survive_parsing_and_validation() {
        for kind in CorpusKind::ALL {
            for doc in generate(kind, 20, 5) {
                let parsed = parse_article(&serialize_article(&doc)).expect(kind.name());
                assert_eq!(parsed.blocks.len(), doc.blocks.len());
            }
        }
    }

    #[test]
    fn kind_names_round_trip_and_unknown_is_rejected() {
        for kind in CorpusKind::ALL {
            assert_eq!(CorpusKind::parse(kind.name()).unwrap(), kind);
        }
        let err = CorpusKind::parse("layout").unwrap_err();
        assert!(err.contains("unknown corpus kind"), "{}", err);
        assert!(err.contains("layout-signal"), "{}", err);
    }

    #[test]
    fn layout_pairs_differ_only_in_arrangement() {
        let docs = generate(CorpusKind::LayoutSignal, 60, 11);
        let extractor = FeatureExtractor::default();
        for pair in docs.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            assert_eq!(pos.label, Some(1));
            assert_eq!(neg.label, Some(0));
            assert_eq!(extractor.extract(pos), extractor.extract(neg));

            let mut pos_sent = pos.clone();
            let mut neg_sent = neg.clone();
            split_sentences(&mut pos_sent, 32);
            split_sentences(&mut neg_sent, 32);
            let mut pos_multiset = pos_sent.sentences.clone();
            let mut neg_multiset = neg_sent.sentences.clone();
            pos_multiset.sort();
            neg_multiset.sort();
            assert_eq!(pos_multiset, neg_multiset);

            assert_ne!(extract_layout_vectors(pos), extract_layout_vectors(neg));
        }
    }

    #[test]
    fn layout_positive_interleaves_and_negative_breaks_the_pattern() {
        let docs = generate(CorpusKind::LayoutSignal, 40, 2);
        for pair in docs.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            let sections = pos.blocks.len() / 3;
            for s in 0..sections {
                assert_eq!(pos.blocks[3 * s].kind, BlockKind::Paragraph);
                assert_eq!(pos.blocks[3 * s + 1].kind, BlockKind::Image);
                assert!(!pos.blocks[3 * s + 1].is_template_image);
                assert!(pos.blocks[3 * s + 2].is_template_image);
            }
            assert_eq!(neg.blocks.len(), pos.blocks.len());
            assert_ne!(kind_pattern(&neg.blocks), kind_pattern(&pos.blocks));

            let key = |b: &ContentBlock| (format!("{:?}", b.kind), b.text.clone(), b.ocr_char_count);
            let mut pos_multiset: Vec<_> = pos.blocks.iter().map(key).collect();
            let mut neg_multiset: Vec<_> = neg.blocks.iter().map(key).collect();
            pos_multiset.sort();
            neg_multiset.sort();
            assert_eq!(pos_multiset, neg_multiset);
        }
    }

    #[test]
    fn text_pairs_have_identical_unigram_histograms() {
        let docs = generate(CorpusKind::TextSignal, 80, 13);
        for pair in docs.chunks(2) {
            assert_eq!(unigram_histogram(&pair[0]), unigram_histogram(&pair[1]));
        }
    }

    #[test]
    fn text_cues_sit_at_the_edges_only_in_positives() {
        let docs = generate(CorpusKind::TextSignal, 80, 29);
        for pair in docs.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            assert_eq!(pos.blocks.first().unwrap().text, OPENER);
            assert_eq!(pos.blocks.last().unwrap().text, CLOSER);
            assert_ne!(neg.blocks.first().unwrap().text, OPENER);
            assert_ne!(neg.blocks.last().unwrap().text, CLOSER);
            assert_eq!(pos.blocks.len(), neg.blocks.len());
        }
    }

    #[test]
    fn text_pairs_are_invisible_to_layout_and_writing_channels() {
        let docs = generate(CorpusKind::TextSignal, 60, 17);
        let extractor = FeatureExtractor::default();
        for pair in docs.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            assert_eq!(extract_layout_vectors(pos), extract_layout_vectors(neg));
            assert_eq!(extractor.extract(pos), extractor.extract(neg));
        }
    }

    #[test]
    fn feature_classes_separate_on_order_free_counts() {
        let docs = generate(CorpusKind::FeatureSignal, 60, 19);
        let extractor = FeatureExtractor::default();
        for doc in &docs {
            let record = extractor.extract(doc);
            let paragraphs = record.get(35);
            let max_ocr = record.get(1);
            if doc.label == Some(1) {
                assert!(paragraphs >= 6.0, "{}", paragraphs);
                assert_eq!(max_ocr, 0.0);
            } else {
                assert!(paragraphs <= 2.0, "{}", paragraphs);
                assert!(max_ocr >= 60.0, "{}", max_ocr);
            }
        }
    }

    #[test]
    fn mixed_geometry_is_constant_and_category_binary() {
        let docs = generate(CorpusKind::Mixed, 100, 23);
        for doc in &docs {
            assert_eq!(doc.blocks.len(), 3 * MIXED_SECTIONS);
            let paragraphs = doc.blocks.iter().filter(|b| b.kind == BlockKind::Paragraph).count();
            let markers = doc.blocks.iter().filter(|b| b.is_template_image).count();
            let plain_images = doc
                .blocks
                .iter()
                .filter(|b| b.kind == BlockKind::Image && !b.is_template_image)
                .count();
            assert_eq!((paragraphs, plain_images, markers), (MIXED_SECTIONS, MIXED_SECTIONS, MIXED_SECTIONS));
            assert!(doc.category <= 1);
            for block in doc.blocks.iter().filter(|b| b.kind == BlockKind::Paragraph) {
                assert_eq!(block.text.chars().count(), 9, "{}", block.text);
            }
        }
    }

    #[test]
    fn mixed_channels_agree_with_labels_at_their_fidelity_rates() {
        let docs = generate(CorpusKind::Mixed, 600, 31);
        let mut category_hits = 0usize;
        let mut opener_hits = 0usize;
        let mut canonical_sections = 0usize;
        for doc in &docs {
            let label = doc.label.unwrap();
            if doc.category == u32::from(label) {
                category_hits += 1;
            }
            let opener_leads = doc
                .blocks
                .iter()
                .find(|b| b.kind == BlockKind::Paragraph)
                .map(|b| b.text == OPENER)
                .unwrap();
            if opener_leads == (label == 1) {
                opener_hits += 1;
            }
            for s in 0..MIXED_SECTIONS {
                let canonical = !doc.blocks[3 * s + 1].is_template_image;
                if canonical == (label == 1) {
                    canonical_sections += 1;
                }
            }
        }
        let n = docs.len() as f64;
        let category_rate = category_hits as f64 / n;
        let opener_rate = opener_hits as f64 / n;
        let layout_rate = canonical_sections as f64 / (n * MIXED_SECTIONS as f64);
        assert!((category_rate - MIXED_CATEGORY_FIDELITY).abs() < 0.06, "{}", category_rate);
        assert!((opener_rate - MIXED_TEXT_FIDELITY).abs() < 0.06, "{}", opener_rate);
        assert!((layout_rate - MIXED_LAYOUT_FIDELITY).abs() < 0.06, "{}", layout_rate);
    }

    #[test]
    fn mixed_paragraph_order_keeps_sentence_sequence_independent_of_layout_cue() {
        let docs = generate(CorpusKind::Mixed, 40, 37);
        for doc in &docs {
            let texts: Vec<&str> = doc
                .blocks
                .iter()
                .filter(|b| b.kind == BlockKind::Paragraph)
                .map(|b| b.text.as_str())
                .collect();
            assert_eq!(texts.len(), MIXED_SECTIONS);
            assert_eq!(texts.iter().filter(|t| **t == OPENER).count(), 1);
            assert_eq!(texts.iter().filter(|t| **t == CLOSER).count(), 1);
        }
    }

    #[test]
    fn odd_sizes_truncate_with_one_extra_positive() {
        let docs = generate(CorpusKind::TextSignal, 7, 41);
        assert_eq!(docs.len(), 7);
        assert_eq!(label_counts(&docs), (4, 3));
    }
}
