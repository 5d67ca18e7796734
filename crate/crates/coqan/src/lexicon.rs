//! Bundled word lexicon: segmentation, part-of-speech lookup, stopwords.
//!
//! Feature extraction needs corpus-consistent word counts, not linguistic
//! accuracy, so segmentation is greedy longest-match against a fixed table
//! (words up to four characters). ASCII alphanumeric runs form one word
//! each; digit-only runs count as numerals. Characters that are neither
//! alphabetic nor alphanumeric are punctuation, which never counts as a
//! word.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

pub const MAX_WORD_CHARS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Conjunction,
    Pronoun,
    Numeral,
    Auxiliary,
    Idiom,
    Other,
}

const NOUNS: &[&str] = &[
    "文章", "标题", "内容", "图片", "视频", "作者", "读者", "时间", "地方", "世界",
    "中国", "书", "人", "水", "山", "天", "年", "问题", "方法", "质量",
    "新闻", "故事", "知识", "生活", "工作", "城市", "孩子", "朋友", "老师", "学生",
    "公司", "手机", "电脑", "音乐", "电影", "健康", "历史", "文化", "经济", "科技",
];

const VERBS: &[&str] = &[
    "是", "有", "看", "说", "做", "去", "来", "想", "知道", "喜欢",
    "觉得", "发现", "使用", "需要", "提供", "介绍", "分享", "阅读", "读书", "写",
    "吃", "喝", "走", "跑", "学", "教", "买", "卖", "开始", "结束",
    "成为", "变得", "使", "希望", "相信", "研究", "讨论", "展示", "描述", "记录",
];

const ADJECTIVES: &[&str] = &[
    "好", "大", "小", "新", "旧", "高", "低", "长", "短", "多",
    "少", "快", "慢", "美", "优秀", "重要", "简单", "复杂", "漂亮", "聪明",
    "有趣", "精彩", "丰富", "清晰", "深刻", "独特", "完整", "真实", "生动", "严谨",
];

const ADVERBS: &[&str] = &[
    "很", "非常", "十分", "总是", "经常", "已经", "还", "再", "就", "都",
    "也", "更", "最", "才", "刚刚", "逐渐", "慢慢", "仔细", "认真", "确实",
];

const CONJUNCTIONS: &[&str] = &[
    "和", "与", "或", "但是", "而且", "因为", "所以", "如果", "虽然", "并且",
    "或者", "然而", "不过", "于是", "因此", "同时",
];

const PRONOUNS: &[&str] = &[
    "我", "你", "他", "她", "它", "我们", "你们", "他们", "这", "那",
    "大家", "自己", "这里", "那里", "什么", "怎么",
];

const NUMERALS: &[&str] = &[
    "一", "二", "三", "四", "五", "六", "七", "八", "九", "十",
    "百", "千", "万", "零", "两", "几",
];

const AUXILIARIES: &[&str] = &[
    "的", "了", "着", "过", "吗", "呢", "吧", "啊", "得", "地",
];

const IDIOMS: &[&str] = &[
    "画龙点睛", "栩栩如生", "引人入胜", "深入浅出", "一目了然", "言简意赅",
    "旁征博引", "字字珠玑", "胸有成竹", "滴水穿石", "精益求精", "温故知新",
    "举一反三", "脚踏实地", "集思广益", "融会贯通", "百读不厌", "妙笔生花",
];

const STOPWORDS: &[&str] = &[
    "的", "了", "是", "和", "在", "有", "我", "你", "他", "这",
    "那", "都", "也", "就", "与", "或", "着", "过", "吗", "呢",
    "吧", "啊", "得", "地", "一个", "没有", "还是", "而是",
    "the", "a", "an", "of", "and", "to", "in", "is", "it", "for",
];

static POS_TABLE: LazyLock<BTreeMap<&'static str, Pos>> = LazyLock::new(|| {
    let mut map = BTreeMap::new();
    let classes: [(&[&str], Pos); 9] = [
        (NOUNS, Pos::Noun),
        (VERBS, Pos::Verb),
        (ADJECTIVES, Pos::Adjective),
        (ADVERBS, Pos::Adverb),
        (CONJUNCTIONS, Pos::Conjunction),
        (PRONOUNS, Pos::Pronoun),
        (NUMERALS, Pos::Numeral),
        (AUXILIARIES, Pos::Auxiliary),
        (IDIOMS, Pos::Idiom),
    ];
    for (words, pos) in classes {
        for &w in words {
            let prior = map.insert(w, pos);
            assert!(prior.is_none(), "lexicon word {} listed twice", w);
        }
    }
    map
});

static STOPWORD_SET: LazyLock<BTreeSet<&'static str>> =
    LazyLock::new(|| STOPWORDS.iter().copied().collect());

pub fn lookup(word: &str) -> Pos {
    if let Some(&pos) = POS_TABLE.get(word) {
        return pos;
    }
    if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit()) {
        return Pos::Numeral;
    }
    Pos::Other
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORD_SET.contains(word)
}

pub fn idioms() -> &'static [&'static str] {
    IDIOMS
}

pub fn stopwords() -> &'static [&'static str] {
    STOPWORDS
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Word { text: String, pos: Pos },
    Punct(char),
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match self {
            Token::Word { text, .. } => Some(text),
            Token::Punct(_) => None,
        }
    }
}

fn word_token(text: String) -> Token {
    let pos = lookup(&text);
    Token::Word { text, pos }
}

/// Greedy longest-match segmentation. Whitespace separates, punctuation
/// becomes its own token, unmatched alphabetic characters become
/// single-character words.
pub fn segment(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            tokens.push(word_token(chars[start..i].iter().collect()));
        } else if c.is_alphabetic() {
            let mut matched = 1;
            for len in (2..=MAX_WORD_CHARS.min(chars.len() - i)).rev() {
                if !chars[i..i + len].iter().all(|ch| ch.is_alphabetic()) {
                    continue;
                }
                let candidate: String = chars[i..i + len].iter().collect();
                if POS_TABLE.contains_key(candidate.as_str()) {
                    matched = len;
                    break;
                }
            }
            tokens.push(word_token(chars[i..i + matched].iter().collect()));
            i += matched;
        } else {
            tokens.push(Token::Punct(c));
            i += 1;
        }
    }
    tokens
}

/// Words only, in order, dropping punctuation.
pub fn words(text: &str) -> Vec<String> {
    segment(text)
        .into_iter()
        .filter_map(|t| match t {
            Token::Word { text, .. } => Some(text),
            Token::Punct(_) => None,
        })
        .collect()
}
