//! Visual context strategies and prompt construction.
//!
//! Two strategies turn frame descriptions into context for the translator:
//! `attr_vc` summarizes a window centred on the subtitle start into five
//! attribute tags, and `inter_vs` summarizes the frames in the gap before the
//! subtitle into free text. Both implement [`ContextStrategy`] and are looked
//! up by name in a [`StrategyRegistry`].

mod prompts;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backends::{Backend, BackendError};
use crate::error::{Error, Result};
use crate::timedtext::{SubtitleSegment, TimeSpan};
use crate::timeline::{frames_in_gap, frames_in_window, window_bounds, FrameDescription, GapSpan, Timeline};

pub use prompts::{
    attr_summarize, baseline_translate, gap_summarize, language_name, truncate_chars, visual_translate,
    PromptBundle, TemplateId, ATTR_SAMPLE_CHARS, GAP_BLOB_CHARS,
};

pub const ATTR_TAGS: [&str; 5] = ["SETTING", "GENDER", "RELATION", "HONORIFIC", "SUMMARY"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrContext {
    pub setting: String,
    pub gender: String,
    pub relation: String,
    pub honorific: String,
    pub summary: String,
    pub window: TimeSpan,
    /// Characters in the aggregated descriptions before truncation.
    pub source_char_count: usize,
    /// Window held no frames; the summarizer was not called.
    #[serde(default)]
    pub no_visual: bool,
    /// Tags absent from the summarizer output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_tags: Vec<String>,
}

impl AttrContext {
    fn empty(window: TimeSpan) -> Self {
        Self {
            setting: String::new(),
            gender: String::new(),
            relation: String::new(),
            honorific: String::new(),
            summary: String::new(),
            window,
            source_char_count: 0,
            no_visual: true,
            missing_tags: Vec::new(),
        }
    }

    fn fields(&self) -> [&str; 5] {
        [&self.setting, &self.gender, &self.relation, &self.honorific, &self.summary]
    }

    pub fn is_empty(&self) -> bool {
        self.fields().iter().all(|f| f.is_empty())
    }

    pub fn has_parse_warning(&self) -> bool {
        !self.missing_tags.is_empty()
    }

    /// The five tag lines inserted as visual context.
    pub fn to_prompt_text(&self) -> String {
        ATTR_TAGS
            .iter()
            .zip(self.fields())
            .map(|(tag, value)| format!("[{tag}]: {value}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Extracts the five tags from summarizer output. A tag's value runs until the
/// next known tag; line breaks inside a value collapse to spaces.
pub fn parse_attr_tags(output: &str) -> ([String; 5], Vec<String>) {
    let mut found: Vec<(usize, usize, usize)> = Vec::new(); // (start, value_start, tag)
    for (t, tag) in ATTR_TAGS.iter().enumerate() {
        let marker = format!("[{tag}]");
        if let Some(pos) = output.find(&marker) {
            found.push((pos, pos + marker.len(), t));
        }
    }
    found.sort_unstable();

    let mut values: [String; 5] = Default::default();
    let mut missing = Vec::new();
    for (i, &(_, value_start, t)) in found.iter().enumerate() {
        let end = found.get(i + 1).map_or(output.len(), |next| next.0);
        let raw = output[value_start..end.max(value_start)].trim_start();
        let raw = raw.strip_prefix(':').unwrap_or(raw);
        values[t] = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    for (t, tag) in ATTR_TAGS.iter().enumerate() {
        if !found.iter().any(|f| f.2 == t) {
            missing.push(tag.to_string());
        }
    }
    (values, missing)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapContext {
    pub text: String,
    pub gap: GapSpan,
    pub frame_count: usize,
}

impl GapContext {
    fn empty(gap: GapSpan) -> Self {
        Self {
            text: String::new(),
            gap,
            frame_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Attr,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VisualContext {
    Attr(AttrContext),
    Gap(GapContext),
}

impl VisualContext {
    pub fn kind(&self) -> ContextKind {
        match self {
            VisualContext::Attr(_) => ContextKind::Attr,
            VisualContext::Gap(_) => ContextKind::Gap,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            VisualContext::Attr(a) => a.is_empty(),
            VisualContext::Gap(g) => g.text.is_empty(),
        }
    }

    pub fn to_prompt_text(&self) -> String {
        match self {
            VisualContext::Attr(a) => a.to_prompt_text(),
            VisualContext::Gap(g) => g.text.clone(),
        }
    }
}

/// Translation prompt for one segment. Without context, or with an empty one,
/// this is the baseline template.
pub fn render_translation_prompt(
    source_text: &str,
    context: Option<&VisualContext>,
    target_language: &str,
) -> PromptBundle {
    let language = language_name(target_language);
    match context {
        Some(ctx) if !ctx.is_empty() => visual_translate(language, &ctx.to_prompt_text(), source_text),
        _ => baseline_translate(language, source_text),
    }
}

fn aggregate(frames: &[FrameDescription]) -> String {
    frames
        .iter()
        .map(|f| f.clean_text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Everything a strategy may look at for one segment.
#[derive(Debug, Clone, Copy)]
pub struct ContextInput<'a> {
    pub timeline: &'a Timeline,
    /// Corpus order; `position` indexes into it.
    pub segments: &'a [SubtitleSegment],
    pub position: usize,
    pub target_language: &'a str,
    pub duration_ms: u64,
}

impl ContextInput<'_> {
    pub fn segment(&self) -> &SubtitleSegment {
        &self.segments[self.position]
    }

    pub fn previous(&self) -> Option<&SubtitleSegment> {
        self.position.checked_sub(1).map(|p| &self.segments[p])
    }
}

/// A summarization request plus what the strategy needs to finish the context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextPlan {
    /// `None` when there is nothing to summarize.
    pub prompt: Option<PromptBundle>,
    pub empty: VisualContext,
    /// Characters of aggregated description that entered the prompt.
    pub prompt_chars: usize,
}

pub trait ContextStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> ContextKind;

    /// Builds the summarization prompt without calling any backend.
    fn plan(&self, input: &ContextInput<'_>) -> ContextPlan;

    /// Turns the summarizer reply into the final context.
    fn finish(&self, plan: ContextPlan, reply: &str) -> VisualContext;

    fn build(&self, input: &ContextInput<'_>, summarizer: &dyn Backend) -> Result<(VisualContext, usize), BackendError> {
        let plan = self.plan(input);
        let chars = plan.prompt_chars;
        match &plan.prompt {
            None => Ok((plan.empty, 0)),
            Some(prompt) => {
                let reply = summarizer.complete(prompt)?;
                Ok((self.finish(plan, &reply), chars))
            }
        }
    }
}

/// Attribute summary of a closed window centred on the subtitle start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttrWindow {
    pub half_width_ms: u64,
}

impl ContextStrategy for AttrWindow {
    fn name(&self) -> &'static str {
        "attr_vc"
    }

    fn kind(&self) -> ContextKind {
        ContextKind::Attr
    }

    fn plan(&self, input: &ContextInput<'_>) -> ContextPlan {
        let center = input.segment().span.start_ms();
        let (lo, hi) = window_bounds(center, self.half_width_ms, input.duration_ms);
        let window = TimeSpan::new(lo, hi.max(lo)).expect("ordered window");
        let frames = frames_in_window(input.timeline, center, self.half_width_ms, input.duration_ms);
        let mut empty = AttrContext::empty(window);
        if frames.is_empty() {
            return ContextPlan {
                prompt: None,
                empty: VisualContext::Attr(empty),
                prompt_chars: 0,
            };
        }
        let sample = aggregate(frames);
        empty.source_char_count = sample.chars().count();
        empty.no_visual = false;
        let prompt = attr_summarize(language_name(input.target_language), &sample);
        ContextPlan {
            prompt: Some(prompt),
            empty: VisualContext::Attr(empty),
            prompt_chars: truncated_len(&sample, ATTR_SAMPLE_CHARS),
        }
    }

    fn finish(&self, plan: ContextPlan, reply: &str) -> VisualContext {
        let VisualContext::Attr(mut ctx) = plan.empty else {
            unreachable!("attr plan carries an attr context")
        };
        let ([setting, gender, relation, honorific, summary], missing) = parse_attr_tags(reply);
        if !missing.is_empty() {
            log::warn!("summarizer output is missing tags {missing:?}");
        }
        ctx.setting = setting;
        ctx.gender = gender;
        ctx.relation = relation;
        ctx.honorific = honorific;
        ctx.summary = summary;
        ctx.missing_tags = missing;
        VisualContext::Attr(ctx)
    }
}

fn truncated_len(text: &str, limit: usize) -> usize {
    text.chars().count().min(limit)
}

/// Free-text summary of the frames between the previous subtitle's end and the
/// current subtitle's start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GapSummary;

impl ContextStrategy for GapSummary {
    fn name(&self) -> &'static str {
        "inter_vs"
    }

    fn kind(&self) -> ContextKind {
        ContextKind::Gap
    }

    fn plan(&self, input: &ContextInput<'_>) -> ContextPlan {
        let gap = GapSpan::between(input.previous(), input.segment());
        let frames = frames_in_gap(input.timeline, gap);
        let mut empty = GapContext::empty(gap);
        if frames.is_empty() {
            return ContextPlan {
                prompt: None,
                empty: VisualContext::Gap(empty),
                prompt_chars: 0,
            };
        }
        empty.frame_count = frames.len();
        let blob = aggregate(frames);
        let prompt = gap_summarize(gap.prev_end_ms / 1000, gap.cur_start_ms / 1000, &blob);
        ContextPlan {
            prompt: Some(prompt),
            empty: VisualContext::Gap(empty),
            prompt_chars: truncated_len(&blob, GAP_BLOB_CHARS),
        }
    }

    fn finish(&self, plan: ContextPlan, reply: &str) -> VisualContext {
        let VisualContext::Gap(mut ctx) = plan.empty else {
            unreachable!("gap plan carries a gap context")
        };
        ctx.text = reply.trim().to_string();
        VisualContext::Gap(ctx)
    }
}

/// Knobs shared by strategy constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyOptions {
    pub window_half_ms: u64,
}

impl Default for StrategyOptions {
    fn default() -> Self {
        Self {
            window_half_ms: crate::timeline::DEFAULT_WINDOW_HALF_MS,
        }
    }
}

pub type StrategyFactory = fn(&StrategyOptions) -> Box<dyn ContextStrategy>;

/// Context strategies by name.
pub struct StrategyRegistry {
    factories: BTreeMap<&'static str, StrategyFactory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self {
            factories: BTreeMap::new(),
        };
        r.register("attr_vc", |o| {
            Box::new(AttrWindow {
                half_width_ms: o.window_half_ms,
            })
        });
        r.register("inter_vs", |_| Box::new(GapSummary));
        r
    }
}

impl StrategyRegistry {
    pub fn register(&mut self, name: &'static str, factory: StrategyFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, options: &StrategyOptions) -> Result<Box<dyn ContextStrategy>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown context method {name:?} (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Ok(factory(options))
    }
}

/// One line of the context cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextCacheLine {
    pub idx: u32,
    pub kind: ContextKind,
    pub context: serde_json::Value,
    pub prompt_chars: usize,
}

impl ContextCacheLine {
    pub fn new(idx: u32, context: &VisualContext, prompt_chars: usize) -> Self {
        let value = match context {
            VisualContext::Attr(a) => serde_json::to_value(a),
            VisualContext::Gap(g) => serde_json::to_value(g),
        }
        .expect("context serializes");
        Self {
            idx,
            kind: context.kind(),
            context: value,
            prompt_chars,
        }
    }

    pub fn to_context(&self) -> serde_json::Result<VisualContext> {
        Ok(match self.kind {
            ContextKind::Attr => VisualContext::Attr(serde_json::from_value(self.context.clone())?),
            ContextKind::Gap => VisualContext::Gap(serde_json::from_value(self.context.clone())?),
        })
    }
}
