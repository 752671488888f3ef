use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    AttrSummarize,
    GapSummarize,
    BaselineTranslate,
    VisualTranslate,
}

/// A rendered prompt. `system_text` and `user_text` are the message bodies;
/// [`PromptBundle::render_raw`] wraps them in the model family's control tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: TemplateId,
    pub system_text: String,
    pub user_text: String,
}

impl PromptBundle {
    pub fn new(template_id: TemplateId, system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            template_id,
            system_text: system_text.into(),
            user_text: user_text.into(),
        }
    }

    /// The full pre-templated string: ChatML for the translation templates,
    /// Llama 3 header markers for the summarization templates.
    pub fn render_raw(&self) -> String {
        let (s, u) = (&self.system_text, &self.user_text);
        match self.template_id {
            TemplateId::BaselineTranslate | TemplateId::VisualTranslate => format!(
                "<|im_start|>system\n{s}\n<|im_end|>\n<|im_start|>user\n{u}\n<|im_end|>\n<|im_start|>assistant\n"
            ),
            TemplateId::AttrSummarize => format!(
                "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n{s}<|eot_id|><|start_header_id|>user<|end_header_id|>\n{u}<|eot_id|>\n<|start_header_id|>assistant<|end_header_id|>\n"
            ),
            TemplateId::GapSummarize => format!(
                "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n{s}\n<|eot_id|><|start_header_id|>user<|end_header_id|>\n{u}\n<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n"
            ),
        }
    }
}

/// Display name used inside prompts. ISO 639-3 codes of the five evaluation
/// languages map to English names; anything else passes through unchanged.
pub fn language_name(code: &str) -> &str {
    match code {
        "hin" => "Hindi",
        "ben" => "Bengali",
        "tel" => "Telugu",
        "tam" => "Tamil",
        "kan" => "Kannada",
        other => other,
    }
}

/// First `limit` Unicode scalar values of `text`.
pub fn truncate_chars(text: &str, limit: usize) -> &str {
    match text.char_indices().nth(limit) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

pub const ATTR_SAMPLE_CHARS: usize = 3000;
pub const GAP_BLOB_CHARS: usize = 2500;

pub fn attr_summarize(target_language: &str, sample: &str) -> PromptBundle {
    let system = format!(
        "Identify these cinematic attributes to guide {target_language} translation:\n\
[SETTING]: (e.g., Formal, Public, Intimate)\n\
[GENDER]: (Speaker/Listener gender)\n\
[RELATION]: (e.g., Stranger, Family, Hostile)\n\
[HONORIFIC]: (language\u{2011}specific, e.g., APNI/TUMI for Bengali)\n\
[SUMMARY]: (One sentence factual summary with emotional intent)\n\
Output ONLY these tags."
    );
    let user = format!("Visual Data: {}", truncate_chars(sample, ATTR_SAMPLE_CHARS));
    PromptBundle::new(TemplateId::AttrSummarize, system, user)
}

pub fn gap_summarize(start_sec: u64, end_sec: u64, text_blob: &str) -> PromptBundle {
    let system = format!(
        "You are a movie analyzer. Summarize the following visual descriptions\n\
from {start_sec}s to {end_sec}s of the movie into 2-3 sentences.\n\
Focus ONLY on the current location and character actions.\n\
Do not use introductory filler."
    );
    let user = format!("Visual Data: {}", truncate_chars(text_blob, GAP_BLOB_CHARS));
    PromptBundle::new(TemplateId::GapSummarize, system, user)
}

pub fn baseline_translate(target_language: &str, source: &str) -> PromptBundle {
    let system = format!(
        "You are a translation expert. Translate dialogue from English to {target_language}.\n\
RULES:\n\
- Provide ONLY the translated {target_language} dialogue.\n\
- DO NOT include explanations, or English text."
    );
    let user = format!(
        "[SOURCE]: \"{source}\"\n[TASK]: Translate to {target_language} dialogue."
    );
    PromptBundle::new(TemplateId::BaselineTranslate, system, user)
}

pub fn visual_translate(target_language: &str, visual_context: &str, source: &str) -> PromptBundle {
    let system = format!(
        "You are a cinematic multimodal translator specializing in English-to-{target_language}.\n\
Your goal is to provide a \"grounded translation\" where the choice of words depends on the visual scene.\n\
\n\
RULES:\n\
1. GENDER: Use the Visual Context to identify speaker/listener gender.\n\
2. HONORIFICS: Determine social hierarchy from the scene (Formal vs. Informal).\n\
3. LOOSE MEANING: Prioritize emotional intent and natural {target_language} flow.\n\
4. Output ONLY the translated {target_language} dialogue text. No names, no English."
    );
    let user = format!(
        "[VISUAL CONTEXT]: {visual_context}\n\
[ENGLISH SOURCE]: \"{source}\"\n\
[TASK]: Based on the visual scene, provide the most natural {target_language} translation."
    );
    PromptBundle::new(TemplateId::VisualTranslate, system, user)
}
