//! Renders every prompt family for the synthetic fixture movie, for the golden
//! files under `fixtures/golden`.

use std::fs;

use subgrain::context::{
    render_translation_prompt, AttrWindow, ContextInput, ContextStrategy, GapSummary, PromptBundle,
};
use subgrain::timedtext::{normalize, pair, parse_srt, FilterConfig, SubtitleSegment};
use subgrain::timeline::{load_frames, Timeline, DEFAULT_WINDOW_HALF_MS};

use super::workspace_fixture;

pub const LANGUAGE: &str = "ben";
pub const DURATION_MS: u64 = 120_000;
pub const ATTR_REPLY: &str = "[SETTING]: Intimate\n[GENDER]: Male speaker, female listener\n[RELATION]: Family\n[HONORIFIC]: TUMI\n[SUMMARY]: Siblings talk warmly at home before a journey.";

pub struct Movie {
    pub segments: Vec<SubtitleSegment>,
    pub timeline: Timeline,
}

fn srt(name: &str) -> Vec<SubtitleSegment> {
    let bytes = fs::read(workspace_fixture(&format!("synthetic/{name}"))).unwrap();
    parse_srt(&bytes).unwrap().segments.iter().map(normalize).collect()
}

pub fn synthetic() -> Movie {
    let (mut corpus, _) = pair("synthetic", LANGUAGE, &srt("source.en.srt"), &srt("reference.ben.srt")).unwrap();
    corpus.retain_filtered(FilterConfig::default()).unwrap();
    let timeline = load_frames(&workspace_fixture("synthetic/frames.jsonl"), None).unwrap();
    Movie {
        segments: corpus.sources(),
        timeline,
    }
}

fn block(out: &mut String, idx: u32, prompt: Option<&PromptBundle>) {
    out.push_str(&format!("### idx {idx}\n"));
    match prompt {
        None => out.push_str("(no prompt: empty visual context)\n"),
        Some(p) => {
            out.push_str(&format!("--- template {:?}\n", p.template_id));
            out.push_str(&format!("--- system\n{}\n", p.system_text));
            out.push_str(&format!("--- user\n{}\n", p.user_text));
            out.push_str(&format!("--- raw\n{}", p.render_raw()));
        }
    }
    out.push('\n');
}

/// (file name, contents) for the four prompt families.
pub fn render(movie: &Movie) -> Vec<(&'static str, String)> {
    let attr = AttrWindow {
        half_width_ms: DEFAULT_WINDOW_HALF_MS,
    };
    let gap = GapSummary;
    let mut files: Vec<(&'static str, String)> = vec![
        ("attr_summarize.txt", String::new()),
        ("gap_summarize.txt", String::new()),
        ("baseline_translate.txt", String::new()),
        ("visual_translate.txt", String::new()),
    ];
    for (position, seg) in movie.segments.iter().enumerate() {
        let input = ContextInput {
            timeline: &movie.timeline,
            segments: &movie.segments,
            position,
            target_language: LANGUAGE,
            duration_ms: DURATION_MS,
        };
        let attr_plan = attr.plan(&input);
        block(&mut files[0].1, seg.index, attr_plan.prompt.as_ref());
        block(&mut files[1].1, seg.index, gap.plan(&input).prompt.as_ref());
        block(
            &mut files[2].1,
            seg.index,
            Some(&render_translation_prompt(&seg.text, None, LANGUAGE)),
        );
        let ctx = attr.finish(attr_plan, ATTR_REPLY);
        block(
            &mut files[3].1,
            seg.index,
            Some(&render_translation_prompt(&seg.text, Some(&ctx), LANGUAGE)),
        );
    }
    files
}

/// Compares against the golden files, or rewrites them when `SUBGRAIN_BLESS` is set.
pub fn check_goldens() -> Result<(), String> {
    let movie = synthetic();
    let dir = workspace_fixture("golden");
    let bless = std::env::var_os("SUBGRAIN_BLESS").is_some();
    for (name, body) in render(&movie) {
        let path = dir.join(name);
        if bless {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &body).unwrap();
            continue;
        }
        let want = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if want != body.as_bytes() {
            let line = want
                .split(|&b| b == b'\n')
                .zip(body.as_bytes().split(|&b| b == b'\n'))
                .position(|(a, b)| a != b)
                .map_or(0, |l| l + 1);
            return Err(format!("{name} differs from golden (first differing line {line})"));
        }
    }
    Ok(())
}
