use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::parse::{parse_comprehension, parse_summary, parse_utterance};
use super::{
    round_questions, ComprehensionResponse, Condition, DiscussionError, DiscussionRound, DiscussionTranscript,
    QuestionRef, RecordedQuestion, RoundSummary, Utterance,
};
use crate::corpus::{DomainSet, NewsArticle};
use crate::llm::{Message, Provider};
use crate::memory::defaults::NOTHING_YET;
use crate::memory::{render_episodic, render_semantic, AgentProfile, ProceduralMemory, Stage, DEFAULT_RETRIEVAL_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscussionSettings {
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    /// Show every agent's independent reading in the round-0 context.
    #[serde(default = "default_true")]
    pub share_initial_readings: bool,
}

fn default_k() -> usize {
    DEFAULT_RETRIEVAL_K
}
fn default_true() -> bool {
    true
}

impl Default for DiscussionSettings {
    fn default() -> Self {
        Self {
            retrieval_k: DEFAULT_RETRIEVAL_K,
            share_initial_readings: true,
        }
    }
}

/// Runs readings and discussion rounds against one provider.
///
/// Round `i` only ever sees the summaries of rounds `0..i`, so running `n`
/// rounds yields a prefix of the transcript of any longer run.
#[derive(Debug)]
pub struct Discussion<'a> {
    provider: &'a Provider,
    domains: &'a DomainSet,
    settings: DiscussionSettings,
    neutral: ProceduralMemory,
}

impl<'a> Discussion<'a> {
    pub fn new(provider: &'a Provider, domains: &'a DomainSet) -> Self {
        Self {
            provider,
            domains,
            settings: DiscussionSettings::default(),
            neutral: ProceduralMemory::defaults(),
        }
    }

    pub fn with_settings(mut self, settings: DiscussionSettings) -> Self {
        self.settings = settings;
        self
    }

    /// Templates for calls that belong to no agent (summaries, supplements).
    pub fn with_neutral_templates(mut self, templates: ProceduralMemory) -> Self {
        self.neutral = templates;
        self
    }

    pub fn provider(&self) -> &Provider {
        self.provider
    }

    pub fn domains(&self) -> &DomainSet {
        self.domains
    }

    pub fn neutral_templates(&self) -> &ProceduralMemory {
        &self.neutral
    }

    fn ask(&self, prompt: String, tag: String) -> Result<String, DiscussionError> {
        let request = self.provider.config().chat_request(vec![Message::user(prompt)], tag);
        debug!(tag = %request.request_tag, "chat call");
        Ok(self.provider.complete(&request)?.content)
    }

    /// Semantic and episodic context retrieved for `article`.
    fn memory_context(&self, agent: &AgentProfile, article: &NewsArticle) -> Result<(String, String), DiscussionError> {
        let store = &agent.memory;
        if store.semantic.is_empty() && store.episodic.is_empty() {
            return Ok((render_semantic(&[]), render_episodic(&[])));
        }
        let query = self.provider.embed_one(&article.body)?;
        let k = self.settings.retrieval_k;
        let semantic = store.retrieve_semantic(&query.values, k)?;
        let episodic = store.retrieve_episodic(&query.values, k)?;
        Ok((render_semantic(&semantic), render_episodic(&episodic)))
    }

    /// One reading of `article` by `agent`. With a supplement this is the
    /// control-group reading, otherwise the independent reading.
    pub fn read(
        &self,
        agent: &AgentProfile,
        article: &NewsArticle,
        condition: Condition,
        supplement: Option<&str>,
    ) -> Result<ComprehensionResponse, DiscussionError> {
        require_segmented(article)?;
        let (semantic, episodic) = self.memory_context(agent, article)?;
        let mut bindings = vec![
            ("persona", agent.persona.clone()),
            ("expertise", agent.expertise_text()),
            ("semantic_memory", semantic),
            ("episodic_memory", episodic),
            ("domains", article_domains(article)),
            ("title", article.title.clone()),
            ("article", article.tagged_body()),
        ];
        let (stage, tag) = match supplement {
            Some(s) => {
                bindings.push(("supplement", s.to_owned()));
                (
                    Stage::ControlRead,
                    format!("control_read:{}:{}:{}", condition, article.id, agent.id),
                )
            }
            None => (
                Stage::IndependentRead,
                format!("independent_read:{}:{}", article.id, agent.id),
            ),
        };
        let prompt = agent.memory.procedural.render(stage, &bindings)?;
        let raw = self.ask(prompt, tag)?;
        parse_comprehension(&raw, &agent.id, article, self.domains, condition)
    }

    pub fn independent_read(
        &self,
        agent: &AgentProfile,
        article: &NewsArticle,
    ) -> Result<ComprehensionResponse, DiscussionError> {
        self.read(agent, article, Condition::Original, None)
    }

    /// Runs the next round of `transcript`. The transcript is not modified;
    /// the caller appends the returned round, so a failed round leaves no
    /// trace.
    pub fn run_round(
        &self,
        agents: &[AgentProfile],
        article: &NewsArticle,
        transcript: &DiscussionTranscript,
    ) -> Result<DiscussionRound, DiscussionError> {
        check_agents(agents)?;
        require_segmented(article)?;
        if transcript.article_id != article.id {
            return Err(DiscussionError::Precondition(format!(
                "transcript is for `{}`, article is `{}`",
                transcript.article_id, article.id
            )));
        }
        if transcript.initial_responses.is_empty() {
            return Err(DiscussionError::Precondition(
                "a round needs the independent readings first".into(),
            ));
        }
        let round = transcript.rounds.len();
        let mut utterances: Vec<Utterance> = Vec::with_capacity(agents.len());
        for agent in agents {
            let recorded = transcript.questions();
            let current = round_questions(round, &utterances);
            let known: BTreeSet<QuestionRef> = recorded.iter().chain(current.iter()).map(|q| q.reference).collect();
            let answered = answered_refs(transcript, &utterances);
            let open: Vec<&RecordedQuestion<'_>> = recorded
                .iter()
                .chain(current.iter())
                .filter(|q| !answered.contains(&q.reference))
                .collect();
            let bindings = [
                ("persona", agent.persona.clone()),
                ("expertise", agent.expertise_text()),
                ("round_number", (round + 1).to_string()),
                ("domains", article_domains(article)),
                ("title", article.title.clone()),
                ("article", article.tagged_body()),
                ("own_contributions", own_contributions(agent, transcript)),
                ("summaries", render_summaries(transcript.summaries())),
                ("initial_readings", self.initial_readings(transcript, round)),
                ("current_round", or_nothing(render_utterances(round, &utterances))),
                ("open_questions", or_nothing(render_questions(open.into_iter(), None))),
            ];
            let prompt = agent.memory.procedural.render(Stage::Discuss, &bindings)?;
            let raw = self.ask(prompt, format!("discuss:{}:r{round}:{}", article.id, agent.id))?;
            utterances.push(parse_utterance(&raw, &agent.id, round, self.domains, &known)?);
        }

        let answered = answered_refs(transcript, &utterances);
        let recorded = transcript.questions();
        let current = round_questions(round, &utterances);
        let all = recorded.iter().chain(current.iter());
        let bindings = [
            ("round_number", (round + 1).to_string()),
            ("title", article.title.clone()),
            ("utterances", render_utterances(round, &utterances)),
            ("open_questions", or_nothing(render_questions(all, Some(&answered)))),
        ];
        let prompt = self.neutral.render(Stage::Summarize, &bindings)?;
        let raw = self.ask(prompt, format!("summarize:{}:r{round}", article.id))?;
        let summary = parse_summary(&raw, round)?;
        Ok(DiscussionRound { utterances, summary })
    }

    /// Independent readings followed by `n_rounds` rounds. On failure the
    /// error carries everything completed before it.
    pub fn run_discussion(
        &self,
        agents: &[AgentProfile],
        article: &NewsArticle,
        n_rounds: usize,
    ) -> Result<DiscussionTranscript, DiscussionError> {
        if n_rounds < 1 {
            return Err(DiscussionError::Precondition("n_rounds must be >= 1".into()));
        }
        check_agents(agents)?;
        require_segmented(article)?;
        let mut transcript = DiscussionTranscript::new(article.id.clone(), n_rounds);
        let interrupted = |t: &DiscussionTranscript, e: DiscussionError| DiscussionError::Interrupted {
            partial: Box::new(t.clone()),
            source: Box::new(e),
        };
        for agent in agents {
            match self.independent_read(agent, article) {
                Ok(r) => transcript.initial_responses.push(r),
                Err(e) => return Err(interrupted(&transcript, e)),
            }
        }
        for _ in 0..n_rounds {
            match self.run_round(agents, article, &transcript) {
                Ok(r) => transcript.rounds.push(r),
                Err(e) => return Err(interrupted(&transcript, e)),
            }
        }
        info!(article = %article.id, rounds = n_rounds, "discussion complete");
        Ok(transcript)
    }

    fn initial_readings(&self, transcript: &DiscussionTranscript, round: usize) -> String {
        if !self.settings.share_initial_readings {
            return "(not shared)".into();
        }
        if round > 0 {
            return "(shared in round 1; see the summaries)".into();
        }
        transcript
            .initial_responses
            .iter()
            .map(|r| format!("<reading agent=\"{}\">\n{}\n</reading>", r.agent_id, r.whole_text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn require_segmented(article: &NewsArticle) -> Result<(), DiscussionError> {
    if article.segments.is_empty() {
        return Err(DiscussionError::Precondition(format!(
            "article `{}` has no domain segments",
            article.id
        )));
    }
    Ok(())
}

fn check_agents(agents: &[AgentProfile]) -> Result<(), DiscussionError> {
    if agents.len() < 2 {
        return Err(DiscussionError::Precondition(format!(
            "a discussion needs at least two agents, got {}",
            agents.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for a in agents {
        if !seen.insert(a.id.as_str()) {
            return Err(DiscussionError::Precondition(format!("duplicate agent id `{}`", a.id)));
        }
    }
    Ok(())
}

fn article_domains(article: &NewsArticle) -> String {
    article
        .segment_labels()
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn or_nothing(s: String) -> String {
    if s.is_empty() {
        NOTHING_YET.to_owned()
    } else {
        s
    }
}

/// References clarified so far, by utterances or by round summaries.
fn answered_refs(transcript: &DiscussionTranscript, current: &[Utterance]) -> BTreeSet<QuestionRef> {
    let mut out = BTreeSet::new();
    for u in transcript.rounds.iter().flat_map(|r| &r.utterances).chain(current) {
        out.extend(u.clarifications.iter().map(|c| c.answers));
    }
    for s in transcript.summaries() {
        for item in &s.clarifications_given {
            if let (Some(t), _) = crate::layout::addressed(item) {
                if let Ok(r) = t.parse() {
                    out.insert(r);
                }
            }
        }
    }
    out
}

fn own_contributions(agent: &AgentProfile, transcript: &DiscussionTranscript) -> String {
    let mut parts = Vec::new();
    if let Some(r) = transcript.initial_responses.iter().find(|r| r.agent_id == agent.id) {
        parts.push(format!("[independent reading]\n{}", r.whole_text));
    }
    for (i, round) in transcript.rounds.iter().enumerate() {
        for u in round.utterances.iter().filter(|u| u.agent_id == agent.id) {
            parts.push(format!("[round {}]\n{}", i + 1, u.text));
        }
    }
    or_nothing(parts.join("\n\n"))
}

pub(crate) fn render_summaries<'t>(summaries: impl Iterator<Item = &'t RoundSummary>) -> String {
    let parts: Vec<String> = summaries
        .map(|s| {
            let mut out = format!("<round number=\"{}\">\n{}", s.round_index + 1, s.key_points);
            if !s.open_questions.is_empty() {
                out.push_str("\nOpen questions:");
                for q in &s.open_questions {
                    out.push_str(&format!("\n- {q}"));
                }
            }
            if !s.clarifications_given.is_empty() {
                out.push_str("\nClarifications:");
                for c in &s.clarifications_given {
                    out.push_str(&format!("\n- {c}"));
                }
            }
            out.push_str("\n</round>");
            out
        })
        .collect();
    or_nothing(parts.join("\n"))
}

fn render_utterances(round: usize, utterances: &[Utterance]) -> String {
    let refs = round_questions(round, utterances);
    let mut refs = refs.iter();
    utterances
        .iter()
        .map(|u| {
            let mut out = format!("<utterance agent=\"{}\">\n{}", u.agent_id, u.text);
            for q in &u.questions {
                let r = refs.next().expect("one reference per question");
                out.push_str(&format!("\n[{}] @{}: {}", r.reference, q.asked_of, q.text));
            }
            for c in &u.clarifications {
                out.push_str(&format!("\nclarifies [{}]: {}", c.answers, c.text));
            }
            out.push_str("\n</utterance>");
            out
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_questions<'q, 'r: 'q>(
    questions: impl Iterator<Item = &'q RecordedQuestion<'r>>,
    status: Option<&BTreeSet<QuestionRef>>,
) -> String {
    questions
        .map(|q| {
            let target = q.asked_of.map(|d| d.as_str()).unwrap_or("anyone");
            let state = match status {
                Some(answered) if answered.contains(&q.reference) => " (clarified)",
                Some(_) => " (open)",
                None => "",
            };
            format!(
                "- [{}] {} asks @{}: {}{}",
                q.reference, q.asked_by, target, q.text, state
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}
