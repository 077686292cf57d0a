//! Built-in procedural templates. Profiles may override any stage.
//!
//! Every template asks for the `## SECTION` layout understood by
//! [`crate::layout`], and wraps material in XML-like tags so responses and
//! logged prompts stay inspectable.

use super::Stage;

pub const INDEPENDENT_READ: &str = r#"You are {persona}.
Your area of expertise: {expertise}.

Background knowledge you can draw on:
<semantic_memory>
{semantic_memory}
</semantic_memory>

Earlier news events you remember:
<episodic_memory>
{episodic_memory}
</episodic_memory>

Read the news article below on your own. It touches these domains: {domains}.
Analyse the parts inside your expertise with confidence. For the parts outside it, reason as far as you can, say where you are unsure, offer your best hypotheses, and ask questions that an expert in the relevant domain could answer.

<article title="{title}">
{article}
</article>

Answer in exactly this layout:
## ANALYSIS
Your overall understanding of the article.
## SEGMENT <domain>
Your understanding of the part of the article about <domain>. Repeat for every domain present.
## QUESTIONS
- @<domain>: A question for an expert in <domain>.
## UNCERTAINTIES
- Something you are unsure about."#;

pub const CONTROL_READ: &str = r#"You are {persona}.
Your area of expertise: {expertise}.

Background knowledge you can draw on:
<semantic_memory>
{semantic_memory}
</semantic_memory>

Earlier news events you remember:
<episodic_memory>
{episodic_memory}
</episodic_memory>

Read the news article below on your own, together with the supplementary material that accompanies it. The article touches these domains: {domains}.
Analyse the parts inside your expertise with confidence. For the parts outside it, reason as far as you can, say where you are unsure, offer your best hypotheses, and ask questions that an expert in the relevant domain could answer.

<article title="{title}">
{article}
</article>

<supplement>
{supplement}
</supplement>

Answer in exactly this layout:
## ANALYSIS
Your overall understanding of the article.
## SEGMENT <domain>
Your understanding of the part of the article about <domain>. Repeat for every domain present.
## QUESTIONS
- @<domain>: A question for an expert in <domain>.
## UNCERTAINTIES
- Something you are unsure about."#;

pub const DISCUSS: &str = r#"You are {persona}.
Your area of expertise: {expertise}.

You are taking part in discussion round {round_number} with readers from other backgrounds about the news article below. The article touches these domains: {domains}.

<article title="{title}">
{article}
</article>

Your own earlier contributions:
<own_contributions>
{own_contributions}
</own_contributions>

Summaries of the earlier rounds:
<summaries>
{summaries}
</summaries>

Initial readings shared by the group:
<initial_readings>
{initial_readings}
</initial_readings>

What the others have said so far in this round:
<current_round>
{current_round}
</current_round>

Questions raised so far. Answer the ones that fall within your expertise and cite their reference:
<open_questions>
{open_questions}
</open_questions>

Share your interpretation from your own field, ask the other experts about anything that confuses you or that seems relevant but lies outside your expertise, and clarify points others raised about your field.

Answer in exactly this layout:
## ANALYSIS
Your contribution to the discussion.
## QUESTIONS
- @<domain>: A question for the expert in <domain>.
## CLARIFICATIONS
- @<question reference>: Your explanation."#;

pub const SUMMARIZE: &str = r#"Summarize discussion round {round_number} about the article "{title}".

<utterances>
{utterances}
</utterances>

Questions on record:
<open_questions>
{open_questions}
</open_questions>

Answer in exactly this layout:
## KEY POINTS
The key points discussed in this round.
## OPEN QUESTIONS
- @<question reference>: A question that is still unanswered.
## CLARIFICATIONS
- @<question reference>: A clarification that was provided."#;

pub const SUPPLEMENT: &str = r#"Write supplementary material for the news article below so that readers from every background can understand it. Base it on the record of a discussion among readers with different expertise: the round summaries show what was discussed and clarified, and the gap list shows every point of confusion that came up.

<article title="{title}">
{article}
</article>

<summaries>
{summaries}
</summaries>

<gaps>
{gaps}
</gaps>

Write one section per gap, and always cover every gap whose status is unresolved. Tag each such section with the gap id in square brackets. You may add general sections without a tag.

Answer in exactly this layout:
## SECTION [<gap id>] <heading>
Explanation.
## SECTION <heading>
General explanation."#;

pub const VANILLA_SUPPLEMENT: &str = r#"Write supplementary material that helps a general audience understand the news article below.

<article title="{title}">
{article}
</article>

Answer in exactly this layout:
## SECTION <heading>
Explanation. Repeat for as many sections as needed."#;

pub const SEGMENT_CLASSIFY: &str = r#"Which one of these domains does the following paragraph of the news article "{title}" belong to: {domains}?

<paragraph>
{paragraph}
</paragraph>

Reply with the domain name only."#;

pub fn template_for(stage: Stage) -> &'static str {
    match stage {
        Stage::IndependentRead => INDEPENDENT_READ,
        Stage::Discuss => DISCUSS,
        Stage::Summarize => SUMMARIZE,
        Stage::Supplement => SUPPLEMENT,
        Stage::ControlRead => CONTROL_READ,
        Stage::VanillaSupplement => VANILLA_SUPPLEMENT,
        Stage::SegmentClassify => SEGMENT_CLASSIFY,
    }
}

/// Rendered in place of an empty semantic store.
pub const NO_BACKGROUND: &str = "(no background entries)";
/// Rendered in place of an empty episodic store.
pub const NO_EPISODES: &str = "(no remembered events)";
/// Rendered for empty transcript-derived bindings.
pub const NOTHING_YET: &str = "(none yet)";
