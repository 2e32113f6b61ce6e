use crate::agent::{build_generator_prompt, generate, verify, ChatClient, IncidentDescription, PromptContext, Transcript};
use crate::tlrs::{Embedder, QaEntry, TrafficLanguageDb};

use super::RunError;

/// Builds a reference database by running each report through the generator
/// and verifier against nominal parameters. Reports the generator cannot
/// answer are skipped and noted in the transcript.
pub fn references_from_reports(
    reports: &[IncidentDescription],
    ctx: &PromptContext<'_>,
    client: &dyn ChatClient,
    embedder: &dyn Embedder,
    retry_budget: u32,
    transcript: &mut Transcript,
) -> Result<TrafficLanguageDb, RunError> {
    let lanes = ctx.layout.lane_count();
    let nominal = vec![ctx.theta_max; lanes];
    let mut db = TrafficLanguageDb::new();
    for (i, report) in reports.iter().enumerate() {
        transcript.note(format!("##### report {}", i + 1));
        let bundle = build_generator_prompt(ctx, report, None, true);
        let g = match generate(&bundle, client, retry_budget, ctx.theta_min, ctx.theta_max, lanes, transcript) {
            Ok(g) => g,
            Err(e) => {
                transcript.note(format!("skipped: {e}"));
                continue;
            }
        };
        let verdict = verify(ctx, report, &nominal, &g.theta, &g.trace, client, retry_budget, transcript)
            .map(|v| v.verdict)
            .map_err(|e| transcript.note(format!("verification failed: {e}")))
            .ok();
        let entry = QaEntry::build(
            format!("e{:05}-report", db.len()),
            report.render(),
            g.trace.tau_cond,
            g.trace.tau_ctrl,
            verdict,
            0,
            embedder,
        )?;
        db.insert(entry)?;
    }
    Ok(db)
}
