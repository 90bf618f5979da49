//! Memory-task scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::io::{AdjudicationRecord, ResponseRecord, Verdict};
use crate::model::{Session, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPairResponse {
    pub cue: String,
    pub target: String,
    pub response: String,
    pub adjudication: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResponse {
    pub stimulus_id: String,
    pub is_old: bool,
    pub answered_old: bool,
    /// Quadrant 1–4 where an old picture was shown.
    pub location_truth: Option<u8>,
    /// Only present when the item was answered "old".
    pub location_answer: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryScore {
    pub task: Task,
    pub session: Session,
    pub value: f64,
    pub n_items: usize,
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Exact match after normalization, or one edit (insertion, deletion,
/// substitution or adjacent transposition) away. Adjudication wins.
pub fn word_pair_correct(r: &WordPairResponse) -> bool {
    match r.adjudication {
        Some(Verdict::Accept) => return true,
        Some(Verdict::Reject) => return false,
        None => {}
    }
    let resp = normalize(&r.response);
    if resp.is_empty() {
        return false;
    }
    let target = normalize(&r.target);
    resp == target || strsim::damerau_levenshtein(&resp, &target) <= 1
}

/// Number of correctly recalled words.
pub fn score_word_pairs(responses: &[WordPairResponse], session: Session) -> Result<MemoryScore> {
    if responses.is_empty() {
        return Err(Error::invalid("no word-pair responses"));
    }
    let correct = responses.iter().filter(|r| word_pair_correct(r)).count();
    Ok(MemoryScore {
        task: Task::WordPairs,
        session,
        value: correct as f64,
        n_items: responses.len(),
    })
}

/// Proportion of correct "old" answers plus proportion of correct "new" answers (0–2).
pub fn score_picture(responses: &[RecognitionResponse], session: Session) -> Result<MemoryScore> {
    let n_old = responses.iter().filter(|r| r.is_old).count();
    let n_new = responses.len() - n_old;
    if n_old == 0 || n_new == 0 {
        return Err(Error::invalid(format!(
            "picture score needs old and new items (old={n_old}, new={n_new})"
        )));
    }
    let hit = responses.iter().filter(|r| r.is_old && r.answered_old).count();
    let correct_reject = responses.iter().filter(|r| !r.is_old && !r.answered_old).count();
    Ok(MemoryScore {
        task: Task::Picture,
        session,
        value: hit as f64 / n_old as f64 + correct_reject as f64 / n_new as f64,
        n_items: responses.len(),
    })
}

/// (correct locations − false locations) / correct "old" answers, in [−1, 1].
///
/// Returns `Ok(None)` when no old item was recognized (score undefined).
pub fn score_location(responses: &[RecognitionResponse], session: Session) -> Result<Option<MemoryScore>> {
    let hits: Vec<&RecognitionResponse> =
        responses.iter().filter(|r| r.is_old && r.answered_old).collect();
    if hits.is_empty() {
        return Ok(None);
    }
    let mut right = 0usize;
    let mut wrong = 0usize;
    for r in &hits {
        match (r.location_truth, r.location_answer) {
            (Some(t), Some(a)) if t == a => right += 1,
            (_, Some(_)) => wrong += 1,
            _ => {}
        }
    }
    Ok(Some(MemoryScore {
        task: Task::Location,
        session,
        value: (right as f64 - wrong as f64) / hits.len() as f64,
        n_items: hits.len(),
    }))
}

/// `delayed − immediate`; positive means the score improved across the nap.
pub fn performance_diff(immediate: &MemoryScore, delayed: &MemoryScore) -> Result<f64> {
    if immediate.task != delayed.task {
        return Err(Error::invalid(format!(
            "cannot compare {} with {}",
            immediate.task, delayed.task
        )));
    }
    Ok(delayed.value - immediate.value)
}

fn parse_old_new(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "old" | "o" => Ok(true),
        "new" | "n" => Ok(false),
        other => Err(Error::invalid(format!("expected old/new, got {other:?}"))),
    }
}

/// Word-pair rows of one session, with adjudications applied by (cue, response).
pub fn word_pair_responses(
    rows: &[ResponseRecord],
    session: Session,
    adjudications: &[AdjudicationRecord],
) -> Vec<WordPairResponse> {
    rows.iter()
        .filter(|r| r.task == Task::WordPairs && r.session == session)
        .map(|r| {
            let adjudication = adjudications
                .iter()
                .find(|a| normalize(&a.cue) == normalize(&r.stimulus_id) && normalize(&a.response) == normalize(&r.response))
                .map(|a| a.verdict);
            WordPairResponse {
                cue: r.stimulus_id.clone(),
                target: r.truth.clone(),
                response: r.response.clone(),
                adjudication,
            }
        })
        .collect()
}

/// Recognition rows of one session. Picture and location share trials; rows
/// of either task are accepted and de-duplicated by stimulus id.
pub fn recognition_responses(rows: &[ResponseRecord], session: Session) -> Result<Vec<RecognitionResponse>> {
    let mut out: Vec<RecognitionResponse> = Vec::new();
    for r in rows
        .iter()
        .filter(|r| r.session == session && matches!(r.task, Task::Picture | Task::Location))
    {
        if out.iter().any(|o| o.stimulus_id == r.stimulus_id) {
            continue;
        }
        let answered_old = parse_old_new(&r.response)?;
        if r.quadrant_answer.is_some() && !answered_old {
            return Err(Error::invalid(format!(
                "stimulus {}: location answer given for a \"new\" response",
                r.stimulus_id
            )));
        }
        out.push(RecognitionResponse {
            stimulus_id: r.stimulus_id.clone(),
            is_old: parse_old_new(&r.truth)?,
            answered_old,
            location_truth: r.quadrant_truth,
            location_answer: r.quadrant_answer,
        });
    }
    Ok(out)
}

/// Whether the response to `stimulus_id` in this task counts as a successful recall.
pub fn is_successful(task: Task, row: &ResponseRecord, adjudications: &[AdjudicationRecord]) -> bool {
    match task {
        Task::WordPairs => word_pair_responses(std::slice::from_ref(row), row.session, adjudications)
            .first()
            .is_some_and(word_pair_correct),
        Task::Picture => match (parse_old_new(&row.truth), parse_old_new(&row.response)) {
            (Ok(t), Ok(a)) => t == a,
            _ => false,
        },
        Task::Location => {
            row.quadrant_truth.is_some() && row.quadrant_truth == row.quadrant_answer
        }
    }
}

/// Scores of all three tasks for one session. Location is `None` when undefined.
pub fn score_session(
    rows: &[ResponseRecord],
    session: Session,
    adjudications: &[AdjudicationRecord],
) -> Result<Vec<(Task, Option<MemoryScore>)>> {
    let wp = score_word_pairs(&word_pair_responses(rows, session, adjudications), session)?;
    let rec = recognition_responses(rows, session)?;
    let pic = score_picture(&rec, session)?;
    let loc = score_location(&rec, session)?;
    Ok(vec![
        (Task::WordPairs, Some(wp)),
        (Task::Picture, Some(pic)),
        (Task::Location, loc),
    ])
}
