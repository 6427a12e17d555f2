use crate::corpus_model::{RankedParagraph, Ranking};

/// Orders paragraphs by descending score, ties by ascending paragraph number.
pub fn rank_paragraphs(
    query_id: &str,
    judgment_id: &str,
    scores: impl IntoIterator<Item = (u32, f64)>,
) -> Ranking {
    let mut entries: Vec<RankedParagraph> = scores
        .into_iter()
        .map(|(num, score)| RankedParagraph { num, score })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.num.cmp(&b.num)));
    Ranking {
        query_id: query_id.to_string(),
        judgment_id: judgment_id.to_string(),
        entries,
    }
}
