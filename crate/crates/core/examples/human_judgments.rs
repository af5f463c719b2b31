//! Majority-vote human evaluation: three experts judge the top 20 served
//! to two resumes, and the per-resume MAP@20, P@20 and MRR@20 are
//! tabulated with their average. A later vote overrides an earlier one.

use occumatch::evaluation::{evaluate_judgments, human_eval_table, Judgment, JudgmentSet, RankedList};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rankings: Vec<RankedList> = ["r1", "r2"]
        .iter()
        .map(|r| RankedList {
            query_id: r.to_string(),
            items: (1..=20).map(|i| format!("occ{i:03}")).collect(),
        })
        .collect();

    let mut judgments = JudgmentSet::new();
    for (resume, relevant_upto) in [("r1", 12), ("r2", 5)] {
        for rank in 1..=20 {
            for expert in ["a", "b", "c"] {
                // Expert c dissents on the first two ranks of r2.
                let relevant = rank <= relevant_upto && !(resume == "r2" && expert == "c" && rank <= 2);
                judgments.record(&Judgment {
                    resume_id: resume.into(),
                    esco_id: format!("occ{rank:03}"),
                    expert_id: expert.into(),
                    relevant,
                });
            }
        }
    }
    judgments.record(&Judgment {
        resume_id: "r2".into(),
        esco_id: "occ001".into(),
        expert_id: "b".into(),
        relevant: false,
    });

    let report = evaluate_judgments(&rankings, &judgments, 20)?;
    print!("{}", human_eval_table(&report).to_csv());
    Ok(())
}
