//! Splits an advertisement into paragraphs, scores them with the cue-word
//! baseline and compares the text kept by the two preprocessing modes.

use occumatch::adfilter::{segment_paragraphs, BaselineScorer, Preprocessor, RelevanceFilter};

const AD: &str = "Pflegefachkraft (m/w/d)

Die Muster GmbH ist seit 1990 ein familiengeführtes Unternehmen mit Standorten in ganz Deutschland.

Ihre Aufgaben: Durchführung der Grund- und Behandlungspflege, Dokumentation der Pflegeprozesse, Zusammenarbeit mit Ärzten.

Ihr Profil: abgeschlossene Ausbildung als Pflegefachkraft, Kenntnisse in der Wundversorgung, Teamfähigkeit.

Wir bieten: 30 Tage Urlaub, Jobrad, betriebliche Altersvorsorge und kostenloses Obst.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paragraphs = segment_paragraphs("demo", AD)?;
    let scores = BaselineScorer::default().score(&paragraphs)?;
    for (p, s) in paragraphs.iter().zip(&scores) {
        let preview: String = p.text.chars().take(60).collect();
        println!("{s:.2}  {preview}");
    }

    for pre in [
        Preprocessor::token_cutoff().with_budget(40),
        Preprocessor::baseline_classifier().with_budget(40),
    ] {
        let kept = pre.apply("demo", AD)?;
        println!("\n[{}] {} tokens\n{kept}", pre.mode.label(), kept.split_whitespace().count());
    }
    Ok(())
}
